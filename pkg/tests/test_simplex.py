import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from incentives.errors import DegeneracyError, NonnegativityError, ValidationError
from incentives.simplex import (
    ClassSpace,
    SimplexVector,
    UtilityMatrix,
    class_weights_to_utility,
    expected_utility,
    simplex_normalize,
    validate_utility,
)

from helpers import random_utility


class TestSimplexNormalize:
    @pytest.mark.parametrize(
        "v, expected",
        [((2, 2), (0.5, 0.5)), ((1, 0, 0), (1, 0, 0)), ((99, 1), (0.99, 0.01))],
    )
    def test_examples(self, v, expected):
        np.testing.assert_allclose(simplex_normalize(v).values, expected, atol=1e-15)

    def test_zero_vector(self):
        with pytest.raises(ValidationError):
            simplex_normalize([0, 0])

    def test_negative_entry_names_index(self):
        with pytest.raises(ValidationError, match="index 2"):
            simplex_normalize([1, -1, 3])

    @given(arrays(float, st.integers(2, 8), elements=st.floats(0, 1e6)))
    def test_result_is_on_simplex(self, v):
        if not v.sum() > 0:
            return
        p = simplex_normalize(v)
        assert np.all(p.values >= 0)
        assert abs(p.values.sum() - 1) <= 1e-9


class TestSimplexVector:
    def test_renormalizes_within_tolerance(self):
        p = SimplexVector([0.5, 0.5 + 1e-10])
        assert p.values.sum() == pytest.approx(1, abs=1e-15)

    def test_rejects_off_simplex(self):
        with pytest.raises(ValidationError):
            SimplexVector([0.5, 0.6])

    def test_one_based_access(self):
        p = SimplexVector([0.2, 0.8])
        assert p[1] == 0.2 and p[2] == 0.8
        with pytest.raises(ValidationError):
            p[0]

    def test_immutable(self):
        p = SimplexVector([0.2, 0.8])
        with pytest.raises(ValueError):
            p.values[0] = 1.0

    def test_csv_round_trip(self):
        p = simplex_normalize([1, 2, 3])
        assert SimplexVector.from_csv_row(p.to_csv_row()) == p


class TestClassSpace:
    def test_default_labels(self):
        cs = ClassSpace(3)
        assert cs.labels == ("1", "2", "3")
        assert cs.index("2") == 2

    def test_rejects_small_or_duplicate(self):
        with pytest.raises(ValidationError):
            ClassSpace(1)
        with pytest.raises(ValidationError):
            ClassSpace(2, ("a", "a"))


class TestValidateUtility:
    def test_identity(self):
        U = validate_utility(np.eye(2))
        assert U.is_diagonal and U.invertible

    def test_rank_one_flagged(self):
        U = validate_utility([[1, 1], [1, 1]])
        assert not U.is_diagonal
        assert not U.invertible

    def test_zero_column(self):
        with pytest.raises(DegeneracyError) as exc:
            validate_utility([[1, 0], [0, 0]])
        assert exc.value.cls == 2

    def test_negative(self):
        with pytest.raises(NonnegativityError):
            validate_utility([[1, -0.1], [0, 1]])

    def test_not_square(self):
        with pytest.raises(ValidationError):
            validate_utility([[1, 0, 1], [0, 1, 1]])

    def test_class_space_mismatch(self):
        with pytest.raises(ValidationError):
            validate_utility(np.eye(2), ClassSpace(3))

    def test_mutation_property(self, rng):
        # valid matrices pass; a negative entry or a zeroed column is rejected
        for _ in range(200):
            m = int(rng.integers(2, 7))
            U = random_utility(rng, m)
            validate_utility(U)
            bad = U.copy()
            bad[rng.integers(m), rng.integers(m)] = -rng.uniform(1e-6, 1)
            with pytest.raises(NonnegativityError):
                validate_utility(bad)
            dead = U.copy()
            y = rng.integers(m)
            dead[:, y] = 0
            with pytest.raises(DegeneracyError) as exc:
                validate_utility(dead)
            assert exc.value.cls == y + 1

    def test_csv_round_trip(self, tmp_path):
        U = validate_utility([[2, 1e-3], [1 / 3, 1]])
        U.save(tmp_path / "u.csv")
        assert UtilityMatrix.load(tmp_path / "u.csv") == U
        assert (tmp_path / "u.csv").read_text().count("\n") == 2


class TestClassWeights:
    @pytest.mark.parametrize("w", [(1, 1), (1.98, 0.02), (99, 1)])
    def test_diagonal(self, w):
        U = class_weights_to_utility(w)
        np.testing.assert_array_equal(U.entries, np.diag(w))
        assert U.is_diagonal
        np.testing.assert_array_equal(U.weights, w)

    def test_nonpositive(self):
        with pytest.raises(ValidationError):
            class_weights_to_utility([1, 0])


class TestExpectedUtility:
    @pytest.mark.parametrize(
        "y, q, U, expected",
        [
            (1, (1, 0), np.eye(2), 1.0),
            (1, (0.5, 0.5), np.diag([1.98, 0.02]), 0.99),
            (1, (0.5, 0.5), [[2, 1], [1, 1]], 1.5),
        ],
    )
    def test_examples(self, y, q, U, expected):
        assert expected_utility(y, q, U) == pytest.approx(expected, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            expected_utility(1, (0.5, 0.5), np.eye(3))

    @settings(max_examples=200)
    @given(st.integers(2, 6), st.floats(0, 1), st.integers(0, 2**32 - 1))
    def test_linear_in_q(self, m, alpha, seed):
        rng = np.random.default_rng(seed)
        U = random_utility(rng, m)
        q, q2 = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
        mix = alpha * q + (1 - alpha) * q2
        for y in range(1, m + 1):
            lhs = expected_utility(y, mix / mix.sum(), U)
            rhs = alpha * expected_utility(y, q, U) + (1 - alpha) * expected_utility(y, q2, U)
            assert abs(lhs - rhs) <= 1e-12
