import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import jacobi_sqrt, ols_r2, r2_contributions, random_correlation, random_joint
from spillover.errors import DecompositionError
from spillover.r2core import (
    DecompositionMatrix,
    build_design,
    column_map,
    decompose_r2,
    full_decomposition,
    split,
    symmetric_sqrt,
)


def test_column_map_examples():
    assert column_map(3, 1, 0) == ((0, 0), (2, 0))
    assert column_map(2, 0, 1) == ((1, 0), (0, 1), (1, 1))
    assert len(column_map(19, 4, 1)) == 37


def test_build_design_layout():
    rng = np.random.default_rng(0)
    y = rng.normal(size=(30, 2))
    lhs, rhs, spec = build_design(y, 0, 1)
    assert rhs.shape == (29, 3)
    np.testing.assert_allclose(lhs, y[1:, 0] - y[1:, 0].mean())
    np.testing.assert_allclose(rhs[:, 0], y[1:, 1] - y[1:, 1].mean())
    np.testing.assert_allclose(rhs[:, 2], y[:-1, 1] - y[:-1, 1].mean())
    assert spec.column_map == ((1, 0), (0, 1), (1, 1))


def test_build_design_too_few_rows_and_constant_column():
    with pytest.raises(DecompositionError, match="rows"):
        build_design(np.random.default_rng(0).normal(size=(13, 2)), 0, 1)
    y = np.random.default_rng(0).normal(size=(40, 3))
    y[:, 2] = 1.0
    with pytest.raises(DecompositionError, match="series 2"):
        build_design(y, 0, 1)


def test_sqrt_identity_and_oracle():
    np.testing.assert_allclose(symmetric_sqrt(np.eye(4)), np.eye(4), atol=1e-15)
    R = np.array([[1, 0.5], [0.5, 1]])
    C = symmetric_sqrt(R)
    np.testing.assert_allclose(C @ C, R, atol=1e-10)
    np.testing.assert_allclose(C, jacobi_sqrt(R), atol=1e-12)


def test_sqrt_rank_deficient_ones():
    C = symmetric_sqrt(np.ones((2, 2)))
    np.testing.assert_allclose(C @ C, np.ones((2, 2)), atol=1e-6)


def test_sqrt_rejects_asymmetric_and_negative():
    with pytest.raises(DecompositionError, match="symmetric"):
        symmetric_sqrt(np.array([[1, 0.5], [0.4, 1]]))
    with pytest.raises(DecompositionError, match="negative"):
        symmetric_sqrt(np.array([[1, 2.0], [2.0, 1]]))


def test_orthogonal_regressors_square_correlations():
    ryx = np.array([0.3, -0.2, 0.5])
    np.testing.assert_allclose(decompose_r2(np.eye(3), ryx).contributions, ryx * ryx, atol=1e-12)


def test_single_regressor():
    vec = decompose_r2(np.array([[1.0]]), [0.6])
    np.testing.assert_allclose(vec.contributions, [0.36])


def test_two_regressor_example_against_oracle():
    Rxx = np.array([[1, 0.5], [0.5, 1]])
    ryx = np.array([0.6, 0.4])
    vec = decompose_r2(Rxx, ryx)
    total = ryx @ np.linalg.solve(Rxx, ryx)
    assert total == pytest.approx(0.37333333333333335)
    assert vec.r_squared == pytest.approx(total, abs=1e-12)
    np.testing.assert_allclose(vec.contributions, r2_contributions(Rxx, ryx), atol=1e-12)


def test_random_instances_match_oracle_and_ols():
    rng = np.random.default_rng(4)
    for _ in range(20):
        m = int(rng.integers(1, 8))
        Rxx, ryx = random_joint(rng, m)
        np.testing.assert_allclose(decompose_r2(Rxx, ryx).contributions, r2_contributions(Rxx, ryx), atol=1e-9)
    y = rng.normal(size=(300, 4)) @ rng.normal(size=(4, 4))
    R = np.corrcoef(y, rowvar=False)
    vec = decompose_r2(R[1:, 1:], R[1:, 0])
    assert vec.r_squared == pytest.approx(ols_r2(y[:, 0], y[:, 1:]), abs=1e-10)


def test_r2_above_one_rejected():
    with pytest.raises(DecompositionError, match="exceeds 1"):
        decompose_r2(np.array([[1, 0.9], [0.9, 1]]), [0.9, -0.9])


def test_size_mismatch_rejected():
    with pytest.raises(DecompositionError):
        decompose_r2(np.eye(2), [0.1, 0.2, 0.3])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_completeness_and_nonnegativity(m, seed):
    rng = np.random.default_rng(seed)
    Rxx, ryx = random_joint(rng, m)
    vec = decompose_r2(Rxx, ryx)
    assert np.all(vec.contributions >= -1e-12)
    assert vec.r_squared == pytest.approx(ryx @ np.linalg.solve(Rxx, ryx), abs=1e-8)


def test_independent_noise_p0_near_zero():
    D = full_decomposition(np.random.default_rng(9).normal(size=(500, 4)), 0)
    assert np.all(np.abs(D.blocks) < 0.05)


def test_perfect_fit_pair():
    x = np.random.default_rng(1).normal(size=50)
    D = full_decomposition(np.column_stack([x, x]), 0)
    np.testing.assert_allclose(D.blocks[0], [[0, 1], [1, 0]], atol=1e-9)
    np.testing.assert_allclose(D.r_squared_per_equation, [1, 1], atol=1e-9)


def test_full_decomposition_shape_and_conservation():
    rng = np.random.default_rng(2)
    y = rng.normal(size=(200, 19))
    D = full_decomposition(y, 1)
    assert D.blocks.shape == (2, 19, 19)
    np.testing.assert_array_equal(np.diag(D.blocks[0]), 0.0)
    R_C, R_L = split(D)
    np.testing.assert_allclose((R_C + R_L).sum(axis=1), D.r_squared_per_equation, atol=1e-8)
    for k in (0, 7):
        lhs, rhs, _ = build_design(y, k, 1)
        assert D.r_squared_per_equation[k] == pytest.approx(ols_r2(lhs, rhs), abs=1e-9)


@pytest.mark.parametrize("kind", ["spearman", "kendall"])
def test_rank_kinds_run(kind):
    D = full_decomposition(np.random.default_rng(3).normal(size=(80, 3)), 1, kind)
    assert np.all(D.r_squared_per_equation >= 0) and np.all(D.r_squared_per_equation <= 1)


def test_split_definitions():
    blocks = np.arange(27, dtype=float).reshape(3, 3, 3)
    blocks[0][np.diag_indices(3)] = 0
    D = DecompositionMatrix(3, 2, blocks, blocks.sum(axis=(0, 2)))
    R_C, R_L = split(D)
    np.testing.assert_array_equal(R_C, blocks[0])
    np.testing.assert_array_equal(R_L, blocks[1] + blocks[2])
    D0 = DecompositionMatrix(3, 0, blocks[:1], blocks[0].sum(axis=1))
    np.testing.assert_array_equal(split(D0)[1], np.zeros((3, 3)))


def test_equation_named_in_error():
    y = np.random.default_rng(0).normal(size=(40, 2))
    y[:, 1] = 3.0
    with pytest.raises(DecompositionError, match="series 1"):
        full_decomposition(y, 1)


def test_random_correlation_helper_is_psd():
    R = random_correlation(np.random.default_rng(0), 6)
    assert np.linalg.eigvalsh(R).min() > -1e-12
