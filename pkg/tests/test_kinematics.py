import itertools

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cosshell.errors import InvalidInputError
from cosshell.kinematics import (MINOR_ROW_PAIRS, area_ratio, is_rotation, minors, orientation_J,
                                 random_rotation, rotate)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def all_2x2_minors(F, G):
    """Oracle: every 2x2 minor of the 2x6 matrix [F^T | G^T], by column pairs."""
    U = np.concatenate([F.T, G.T], axis=1)
    return {(i, j): U[0, i] * U[1, j] - U[1, i] * U[0, j]
            for i, j in itertools.combinations(range(6), 2)}


def test_frozen_integer_minors():
    F = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    G = np.array([[7.0, 8.0], [9.0, 10.0], [11.0, 12.0]])
    m = minors(F, G)
    # hand-computed: f1 x f2 = (-2, 4, -2); m_l = F_i1 G_j2 - F_i2 G_j1 for (i, j) row-major
    expected = [-2, 4, -2,
                1 * 8 - 2 * 7, 1 * 10 - 2 * 9, 1 * 12 - 2 * 11,
                3 * 8 - 4 * 7, 3 * 10 - 4 * 9, 3 * 12 - 4 * 11,
                5 * 8 - 6 * 7, 5 * 10 - 6 * 9, 5 * 12 - 6 * 11,
                -2, 4, -2]
    np.testing.assert_array_equal(m, expected)


def test_m7_uses_matching_director_row():
    # m_7 pairs row 2 of F with row 1 of G: F21 G12 - F22 G11
    F = np.zeros((3, 2))
    G = np.zeros((3, 2))
    F[1] = [2.0, 3.0]
    G[0] = [5.0, 7.0]
    assert minors(F, G)[6] == pytest.approx(2.0 * 7.0 - 3.0 * 5.0)


def test_minor_table_matches_column_pairs(rng):
    F = rng.standard_normal((3, 2))
    G = rng.standard_normal((3, 2))
    m = minors(F, G)
    oracle = all_2x2_minors(F, G)
    col = {("F", k): k for k in range(3)} | {("G", k): 3 + k for k in range(3)}
    for l, (a, b) in enumerate(MINOR_ROW_PAIRS):
        i, j = col[a], col[b]
        val = oracle[(i, j)] if i < j else -oracle[(j, i)]
        assert m[l] == pytest.approx(val, rel=1e-13, abs=1e-14)


def test_batched_shapes(rng):
    F = rng.standard_normal((4, 5, 3, 2))
    G = rng.standard_normal((4, 5, 3, 2))
    assert minors(F, G).shape == (4, 5, 15)
    assert orientation_J(rng.standard_normal((4, 5, 3)), F).shape == (4, 5)
    assert area_ratio(F).shape == (4, 5)


@settings(max_examples=200, deadline=None)
@given(arrays(float, (3, 2), elements=finite), arrays(float, (3, 2), elements=finite))
def test_cauchy_binet(F, G):
    U = np.concatenate([F.T, G.T], axis=1)
    lhs = np.sum(minors(F, G) ** 2)
    rhs = np.linalg.det(U @ U.T)
    # the Gram determinant cancels terms of size |U|^4
    assert abs(lhs - rhs) <= 1e-12 * np.sum(U * U) ** 2 + 1e-300


@settings(max_examples=200, deadline=None)
@given(arrays(float, (3, 2), elements=finite))
@example(np.full((3, 2), 8.125))
def test_area_ratio_is_gram_root(F):
    # compared squared: near rank deficiency the Gram determinant is the inaccurate side
    gram = np.linalg.det(F.T @ F)
    assert abs(area_ratio(F) ** 2 - gram) <= 1e-12 * np.sum(F * F) ** 2 + 1e-300


def test_orientation_J_triple_product(rng):
    d = rng.standard_normal(3)
    F = rng.standard_normal((3, 2))
    assert orientation_J(d, F) == pytest.approx(np.linalg.det(np.column_stack([F, d])))


def test_random_rotation_and_rotate(rng):
    Q = random_rotation(rng)
    assert is_rotation(Q)
    d, F, G = rng.standard_normal(3), rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
    rd, rF, rG = rotate(Q, d, F, G)
    np.testing.assert_allclose(minors(rF, rG)[:3], Q @ minors(F, G)[:3], atol=1e-13)
    assert orientation_J(rd, rF) == pytest.approx(orientation_J(d, F), rel=1e-13)


def test_reflection_rejected(rng):
    R = np.diag([1.0, 1.0, -1.0])
    assert not is_rotation(R)
    with pytest.raises(InvalidInputError):
        rotate(R, np.zeros(3), np.zeros((3, 2)), np.zeros((3, 2)))


def test_non_finite_rejected():
    F = np.full((3, 2), np.nan)
    with pytest.raises(InvalidInputError):
        minors(F, F)
    with pytest.raises(InvalidInputError):
        area_ratio(np.zeros((3, 3)))
