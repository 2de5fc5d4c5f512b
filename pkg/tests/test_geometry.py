import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from integral_menger import geometry as g
from integral_menger.errors import InvalidInputError, NumericalDegeneracyError
from oracles import heron_curvature

SQ3 = math.sqrt(3)
EQUILATERAL = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, SQ3 / 2]])


# --- documented values ------------------------------------------------------------


def test_wedge_norm_values():
    assert g.wedge_norm([[1, 0, 0], [0, 1, 0]]) == pytest.approx(1.0, abs=1e-15)
    # Gram matrix [[1, 1], [1, 2]] has determinant 1
    assert g.wedge_norm([[1, 0, 0], [1, 1, 0]]) == pytest.approx(1.0, abs=1e-15)
    assert g.wedge_norm([[1, 2, 3]]) == pytest.approx(math.sqrt(14), rel=1e-15)


def test_wedge_norm_more_vectors_than_dimensions_is_zero():
    assert g.wedge_norm(np.eye(3)[[0, 1, 2, 0]]) == 0.0


def test_wedge_norm_ragged_input_rejected():
    with pytest.raises(InvalidInputError):
        g.wedge_norm([[1, 0], [1, 0, 0]])


def test_simplex_volume_values():
    assert g.simplex_volume([[0, 0], [1, 0], [0, 1]]) == pytest.approx(0.5, rel=1e-15)
    assert g.simplex_volume(np.vstack([np.zeros(3), np.eye(3)])) == pytest.approx(1 / 6, rel=1e-14)
    assert g.simplex_volume([[1.0, 2.0]]) == 0.0


def test_simplex_volume_random_4_points_in_r5_matches_cayley_menger():
    pts = np.random.default_rng(5).standard_normal((4, 5))
    assert g.simplex_volume(pts) == pytest.approx(g.cayley_menger_volume(pts), rel=1e-10)


def test_simplex_volume_too_many_points():
    with pytest.raises(InvalidInputError):
        g.simplex_volume(np.random.default_rng(0).standard_normal((4, 2)))


def test_cayley_menger_values():
    assert g.cayley_menger_volume([[0, 0], [1, 0], [0, 1]]) == pytest.approx(0.5, rel=1e-12)
    assert g.cayley_menger_volume([[0, 0], [1, 1], [2, 2]]) == pytest.approx(0.0, abs=1e-7)
    assert g.cayley_menger_volume(EQUILATERAL) == pytest.approx(SQ3 / 4, rel=1e-12)
    assert g.cayley_menger_volume([[1, 1], [1, 1]]) == 0.0


def test_cayley_menger_rejects_impossible_distances(monkeypatch):
    # a "determinant" of the wrong sign beyond tolerance must not be clamped away
    monkeypatch.setattr(np.linalg, "det", lambda a: 1.0)
    with pytest.raises(NumericalDegeneracyError):
        g.cayley_menger_volume([[0, 0], [1, 0], [0, 1]])


def test_diameter_values():
    assert g.diameter([[0, 0], [3, 4]]) == 5.0
    assert g.diameter([[1, 2, 3]]) == 0.0
    assert g.diameter(EQUILATERAL) == pytest.approx(1.0, rel=1e-15)


def test_menger_curvature_values():
    assert g.menger_curvature([0, 0], [1, 1], [3, 3]) == 0.0
    assert g.menger_curvature(*EQUILATERAL) == pytest.approx(1.7320508075688772, rel=1e-14)
    rng = np.random.default_rng(2)
    for t in rng.uniform(0, 2 * np.pi, (50, 3)):
        pts = 2 * np.stack([np.cos(t), np.sin(t)], axis=1)
        assert g.menger_curvature(*pts) == pytest.approx(0.5, rel=1e-9)


def test_menger_curvature_coincident_points():
    assert g.menger_curvature([1, 2], [1, 2], [0, 0]) == 0.0
    assert g.menger_curvature([1, 2], [1, 2], [1, 2]) == 0.0


def test_discrete_curvature_values():
    dc = g.discrete_curvature(EQUILATERAL)
    assert dc == pytest.approx(SQ3 / 4, rel=1e-14)
    assert 4 * dc == pytest.approx(g.menger_curvature(*EQUILATERAL), rel=1e-14)
    assert g.discrete_curvature([[0, 0], [0, 0], [1, 0]]) == 0.0
    assert g.discrete_curvature([[2, 2], [2, 2], [2, 2]]) == 0.0
    assert g.discrete_curvature(2 * EQUILATERAL) == pytest.approx(dc / 2, rel=1e-14)


def test_discrete_curvature_needs_room():
    with pytest.raises(InvalidInputError):
        g.discrete_curvature([[0, 0], [1, 0], [0, 1], [1, 1]])
    with pytest.raises(InvalidInputError):
        g.discrete_curvature([[0, 0]])


def test_unit_ball_volume():
    assert g.unit_ball_volume(0) == 1.0
    assert g.unit_ball_volume(1) == pytest.approx(2.0)
    assert g.unit_ball_volume(2) == pytest.approx(math.pi)
    assert g.unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    with pytest.raises(InvalidInputError):
        g.unit_ball_volume(-1)


def test_point_tuple_validation():
    assert g.PointTuple([1.0, 2.0]).k == 1
    with pytest.raises(InvalidInputError):
        g.PointTuple([[np.nan, 0.0]])
    t = g.PointTuple(EQUILATERAL)
    assert (t.k, t.n, len(t)) == (3, 2, 3)
    assert g.simplex_volume(t) == pytest.approx(SQ3 / 4)


# --- batched kernels against the scalar paths --------------------------------------


@pytest.mark.parametrize("k,n", [(2, 2), (3, 2), (3, 3), (4, 3), (4, 5), (5, 4), (6, 7)])
def test_batch_kernels_match_scalar_functions(k, n):
    pts = np.random.default_rng(k * 10 + n).standard_normal((40, k, n))
    vol = g.batch_simplex_volume(pts)
    dia = g.batch_diameter(pts)
    dc = g.batch_discrete_curvature(pts)
    for b in range(len(pts)):
        assert vol[b] == pytest.approx(g.cayley_menger_volume(pts[b]), rel=1e-9)
        assert dia[b] == pytest.approx(g.diameter(pts[b]), rel=1e-14)
        assert dc[b] == pytest.approx(vol[b] / dia[b] ** k, rel=1e-12)


def test_batch_menger_matches_heron_oracle():
    pts = np.random.default_rng(11).standard_normal((500, 3, 4))
    c = g.batch_menger_curvature(pts)
    for b in range(len(pts)):
        assert c[b] == pytest.approx(heron_curvature(*pts[b]), rel=1e-9)


def test_batch_gram_volume_and_gather():
    rng = np.random.default_rng(3)
    vecs = rng.standard_normal((20, 3, 5))
    got = g.batch_gram_volume(vecs)
    want = [math.sqrt(np.linalg.det(v @ v.T)) for v in vecs]
    np.testing.assert_allclose(got, want, rtol=1e-10)
    P = rng.standard_normal((10, 3))
    idx = rng.integers(0, 10, (7, 4))
    V = g.gather_vertices(P, idx)
    dc, diam = g.vertex_discrete_curvature(V)
    np.testing.assert_allclose(dc, g.batch_discrete_curvature(P[idx]), rtol=1e-13)
    np.testing.assert_allclose(diam, g.batch_diameter(P[idx]), rtol=1e-13)
    np.testing.assert_allclose(np.sqrt(g.sq_diameter(V)), diam, rtol=1e-13)


def test_batch_simplex_volume_single_point_tuples():
    np.testing.assert_array_equal(g.batch_simplex_volume(np.ones((4, 1, 3))), np.zeros(4))


# --- properties --------------------------------------------------------------------

# magnitudes below 1e-50 would push dot products into subnormals, where relative accuracy is lost
coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False).filter(
    lambda v: v == 0 or abs(v) > 1e-50)


def _tuples(k, n):
    return arrays(np.float64, (k, n), elements=coords)


def _random_rotation(seed, n):
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3).flatmap(lambda m: _tuples(m + 2, m + 2)), st.data())
def test_permutation_invariance(pts, data):
    perm = data.draw(st.permutations(range(len(pts))))
    assert g.discrete_curvature(pts[list(perm)]) == pytest.approx(g.discrete_curvature(pts),
                                                                  rel=1e-9, abs=1e-12)
    assert g.simplex_volume(pts[list(perm)]) == pytest.approx(g.simplex_volume(pts),
                                                              rel=1e-9, abs=1e-9)
    if len(pts) == 3:
        assert g.menger_curvature(*pts[list(perm)]) == pytest.approx(g.menger_curvature(*pts),
                                                                     rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(_tuples(3, 3), st.integers(0, 2**32 - 1), arrays(np.float64, 3, elements=coords))
def test_rigid_motion_invariance(pts, seed, shift):
    Q = _random_rotation(seed, 3)
    moved = pts @ Q.T + shift
    vol = g.simplex_volume(pts)
    if vol < 1e-6 * max(g.diameter(pts), 1e-300) ** 2:
        return  # nearly degenerate triples amplify rounding
    assert g.discrete_curvature(moved) == pytest.approx(g.discrete_curvature(pts), rel=1e-10)
    assert g.menger_curvature(*moved) == pytest.approx(g.menger_curvature(*pts), rel=1e-10)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 3).flatmap(lambda m: _tuples(m + 2, m + 2)), st.floats(1e-3, 1e3))
def test_scaling_degree_minus_one(pts, lam):
    dc = g.discrete_curvature(pts)
    assert g.discrete_curvature(lam * pts) == pytest.approx(dc / lam, rel=1e-9, abs=1e-300)
    if len(pts) > 3:
        return
    c = g.menger_curvature(*pts[:3])
    assert g.menger_curvature(*(lam * pts[:3])) == pytest.approx(c / lam, rel=1e-9, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(_tuples(3, 4))
def test_four_dc_at_most_menger(pts):
    assert 4 * g.discrete_curvature(pts) <= g.menger_curvature(*pts) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5).flatmap(lambda l: _tuples(l, 6)))
def test_hadamard_inequality(vecs):
    norms = np.linalg.norm(vecs, axis=1)
    assert g.wedge_norm(vecs) <= np.prod(norms) * (1 + 1e-9) + 1e-12


def test_hadamard_equality_for_orthogonal_vectors():
    Q = _random_rotation(7, 5)
    vecs = Q[:3] * np.array([[0.5], [2.0], [3.0]])
    assert g.wedge_norm(vecs) == pytest.approx(3.0, rel=1e-12)


def test_dc_times_diameter_at_most_one():
    pts = np.random.default_rng(9).standard_normal((20_000, 4, 3))
    assert np.all(g.batch_discrete_curvature(pts) * g.batch_diameter(pts) <= 1.0)


def test_equilateral_tetrahedron_volume():
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    edge = 2 * math.sqrt(2)
    assert g.simplex_volume(tet) == pytest.approx(edge**3 / (6 * math.sqrt(2)), rel=1e-14)
    for perm in itertools.permutations(range(4)):
        assert g.simplex_volume(tet[list(perm)]) == pytest.approx(8 / 3, rel=1e-14)
