import math

import numpy as np
import pytest

from integral_menger.beta import (
    ball_offsets,
    beta_graph_bound,
    beta_minmax,
    beta_pca_bound,
    beta_profile,
    dyadic_radii,
    sup_distance,
)
from integral_menger.errors import InvalidInputError
from integral_menger.manifold import (
    SampledManifold,
    generate,
    graph_alpha_patch,
    graph_embed,
    make_graph_patch,
    smooth_graph_patch,
)
from oracles import dense_beta


def _rotation(seed, n):
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _affine(m, n, seed, count=200):
    rng = np.random.default_rng(seed)
    Q = _rotation(seed, n)
    x = rng.uniform(-1, 1, n)
    return SampledManifold(m, x + rng.uniform(-1, 1, (count, m)) @ Q[:m], np.ones(count)), x


@pytest.mark.parametrize("m,n", [(1, 2), (1, 3), (2, 3), (2, 5)])
def test_affine_data_gives_exact_zero(m, n):
    M, x = _affine(m, n, seed=m * 10 + n)
    for r in (0.3, 1.0, 5.0):
        assert beta_minmax(M, x, r).beta == 0.0
        assert beta_pca_bound(M, x, r).beta == 0.0
    assert np.all(beta_profile(M, x, [0.2, 0.4, 0.8]).ratios == 0.0)


def test_single_point_and_empty_ball():
    M = SampledManifold(1, [[0.0, 0.0], [5.0, 0.0]], [1.0, 1.0])
    res = beta_minmax(M, [0.0, 0.0], 1.0)
    assert res.beta == 0.0 and res.n_points == 1
    empty = beta_minmax(M, [2.5, 2.5], 0.5)
    assert empty.beta == 0.0 and empty.residual == 0.0 and empty.n_points == 0
    assert beta_pca_bound(M, [2.5, 2.5], 0.5).beta == 0.0


def test_circle_example_against_dense_oracle():
    M = generate("circle", 400)
    res = beta_minmax(M, [1.0, 0.0], 0.5)
    oracle = dense_beta(M.points, np.array([1.0, 0.0]), 0.5, 1)
    assert res.beta == pytest.approx(oracle, abs=1e-6)
    pca = beta_pca_bound(M, [1.0, 0.0], 0.5).beta
    assert pca >= oracle - 1e-12
    assert res.residual == pytest.approx(res.beta * 0.5)
    assert 0 <= res.beta <= 1
    np.testing.assert_allclose(res.plane_basis @ res.plane_basis.T, np.eye(1), atol=1e-12)


def test_circle_profile_ratio_bounded_by_inverse_radius():
    R = 2.0
    M = generate("circle", 800, R=R)
    x = M.points[0]
    radii = np.geomspace(0.05, R / 2, 8)
    prof = beta_profile(M, x, radii)
    for r, res in zip(radii, prof.results):
        assert res.beta == pytest.approx(dense_beta(M.points, x, r, 1), abs=1e-4)
    assert np.all(prof.ratios <= 1.0 / R)
    assert prof.tail_sup[0] == prof.ratios.max()
    assert prof.sup_ratio(0.1, 0.5) <= prof.ratios.max()
    assert prof.sup_ratio(10.0) == 0.0


@pytest.mark.parametrize("shape,count", [("torus_knot", 300), ("sphere", 600)])
def test_minmax_matches_dense_oracle(shape, count):
    M = generate(shape, count)
    rng = np.random.default_rng(1)
    for _ in range(6):
        i = int(rng.integers(M.N))
        r = float(rng.uniform(0.15, 0.8))
        b = beta_minmax(M, M.points[i], r).beta
        assert b == pytest.approx(dense_beta(M.points, M.points[i], r, M.m), abs=1e-3)


def test_minmax_never_exceeds_pca_bound():
    rng = np.random.default_rng(2)
    for M in (generate("torus", 300, n=4), generate("circle", 100, n=5), generate("sphere", 300)):
        for _ in range(15):
            i = int(rng.integers(M.N))
            r = float(rng.uniform(0.1, 2.0))
            assert beta_minmax(M, M.points[i], r).beta <= beta_pca_bound(M, M.points[i], r).beta


def test_rigid_motion_and_scale_invariance():
    M = generate("sphere", 500)
    Q = _rotation(3, 3)
    t = np.array([0.3, -1.0, 2.0])
    moved = M.transformed(Q, t)
    for i, r in [(0, 0.4), (17, 0.7), (250, 1.1)]:
        b = beta_minmax(M, M.points[i], r).beta
        assert beta_minmax(moved, moved.points[i], r).beta == pytest.approx(b, abs=1e-9)
        S = M.scaled(7.0)
        assert beta_minmax(S, S.points[i], 7 * r).beta == pytest.approx(b, abs=1e-9)


def test_closed_ball_keeps_point_at_radius():
    M = SampledManifold(1, [[0.0, 0.0], [0.3, 0.4], [1.0, 1.0]], np.ones(3))
    # distance from the origin to (0.3, 0.4) is computed, not exact
    r = float(np.linalg.norm(M.points[1]))
    assert len(ball_offsets(M, [0.0, 0.0], r)) == 2


def test_ball_offsets_large_cloud_uses_tree():
    M = generate("sphere", 12_000)
    x = M.points[5]
    y = ball_offsets(M, x, 0.3)
    brute = M.points - x
    assert len(y) == int(np.sum(np.linalg.norm(brute, axis=1) <= 0.3))


def test_input_validation():
    M = generate("circle", 20)
    with pytest.raises(InvalidInputError):
        beta_minmax(M, [1.0, 0.0], 0.0)
    with pytest.raises(InvalidInputError):
        beta_minmax(M, [1.0, 0.0, 0.0], 0.5)
    with pytest.raises(InvalidInputError):
        beta_profile(M, [1.0, 0.0], [0.5, 0.2])
    with pytest.raises(InvalidInputError):
        beta_profile(M, [1.0, 0.0], [0.5], method="svd")


def test_sup_distance():
    y = np.array([[1.0, 2.0], [0.0, -3.0]])
    assert sup_distance(y, np.array([[0.0, 1.0]])) == 3.0
    assert sup_distance(np.zeros((0, 2)), np.array([[0.0, 1.0]])) == 0.0


def test_dyadic_radii():
    r = dyadic_radii(0.1, 1.0)
    np.testing.assert_allclose(r, [1 / 16, 1 / 8, 1 / 4, 1 / 2, 1])
    with pytest.raises(InvalidInputError):
        dyadic_radii(2.0, 1.0)


# --- graph bound ----------------------------------------------------------------


def test_graph_bound_linear_is_zero():
    p = make_graph_patch(lambda x: 0.5 * x[:, 0] - 0.2 * x[:, 1], 2, 3, 1.0, 0.1,
                         grad=lambda x: np.tile([[0.5, -0.2]], (len(x), 1)), normalize=False)
    assert beta_graph_bound(p, 0, 0.3) == pytest.approx(0.0, abs=1e-15)


def test_graph_bound_parabola_closed_form():
    h = 0.01
    p = make_graph_patch(lambda x: 0.5 * x[:, 0] ** 2, 1, 2, 1.0, h, grad=lambda x: x[:, None, :],
                         normalize=False)
    for r in (0.05, 0.1, 0.2):
        # sup |z^2 / 2| / r over the grid nodes |z| <= 2r is (2r)^2 / 2 / r = 2r
        assert beta_graph_bound(p, np.array([0.0]), r) == pytest.approx(2 * r, rel=1e-9)


def test_graph_bound_alpha_against_grid_scan():
    p = graph_alpha_patch(1.5, 1.0, 2, 3, 0.05)
    x0 = int(np.flatnonzero(np.all(p.coords == 0, axis=1))[0])
    for r in (0.1, 0.25):
        near = np.linalg.norm(p.coords, axis=1) <= 2 * r + 1e-12
        want = np.abs(p.values[near, 0] - p.values[x0, 0]).max() / r
        assert beta_graph_bound(p, x0, r) == pytest.approx(want, rel=1e-12)


def test_graph_bound_dominates_minmax():
    p = smooth_graph_patch("gaussian", 2, 3, 1.0, 0.05)
    M = graph_embed(p)
    rng = np.random.default_rng(8)
    for _ in range(8):
        i = int(rng.integers(len(p)))
        if np.linalg.norm(p.coords[i]) > 0.5:
            continue
        r = float(rng.uniform(0.05, 0.2))
        # points of the graph within r of (x, f(x)) project into |z - x| <= r <= 2r
        assert beta_minmax(M, M.points[i], r).beta <= beta_graph_bound(p, i, r) + 1e-9


def test_graph_bound_requires_node():
    p = smooth_graph_patch("sine", 1, 2, 1.0, 0.1)
    with pytest.raises(InvalidInputError):
        beta_graph_bound(p, np.array([0.05]), 0.2)
    with pytest.raises(InvalidInputError):
        beta_graph_bound(p, 0, -1.0)


def test_to_dict_round_trip():
    M = generate("circle", 50)
    d = beta_minmax(M, M.points[0], 0.4).to_dict()
    assert set(d) == {"beta", "plane_basis", "center", "radius", "method", "residual", "n_points"}
    assert d["method"] == "minmax" and math.isclose(d["residual"], d["beta"] * 0.4)
