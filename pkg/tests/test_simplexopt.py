import numpy as np
import pytest
from itertools import product

from hypothesis import given, settings, strategies as st

from ifcexp import _kernels as K
from ifcexp.errors import InfeasibleMarginals, ValidationError
from ifcexp.infomeasures import JointDist
from ifcexp.ordinary import t_zero
from ifcexp.simplexopt import (GridSpec, build_fi_cloud, enumerate_conditionals, family_array,
                               grid_size, refine_local, simplex_grid)
from oracles import compositions, grid_pmfs


def test_simplex_grid_matches_compositions():
    for k, m in [(1, 3), (2, 2), (3, 4), (4, 3)]:
        g = simplex_grid(k, m)
        assert np.array_equal(g, grid_pmfs(k, m))
        assert g.shape[0] == grid_size(k, m) == len(compositions(k, m))


def test_grid_spec_validation():
    with pytest.raises(ValidationError) as e:
        GridSpec(1)
    assert e.value.code == "INVALID_GRID"
    assert GridSpec(4).tol == pytest.approx(1 / 8)


def test_binary_conditional_stream_size():
    fm = np.array([0.5, 0.5])
    joints = list(enumerate_conditionals((1,), (0,), fm, None, GridSpec(2), target_sizes=(2,)))
    assert len(joints) == 3**2
    flat = {tuple(j.flat) for j in joints}
    assert len(flat) == 9
    for j in joints:
        assert np.allclose(j.marginal(0).probs, fm)


def test_product_joint_in_stream_with_uniform_extra():
    fm = np.array([0.5, 0.5])
    uni = JointDist(np.array([0.5, 0.5]))
    joints = list(enumerate_conditionals((1,), (0,), fm, uni, GridSpec(2)))
    prod = np.full(4, 0.25)
    assert any(np.array_equal(j.flat, prod) for j in joints)
    for j in joints:
        assert np.max(np.abs(j.marginal(1).probs - 0.5)) <= GridSpec(2).tol


def test_two_by_two_conditioning_unfiltered_size():
    fm = np.full((2, 2), 0.25)
    rows, sizes = family_array((2,), (0, 1), fm, (2,), GridSpec(4))
    assert sizes == (2, 2, 2)
    assert rows.shape[0] == 5**4


def test_zero_mass_columns_do_not_multiply():
    fm = np.array([1.0, 0.0])
    rows, _ = family_array((1,), (0,), fm, (3,), GridSpec(3))
    assert rows.shape[0] == grid_size(3, 3)


def test_infeasible_extra_marginal():
    # conditioning on a point mass: the target marginal equals one grid pmf
    fm = np.array([1.0])
    target = JointDist(np.full(3, 1 / 3))
    with pytest.raises(InfeasibleMarginals):
        list(enumerate_conditionals((1,), (0,), fm, target, GridSpec(2)))


def _anchor(w, p1, p2):
    q = np.einsum("a,b,aby->aby", p1, p2, w)
    return JointDist(q.sum(axis=1))


def test_product_point_present_with_zero_info(zch):
    from ifcexp.channels import marginal_channel
    w = marginal_channel(zch, 1).table
    p = np.array([0.5, 0.5])
    cloud = build_fi_cloud(_anchor(w, p, p), p, w, GridSpec(3), k_axis=1, prune=False)
    prod = np.einsum("ay,b->aby", _anchor(w, p, p).probs, p).ravel()
    hits = [c for c in cloud.points if np.array_equal(c.witness.flat, prod)]
    assert hits and all(c.info == 0.0 for c in hits)


def _oracle_cloud(w, anchor, p2, m):
    """Unpruned (f, I) list built from the oracle grid plus the product point."""
    g = grid_pmfs(w.shape[1], m)
    cols = [(a, y) for a in range(w.shape[0]) for y in range(w.shape[2])]
    live = [c for c in cols if anchor[c] > 0]
    f, info, joints = [], [], []

    la = np.tile(np.repeat(np.arange(w.shape[1]), w.shape[2]), w.shape[0])
    lb = np.array([a * w.shape[2] + y for a in range(w.shape[0]) for b in range(w.shape[1])
                   for y in range(w.shape[2])])
    logw = np.log(np.where(w > 0, w, 1)).ravel()
    logw[w.ravel() == 0] = -np.inf
    for choice in product(range(len(g)), repeat=len(live)):
        q = np.zeros(w.shape)
        for (a, y) in cols:
            q[a, :, y] = anchor[a, y] / w.shape[1]
        for (a, y), gi in zip(live, choice):
            q[a, :, y] = anchor[a, y] * g[gi]
        if np.max(np.abs(q.sum(axis=(0, 2)) - p2)) > 1 / (2 * m) + 1e-12:
            continue
        joints.append(q.ravel())
    prod = np.einsum("ay,b->aby", anchor, p2).ravel()
    for q in joints + [prod]:
        f.append(K.f_flat(q, logw))
        info.append(K.cmi_flat(q, la, lb, np.zeros(q.size, dtype=np.int64),
                               w.shape[1], w.shape[0] * w.shape[2], 1))
    info[-1] = 0.0
    return np.array(f), np.array(info)


def test_cloud_extremes_against_exhaustive(zch):
    from ifcexp.channels import marginal_channel
    w = marginal_channel(zch, 1).table
    p = np.array([0.5, 0.5])
    anchor = _anchor(w, p, p)
    cloud = build_fi_cloud(anchor, p, w, GridSpec(6), k_axis=1, prune=False)
    f, i = cloud.arrays()
    fo, io = _oracle_cloud(w, anchor.probs, p, 6)
    assert f.size in (fo.size, fo.size - 1)
    assert f.max() == pytest.approx(fo.max(), abs=1e-12)
    assert cloud.fmin == pytest.approx(fo.min(), abs=1e-12)
    for r in (0.0, 0.05, 0.2, 1.0):
        ok = io <= r
        assert t_zero(cloud, r) == pytest.approx(r + np.max(fo[ok] - io[ok]), abs=1e-12)


def _queries(f, i, r, t):
    ok = i <= r
    t0 = np.max(f[ok] - i[ok]) if ok.any() else -np.inf
    adm = (f >= t) | (t - f <= np.maximum(r - i, 0))
    e1 = np.min(np.maximum(i - r, 0)[adm]) if adm.any() else np.inf
    return t0, e1


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.8), st.floats(-1.0, 0.0), st.integers(0, 3))
def test_pruning_preserves_queries(zch_params, r, t, which):
    w, p, anchors = zch_params
    anchor = anchors[which]
    full = build_fi_cloud(anchor, p, w, GridSpec(4), k_axis=1, prune=False)
    pr = build_fi_cloud(anchor, p, w, GridSpec(4), k_axis=1, prune=True)
    assert len(pr.points) <= len(full.points)
    assert _queries(*full.arrays(), r, t) == _queries(*pr.arrays(), r, t)
    assert pr.fmin == full.fmin


def test_pruned_points_non_dominated(zch_params):
    w, p, anchors = zch_params
    for anchor in anchors:
        f, i = build_fi_cloud(anchor, p, w, GridSpec(5), k_axis=1).arrays()
        for a in range(f.size):
            dom = (f >= f[a]) & (i <= i[a]) & ((f > f[a]) | (i < i[a]))
            assert not dom.any()


@pytest.fixture(scope="module")
def zch_params():
    from ifcexp.channels import make_z_channel, marginal_channel
    w = marginal_channel(make_z_channel(0.1), 1).table
    p = np.array([0.5, 0.5])
    anchors = [_anchor(w, p, p), JointDist(np.array([[0.5, 0.0], [0.3, 0.2]])),
               JointDist(np.array([[0.25, 0.25], [0.25, 0.25]])),
               JointDist(np.array([[0.4, 0.1], [0.0, 0.5]]))]
    return w, p, anchors


def test_resolution_monotone_on_multiples(zch_params):
    w, p, anchors = zch_params
    for anchor in anchors:
        for m, mp in [(2, 4), (3, 6)]:
            c = build_fi_cloud(anchor, p, w, GridSpec(m), k_axis=1, constrained=False)
            cp = build_fi_cloud(anchor, p, w, GridSpec(mp), k_axis=1, constrained=False)
            for r in (0.0, 0.1, 0.3, 1.0):
                assert t_zero(cp, r) >= t_zero(c, r)
            assert cp.fmin <= c.fmin


def test_refine_fixed_point():
    start = JointDist(np.array([0.25, 0.75]))

    def obj(q):
        return float((q.flat[0] - 0.25) ** 2)

    out = refine_local(start, obj)
    assert np.array_equal(out.flat, start.flat)


def test_refine_linear_reaches_vertex():
    start = JointDist(np.array([0.5, 0.5]))
    out = refine_local(start, lambda q: float(q.flat @ np.array([1.0, 3.0])))
    assert np.allclose(out.flat, [1.0, 0.0], atol=1e-12)


def test_refine_quadratic_against_fine_grid():
    target = np.array([0.3, 0.1, 0.6, 0.0])

    def obj(q):
        return float(np.sum((q.flat - target) ** 2) + 0.5 * q.flat[0] * q.flat[3])

    start = JointDist(np.full((2, 2), 0.25))
    out = refine_local(start, obj, equality_marginals=[(0,)])
    assert np.allclose(out.marginal(0).probs, [0.5, 0.5], atol=1e-12)
    # oracle: every m=64 grid joint with row sums 1/2
    g = grid_pmfs(2, 32) * 0.5
    best = min(obj(JointDist(np.array([a, b]))) for a in g for b in g)
    assert obj(out) <= best + 1e-3
