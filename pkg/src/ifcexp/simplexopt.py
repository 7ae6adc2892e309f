"""Grid search over conditional distributions with fixed marginals.

Conditionals are gridded with denominator m. A cloud collects the attainable
pairs (f, I) of all joints sharing one anchor marginal, where f is the
expected log-likelihood and I the information between the averaged input
and everything else. Queries downstream only bound f from below while
preferring small I, so only the Pareto frontier (max f, min I) is kept: a
point dominated in both coordinates satisfies fewer constraints and never
has a smaller objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Callable, Iterator, Sequence

import numpy as np

from . import _kernels as K
from .errors import ComputeGuardError, InfeasibleMarginals, ValidationError
from .infomeasures import JointDist, group_labels, log_table

MAX_STREAM = 5_000_000


@dataclass(frozen=True)
class GridSpec:
    m: int = 6
    refine: bool = False

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValidationError(f"grid resolution must be an integer >= 2, got {self.m}", "INVALID_GRID")
        object.__setattr__(self, "m", int(self.m))

    @property
    def tol(self):
        """Extra-marginal filter tolerance; the 1e-12 absorbs float rounding."""
        return 1.0 / (2 * self.m) + 1e-12


@lru_cache(maxsize=64)
def _simplex_grid(k, m):
    pts = []

    def rec(prefix, left, slots):
        if slots == 1:
            pts.append(prefix + [left])
            return
        for v in range(left, -1, -1):
            rec(prefix + [v], left - v, slots - 1)

    rec([], m, k)
    # largest first coordinate first, so pmfs are in descending lexicographic
    # order of counts; reverse to ascending for the stream order
    arr = np.array(pts[::-1], dtype=np.float64) / m
    arr.setflags(write=False)
    return arr


def simplex_grid(k: int, m: int) -> np.ndarray:
    """All pmfs on k points with entries in (1/m)Z, ascending lexicographic order."""
    if k < 1:
        raise ValidationError("simplex needs at least one point", "EMPTY_AXES")
    return _simplex_grid(int(k), int(m))


def grid_size(k: int, m: int) -> int:
    return comb(m + k - 1, k - 1)


def family_layout(sizes, target_axes, cond_axes):
    """Index map idx[j, t] -> flat C-order cell of the joint with shape ``sizes``,
    for conditioning configuration j (C order over cond_axes) and target
    configuration t (C order over target_axes)."""
    n = len(sizes)
    coords = np.indices(sizes).reshape(n, -1)
    lt, nt = group_labels(sizes, tuple(target_axes))
    lc, nc = group_labels(sizes, tuple(cond_axes))
    idx = np.empty((nc, nt), dtype=np.int64)
    idx[lc, lt] = np.arange(coords.shape[1])
    return idx


def _check_partition(n, target_axes, cond_axes):
    allax = sorted(tuple(target_axes) + tuple(cond_axes))
    if allax != list(range(n)):
        raise ValidationError(
            f"target {target_axes} and conditioning {cond_axes} must partition 0..{n - 1}",
            "OVERLAPPING_GROUPS")


def family_array(target_axes, cond_axes, fixed_marginal, target_sizes, grid: GridSpec,
                 extra_marginal=None, extra_axes=None, guard=MAX_STREAM):
    """Array form of :func:`enumerate_conditionals` (rows are flat joints)."""
    target_axes = tuple(int(a) for a in target_axes)
    cond_axes = tuple(int(a) for a in cond_axes)
    fm = fixed_marginal.probs if isinstance(fixed_marginal, JointDist) else np.asarray(fixed_marginal)
    if fm.ndim != len(cond_axes):
        raise ValidationError("fixed marginal must have one axis per conditioning axis", "DIMENSION_MISMATCH")
    n = len(target_axes) + len(cond_axes)
    _check_partition(n, target_axes, cond_axes)
    sizes = [0] * n
    for a, s in zip(cond_axes, fm.shape):
        sizes[a] = s
    for a, s in zip(target_axes, target_sizes):
        sizes[a] = int(s)
    sizes = tuple(sizes)
    kt = int(np.prod(target_sizes))
    # the fixed marginal's own axis order is cond_axes; re-express it in sorted order
    perm = np.argsort(cond_axes)
    mass = np.ascontiguousarray(np.transpose(fm, perm)).reshape(-1)
    idx = family_layout(sizes, target_axes, tuple(sorted(cond_axes)))
    g = simplex_grid(kt, grid.m)
    live = int(np.count_nonzero(mass > 0))
    if g.shape[0] ** live > guard:
        raise ComputeGuardError(f"{g.shape[0]}^{live} joints exceed the guard {guard}", "SPACE_TOO_LARGE")
    if extra_marginal is not None:
        ex_axes = target_axes if extra_axes is None else tuple(extra_axes)
        em = extra_marginal.probs if isinstance(extra_marginal, JointDist) else np.asarray(extra_marginal)
        eperm = np.argsort(ex_axes)
        pe = np.ascontiguousarray(np.transpose(em, eperm)).reshape(-1).astype(np.float64)
        elab, _ = group_labels(sizes, tuple(sorted(ex_axes)))
    else:
        pe = np.zeros(0)
        elab = np.zeros(int(np.prod(sizes)), dtype=np.int64)
    rows = K.enumerate_family(mass.astype(np.float64), np.ascontiguousarray(g), idx,
                              int(np.prod(sizes)), elab, pe, grid.tol)
    return rows, sizes


def enumerate_conditionals(target_axes, cond_axes, fixed_marginal, extra_marginal, grid: GridSpec,
                           target_sizes=None, extra_axes=None) -> Iterator[JointDist]:
    """Stream every joint fixed_marginal x conditional with grid conditionals.

    The joint has axes 0..n-1 split into ``target_axes`` (the conditional's
    variables) and ``cond_axes`` (the fixed marginal's axes, in that order).
    With ``extra_marginal`` only joints whose marginal on ``extra_axes``
    (default: the target axes) is within 1/(2m) of it are produced.
    """
    if target_sizes is None:
        if extra_marginal is None or extra_axes is not None:
            raise ValidationError("target sizes are needed when no target marginal is given", "DIMENSION_MISMATCH")
        target_sizes = extra_marginal.sizes
    rows, sizes = family_array(target_axes, cond_axes, fixed_marginal, target_sizes, grid,
                               extra_marginal, extra_axes)
    if rows.shape[0] == 0:
        raise InfeasibleMarginals("no grid joint meets the extra-marginal filter")
    for r in rows:
        yield JointDist.trusted(r.reshape(sizes))


@dataclass(frozen=True, eq=False)
class CloudPoint:
    f: float
    info: float
    witness: JointDist


@dataclass(frozen=True, eq=False)
class FiCloud:
    anchor: JointDist
    extra_marginal: JointDist
    points: tuple = field(default_factory=tuple)
    pruned: bool = True
    fmin: float = np.inf

    def arrays(self):
        f = np.array([p.f for p in self.points], dtype=np.float64)
        i = np.array([p.info for p in self.points], dtype=np.float64)
        return f, i


class CloudContext:
    """Everything needed to evaluate clouds over a fixed channel.

    ``w`` has shape (input sizes..., |Y|) and ``k_axis`` is the input whose
    conditional varies inside a cloud; its marginal is held at ``pk`` unless
    ``constrained`` is False.
    """

    def __init__(self, w_table, k_axis, pk, grid: GridSpec, constrained=True):
        self.shape = tuple(w_table.shape)
        self.k = int(k_axis)
        self.grid = grid
        self.pk = np.ascontiguousarray(pk, dtype=np.float64)
        self.n = int(np.prod(self.shape))
        self.rest = tuple(a for a in range(len(self.shape)) if a != self.k)
        self.anchor_shape = tuple(self.shape[a] for a in self.rest)
        self.idx = family_layout(self.shape, (self.k,), self.rest)
        self.logw = log_table(w_table).reshape(-1)
        self.la, _ = group_labels(self.shape, (self.k,))
        self.lb, _ = group_labels(self.shape, self.rest)
        self.gridk = np.ascontiguousarray(simplex_grid(self.shape[self.k], grid.m))
        if constrained:
            self.pe = self.pk.copy()
            self.elab = self.la
        else:
            self.pe = np.zeros(0)
            self.elab = np.zeros(self.n, dtype=np.int64)
        live = self.shape[self.k] > 1
        self.size_per_anchor = self.gridk.shape[0] ** (int(np.prod(self.anchor_shape)) if live else 0)

    def anchors_of(self, joints):
        """Flat anchor rows (marginal over the k axis) of flat joint rows."""
        b = joints.shape[0]
        return np.ascontiguousarray(joints.reshape((b,) + self.shape).sum(axis=1 + self.k).reshape(b, -1))

    def info_k(self, joints):
        return K.cmi_rows(joints, self.la, self.lb, np.zeros(self.n, dtype=np.int64),
                          self.shape[self.k], int(np.prod(self.anchor_shape)), 1)

    def points(self, anchor_flat):
        return K.cloud_points(np.ascontiguousarray(anchor_flat, dtype=np.float64), self.gridk, self.idx,
                              self.n, self.elab, self.pe, self.grid.tol, self.logw, self.la, self.lb,
                              self.pk)

    def frontiers(self, anchors):
        return K.frontiers_batch(np.ascontiguousarray(anchors, dtype=np.float64), self.gridk, self.idx,
                                 self.n, self.elab, self.pe, self.grid.tol, self.logw, self.la,
                                 self.lb, self.pk)


def build_fi_cloud(anchor: JointDist, p_k, w, grid: GridSpec, k_axis=None, extra_points=(),
                   prune=True, constrained=True) -> FiCloud:
    """(f, I) cloud of all grid joints with the given anchor marginal.

    ``anchor`` is the marginal on every axis except ``k_axis`` (default: the
    last input). The product point anchor x p_k is always included, with
    I = 0. ``extra_points`` are further joints added before pruning; they
    must share the anchor.
    """
    table = np.asarray(getattr(w, "table", w), dtype=np.float64)
    if k_axis is None:
        k_axis = table.ndim - 2
    pk = p_k.probs if isinstance(p_k, JointDist) else np.asarray(p_k, dtype=np.float64)
    ctx = CloudContext(table, k_axis, pk, grid, constrained)
    if anchor.sizes != ctx.anchor_shape:
        raise ValidationError(f"anchor shape {anchor.sizes} vs expected {ctx.anchor_shape}", "SHAPE_MISMATCH")
    if ctx.size_per_anchor > MAX_STREAM:
        raise ComputeGuardError("cloud enumeration exceeds the guard", "SPACE_TOO_LARGE")
    joints, fv, iv = ctx.points(anchor.flat)
    if extra_points:
        ex = np.array([np.asarray(e.probs).reshape(-1) for e in extra_points])
        joints = np.vstack([joints, ex])
        fv = np.concatenate([fv, K.f_rows(ex, ctx.logw)])
        iv = np.concatenate([iv, ctx.info_k(ex)])
    keep = K.pareto_front(fv, iv) if prune else np.arange(fv.shape[0])
    pts = tuple(CloudPoint(float(fv[i]), float(iv[i]), JointDist.trusted(joints[i].reshape(ctx.shape)))
                for i in keep)
    return FiCloud(anchor, JointDist.trusted(pk), pts, prune, float(fv.min()))


def refine_local(start: JointDist, objective: Callable[[JointDist], float],
                 equality_marginals: Sequence[Sequence[int]] = (), steps: int = 20,
                 initial_step: float = 0.5, max_sweeps: int = 200) -> JointDist:
    """Descend ``objective`` by pairwise mass transfers that keep the listed
    marginals fixed.

    Directions are e_i - e_j projected onto the null space of the marginal
    map; each is tried with the current step size, clipped at the simplex
    boundary, and accepted on strict improvement. After a sweep with no
    improvement the step is halved, ``steps`` times in total.
    """
    shape = start.sizes
    x = np.array(start.flat, dtype=np.float64)
    n = x.size
    rows = []
    for axes in equality_marginals:
        lab, nl = group_labels(shape, tuple(axes))
        a = np.zeros((nl, n))
        a[lab, np.arange(n)] = 1.0
        rows.append(a)
    if rows:
        a = np.vstack(rows)
        proj = np.eye(n) - np.linalg.pinv(a) @ a
    else:
        proj = np.eye(n)
    dirs = []
    for i in range(n):
        for j in range(i + 1, n):
            d = np.zeros(n)
            d[i], d[j] = 1.0, -1.0
            d = proj @ d
            d[np.abs(d) < 1e-12] = 0.0
            nrm = np.abs(d).max()
            if nrm > 0:
                dirs.append(d / nrm)
    if not dirs:
        return start

    def val(v):
        return objective(JointDist.trusted(v.reshape(shape)))

    best = val(x)
    h = initial_step
    for _ in range(steps):
        for _ in range(max_sweeps):
            improved = False
            for d in dirs:
                for sgn in (1.0, -1.0):
                    dd = sgn * d
                    neg = dd < 0
                    cap = np.min(x[neg] / -dd[neg]) if neg.any() else h
                    t = min(h, cap)
                    if t <= 0:
                        continue
                    y = x + t * dd
                    y[y < 0] = 0.0
                    fy = val(y)
                    if fy < best:
                        x, best, improved = y, fy, True
            if not improved:
                break
        h /= 2
    return JointDist.trusted(x.reshape(shape))
