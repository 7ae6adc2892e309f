"""Shared evaluator for random-coding exponents of the form

    min_Q  D(Q_{Y|inputs} || W | P)  +  min_v  max( max_U [E_U^v(Q) - R_U]+ , E_tail^v(Q) )

where pattern v redraws a set S_v of inputs, E_U^v minimises an information
term I(Z_U; rest | Z_{S\\U}) plus the one-competitor exponent E1 over joints
Q~ sharing Q's marginal on the non-redrawn inputs and the output, and E1
runs over a cloud of joints in which the conditional of one averaged input
("k axis") varies.

Everything except the final scans is independent of the rates, so an engine
is built once per (channel, input pmfs, grid) and evaluated at many rates.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _kernels as K
from .errors import ComputeGuardError, ValidationError
from .infomeasures import group_labels, log_table
from .simplexopt import CloudContext, GridSpec, family_layout, simplex_grid

MAX_OUTER = 2_000_000
MAX_TILDE = 4_000_000
MAX_CLOUD_WORK = 3_000_000_000
L_SETS = ("display", "proof")


@dataclass(frozen=True)
class Pattern:
    """A redraw pattern: ``redrawn`` input axes, and for each information
    family the subset U of redrawn axes and the slot of its rate in the rate
    vector."""

    redrawn: tuple
    families: tuple
    rate_slots: tuple


@dataclass
class EngineEval:
    value: float
    index: int
    joint: np.ndarray
    divergence: float
    t0: float
    pattern_values: np.ndarray
    hats: np.ndarray


def _unique_rows(a):
    if a.shape[0] == 0:
        return a, np.zeros(0, dtype=np.int64)
    u, inv = np.unique(a, axis=0, return_inverse=True)
    return np.ascontiguousarray(u), inv.reshape(-1).astype(np.int64)


def _frontiers(ctx, anchors, threads):
    """Frontiers of all anchor rows; chunks run on a thread pool (the kernel
    releases the GIL) and are stitched back in anchor order, so the result
    does not depend on the thread count."""
    threads = max(1, int(threads))
    n = anchors.shape[0]
    if threads == 1 or n < 2 * threads:
        return ctx.frontiers(anchors)
    bounds = np.linspace(0, n, 4 * threads + 1).astype(int)
    chunks = [anchors[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(ctx.frontiers, chunks))
    f = np.concatenate([p[0] for p in parts])
    i = np.concatenate([p[1] for p in parts])
    fmin = np.concatenate([p[3] for p in parts])
    off = [np.zeros(1, dtype=np.int64)]
    base = 0
    for p in parts:
        off.append(p[2][1:] + base)
        base += p[2][-1]
    return f, i, np.concatenate(off), fmin


def outer_family(shape, pin_flat, m):
    """All joints P(inputs) x grid conditional of the output (last axis)."""
    ncol = pin_flat.shape[0]
    dy = shape[-1]
    idx = np.arange(ncol * dy, dtype=np.int64).reshape(ncol, dy)
    g = np.ascontiguousarray(simplex_grid(dy, m))
    live = int(np.count_nonzero(pin_flat > 0))
    if float(g.shape[0]) ** live > MAX_OUTER:
        raise ComputeGuardError(
            f"outer grid has {g.shape[0]}^{live} points, above the guard {MAX_OUTER}", "SPACE_TOO_LARGE")
    return K.enumerate_family(pin_flat, g, idx, ncol * dy, np.zeros(ncol * dy, dtype=np.int64),
                              np.zeros(0), 1.0)


class ExponentEngine:
    """Rate-independent tables for one channel, input pmfs and grid.

    ``w_table`` has shape (input sizes..., |Y|); ``pmfs`` lists the input
    pmfs; ``k_axis`` is the averaged input. With ``outer`` left as None the
    outer search runs over the grid conditionals of Y given the inputs plus
    the channel itself; otherwise it runs over the given flat joints.
    """

    def __init__(self, w_table, pmfs, k_axis, patterns, grid: GridSpec, *, l_set="display",
                 t0_constrained=True, outer=None, include_channel=True, threads=1):
        if l_set not in L_SETS:
            raise ValidationError(f"l_set must be one of {L_SETS}", "INVALID_OPTION")
        self.w = np.ascontiguousarray(w_table, dtype=np.float64)
        self.shape = self.w.shape
        self.n_in = len(self.shape) - 1
        self.pmfs = [np.ascontiguousarray(p, dtype=np.float64) for p in pmfs]
        self.k = int(k_axis)
        self.patterns = list(patterns)
        self.grid = grid
        self.proof = l_set == "proof"
        self.n = int(np.prod(self.shape))
        self.logw = log_table(self.w).reshape(-1)
        pin = np.ones(())
        for p in self.pmfs:
            pin = np.multiply.outer(pin, p)
        self.pin = pin.reshape(-1)
        self.pw = (pin[..., None] * self.w).reshape(-1)

        if outer is None:
            joints = outer_family(self.shape, self.pin, grid.m)
            if include_channel:
                joints = np.vstack([joints, self.pw[None, :]])
        else:
            joints = np.ascontiguousarray(np.atleast_2d(outer), dtype=np.float64)
        self.joints = joints
        self.dvals = K.kl_rows(joints, self.pw)
        self.s = K.f_rows(joints, self.logw)
        self.order = np.argsort(self.dvals, kind="stable").astype(np.int64)

        pk = self.pmfs[self.k]
        self.cloud = CloudContext(self.w, self.k, pk, grid, constrained=True)
        self.ikq = self.cloud.info_k(joints)
        q_anchor = self.cloud.anchors_of(joints)

        self._build_tilde(joints)
        anchors = np.vstack([q_anchor, self.qt_anchor]) if self.qt_anchor.shape[0] else q_anchor
        uniq, inv = _unique_rows(anchors)
        work = uniq.shape[0] * max(self.cloud.size_per_anchor, 1)
        if work > MAX_CLOUD_WORK:
            raise ComputeGuardError(f"{work} cloud evaluations exceed the guard", "SPACE_TOO_LARGE")
        self.n_anchors = uniq.shape[0]
        self.fr_f, self.fr_i, self.fr_off, self.fr_fmin = _frontiers(self.cloud, uniq, threads)
        nq = joints.shape[0]
        self.aidq = inv[:nq].copy()
        self.qt_aid = inv[nq:].copy()
        if t0_constrained:
            self.tf_f, self.tf_i, self.tf_off = self.fr_f, self.fr_i, self.fr_off
            self.t0aid = self.aidq
        else:
            free = CloudContext(self.w, self.k, pk, grid, constrained=False)
            qu, qinv = _unique_rows(q_anchor)
            self.tf_f, self.tf_i, self.tf_off, _ = _frontiers(free, qu, threads)
            self.t0aid = qinv
        del self.qt_anchor

    def _build_tilde(self, joints):
        nq = joints.shape[0]
        n_pat = len(self.patterns)
        inputs = tuple(range(self.n_in))
        y = self.n_in
        self.nu = np.zeros(max(n_pat, 1), dtype=np.int64)
        self.cls = np.zeros((n_pat, nq), dtype=np.int64)
        self.self_mi = np.zeros((max(n_pat, 1), nq, 7))
        r_parts, ik_parts, mi_parts, an_parts = [], [], [], []
        cls_off = [0]
        total = 0
        zeros_c = np.zeros(self.n, dtype=np.int64)
        for v, pat in enumerate(self.patterns):
            S = tuple(sorted(pat.redrawn))
            keep = tuple(a for a in inputs if a not in S) + (y,)
            self.nu[v] = len(pat.families)
            lab_s, _ = group_labels(self.shape, S)
            ps = np.ones(())
            for a in S:
                ps = np.multiply.outer(ps, self.pmfs[a])
            ps = np.ascontiguousarray(ps.reshape(-1))
            idx = family_layout(self.shape, S, keep)
            g = np.ascontiguousarray(simplex_grid(ps.shape[0], self.grid.m))
            mi_labels = []
            for fam in pat.families:
                U = tuple(sorted(fam))
                C = tuple(a for a in S if a not in U)
                la, na = group_labels(self.shape, U)
                lb, nb = group_labels(self.shape, keep)
                lc, nc = group_labels(self.shape, C)
                mi_labels.append((la, lb, lc, na, nb, nc))
                self.self_mi[v, :, len(mi_labels) - 1] = K.cmi_rows(joints, la, lb, lc, na, nb, nc)
            marg = joints.reshape((nq,) + self.shape).sum(axis=tuple(1 + a for a in S)).reshape(nq, -1)
            classes, inv = _unique_rows(np.ascontiguousarray(marg))
            self.cls[v] = inv + (len(cls_off) - 1)
            for c in range(classes.shape[0]):
                mass = classes[c]
                live = int(np.count_nonzero(mass > 0))
                if float(g.shape[0]) ** live + total > MAX_TILDE:
                    raise ComputeGuardError("redraw family exceeds the guard", "SPACE_TOO_LARGE")
                fam_rows = K.enumerate_family(mass, g, idx, self.n, lab_s, ps, self.grid.tol)
                indep = np.empty((1, self.n))
                indep[0, idx] = mass[:, None] * ps[None, :]
                rows = np.vstack([indep, fam_rows])
                total += rows.shape[0]
                r_parts.append(K.f_rows(rows, self.logw))
                ik_parts.append(self.cloud.info_k(rows))
                mi = np.zeros((rows.shape[0], 7))
                for u, labs in enumerate(mi_labels):
                    mi[:, u] = K.cmi_rows(rows, *labs)
                mi_parts.append(mi)
                an_parts.append(self.cloud.anchors_of(rows))
                cls_off.append(cls_off[-1] + rows.shape[0])
        self.cls_off = np.array(cls_off, dtype=np.int64)
        if r_parts:
            self.qt_r = np.concatenate(r_parts)
            self.qt_ik = np.concatenate(ik_parts)
            self.qt_mi = np.ascontiguousarray(np.vstack(mi_parts))
            self.qt_anchor = np.vstack(an_parts)
        else:
            self.qt_r = np.zeros(0)
            self.qt_ik = np.zeros(0)
            self.qt_mi = np.zeros((0, 7))
            self.qt_anchor = np.zeros((0, int(np.prod(self.cloud.anchor_shape))))
        del zeros_c

    @property
    def n_outer(self):
        return self.joints.shape[0]

    @property
    def n_tilde(self):
        return self.qt_r.shape[0]

    def _rate_matrix(self, rate_vec):
        rs = np.zeros((max(len(self.patterns), 1), 7))
        for v, pat in enumerate(self.patterns):
            for u, slot in enumerate(pat.rate_slots):
                rs[v, u] = rate_vec[slot]
        return rs

    def _args(self, rate_vec, rk):
        return (self.fr_f, self.fr_i, self.fr_off, self.fr_fmin, self.tf_f, self.tf_i, self.tf_off,
                self.cls, self.cls_off, self.qt_r, self.qt_ik, self.qt_aid, self.qt_mi,
                self.self_mi, self.nu, self._rate_matrix(rate_vec), float(rk), self.proof)

    def evaluate(self, rate_vec, rk) -> EngineEval:
        a = self._args(rate_vec, rk)
        best, arg = K.outer_min(self.order, self.dvals, self.joints, self.s, self.ikq, self.aidq,
                                self.t0aid, *a)
        return self.details(int(arg), rate_vec, rk, value=float(best))

    def details(self, q, rate_vec, rk, value=None) -> EngineEval:
        a = self._args(rate_vec, rk)
        hats = np.empty((max(len(self.patterns), 1), 8))
        inner, t0 = K.eval_outer(q, self.s, self.ikq, self.aidq, self.t0aid, *a, hats)
        rs = a[15]
        pv = np.full(len(self.patterns), np.inf)
        for v in range(len(self.patterns)):
            ev = hats[v, 7]
            for u in range(int(self.nu[v])):
                ev = max(ev, hats[v, u] - rs[v, u])
            pv[v] = ev
        if value is None:
            value = float(self.dvals[q] + inner)
        return EngineEval(value, q, self.joints[q].copy(), float(self.dvals[q]), float(t0), pv,
                          hats[: len(self.patterns)].copy())

    def inner_values(self, rate_vec, rk):
        """Inner value at every outer point (no pruning); used for diagnostics."""
        a = self._args(rate_vec, rk)
        hats = np.empty((max(len(self.patterns), 1), 8))
        out = np.empty(self.n_outer)
        for q in range(self.n_outer):
            out[q], _ = K.eval_outer(q, self.s, self.ikq, self.aidq, self.t0aid, *a, hats)
        return out


def subsets(axes):
    """Non-empty subsets of ``axes`` in order of size, then lexicographic."""
    axes = tuple(axes)
    out = []
    for r in range(1, len(axes) + 1):
        out.extend(combinations(axes, r))
    return out


def coarse_resolution(m: int) -> int:
    """Resolution used for the convergence bracket: the largest proper
    divisor of m that is at least 2 (so the coarse grid is nested in the
    fine one), else m - 1, floored at 2."""
    for d in range(m // 2, 1, -1):
        if m % d == 0:
            return d
    return max(2, m - 1)
