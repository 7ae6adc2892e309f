"""Joint distributions and information measures, all in nats.

Extended reals are plain floats: ``math.inf`` and ``-math.inf`` stand for the
infinite values and follow IEEE arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import ValidationError

PMF_TOL = 1e-9


def _as_axes(axes, n):
    if isinstance(axes, (int, np.integer)):
        axes = (int(axes),)
    axes = tuple(int(a) for a in axes)
    if not axes:
        raise ValidationError("axis group is empty", "EMPTY_AXES")
    for a in axes:
        if a < 0 or a >= n:
            raise ValidationError(f"axis {a} out of range for {n} axes", "EMPTY_AXES")
    if len(set(axes)) != len(axes):
        raise ValidationError(f"repeated axis in {axes}", "OVERLAPPING_GROUPS")
    return axes


@dataclass(frozen=True, eq=False)
class JointDist:
    """A pmf over a product of index alphabets; ``probs.shape`` gives the sizes."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim == 0 or p.size == 0:
            raise ValidationError("joint distribution needs at least one axis", "DIMENSION_MISMATCH")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("negative or non-finite probability", "NEGATIVE_PROBABILITY")
        tot = p.sum()
        if abs(tot - 1.0) > PMF_TOL:
            raise ValidationError(f"total mass {float(tot)!r} differs from 1", "ROW_SUM")
        if tot != 1.0:
            p = p / tot
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def trusted(cls, probs):
        """Wrap an array already known to be a pmf (skips renormalisation)."""
        obj = object.__new__(cls)
        p = np.array(probs, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(obj, "probs", p)
        return obj

    @property
    def sizes(self):
        return self.probs.shape

    @property
    def ndim(self):
        return self.probs.ndim

    @property
    def flat(self):
        return self.probs.reshape(-1)

    def marginal(self, axes):
        return marginal(self, axes)

    def __eq__(self, other):
        return isinstance(other, JointDist) and self.sizes == other.sizes and bool(
            np.array_equal(self.probs, other.probs))

    def __hash__(self):
        return hash((self.sizes, self.probs.tobytes()))

    def __repr__(self):
        return f"JointDist(sizes={self.sizes})"


def product(*pmfs) -> JointDist:
    """Product distribution of one-dimensional pmfs (or JointDists)."""
    out = np.ones(())
    for p in pmfs:
        a = p.probs if isinstance(p, JointDist) else np.asarray(p, dtype=np.float64)
        out = np.multiply.outer(out, a)
    return JointDist(out)


def marginal(q: JointDist, axes) -> JointDist:
    axes = _as_axes(axes, q.ndim)
    drop = tuple(a for a in range(q.ndim) if a not in axes)
    m = q.probs.sum(axis=drop) if drop else q.probs
    # sum keeps the original axis order; honour the requested order
    kept = sorted(axes)
    m = np.transpose(m, [kept.index(a) for a in axes])
    return JointDist.trusted(m)


def group_labels(sizes, axes):
    """Per-cell index (C order) of the sub-configuration on ``axes``."""
    n = int(np.prod(sizes))
    if not axes:
        return np.zeros(n, dtype=np.int64), 1
    coords = np.indices(sizes).reshape(len(sizes), -1)
    sub = tuple(sizes[a] for a in axes)
    lab = np.ravel_multi_index(tuple(coords[a] for a in axes), sub)
    return lab.astype(np.int64), int(np.prod(sub))


def _check_disjoint(*groups):
    seen = set()
    for g in groups:
        if seen & set(g):
            raise ValidationError(f"axis groups overlap: {groups}", "OVERLAPPING_GROUPS")
        seen |= set(g)


def entropy(q: JointDist) -> float:
    return float(K.entropy_flat(np.ascontiguousarray(q.flat)))


def conditional_mutual_information(q: JointDist, a, b, c=()) -> float:
    """I(A;B|C); axes outside A, B, C are summed out."""
    a = _as_axes(a, q.ndim)
    b = _as_axes(b, q.ndim)
    c = tuple(int(x) for x in c) if not isinstance(c, (int, np.integer)) else (int(c),)
    if c:
        c = _as_axes(c, q.ndim)
    _check_disjoint(a, b, c)
    used = sorted(a + b + c)
    if len(used) < q.ndim:
        # the kernel needs the groups to cover every axis
        q = marginal(q, used)
        pos = {ax: i for i, ax in enumerate(used)}
        a, b, c = (tuple(pos[x] for x in g) for g in (a, b, c))
    la, na = group_labels(q.sizes, a)
    lb, nb = group_labels(q.sizes, b)
    lc, nc = group_labels(q.sizes, c)
    return float(K.cmi_flat(np.ascontiguousarray(q.flat), la, lb, lc, na, nb, nc))


def mutual_information(q: JointDist, group_a, group_b) -> float:
    return conditional_mutual_information(q, group_a, group_b, ())


def kl_divergence(q: JointDist, p: JointDist) -> float:
    if q.sizes != p.sizes:
        raise ValidationError(f"axes {q.sizes} vs {p.sizes}", "AXES_MISMATCH")
    return float(K.kl_flat(np.ascontiguousarray(q.flat), np.ascontiguousarray(p.flat)))


def weighted_divergence(q_ch, p_ch, p_x) -> float:
    """sum_x p_x(x) D(q_ch(.|x) || p_ch(.|x)); the output axes are the trailing ones.

    ``q_ch`` and ``p_ch`` have shape ``p_x.shape + output_shape``.
    """
    q_ch = np.asarray(q_ch, dtype=np.float64)
    p_ch = np.asarray(p_ch, dtype=np.float64)
    px = p_x.probs if isinstance(p_x, JointDist) else np.asarray(p_x, dtype=np.float64)
    if q_ch.shape != p_ch.shape or q_ch.shape[: px.ndim] != px.shape:
        raise ValidationError(f"shapes {q_ch.shape}, {p_ch.shape}, {px.shape}", "SHAPE_MISMATCH")
    out_shape = q_ch.shape[px.ndim:]
    w = px.reshape(px.shape + (1,) * len(out_shape))
    return float(K.kl_flat(np.ascontiguousarray((w * q_ch).reshape(-1)),
                           np.ascontiguousarray((w * p_ch).reshape(-1))))


def log_table(w: np.ndarray) -> np.ndarray:
    """Elementwise log with log 0 = -inf, no warnings."""
    w = np.asarray(w, dtype=np.float64)
    out = np.full(w.shape, -np.inf)
    np.log(w, out=out, where=w > 0)
    return out


def f_value(q: JointDist, w) -> float:
    """E_q log w(y | inputs); ``w`` is a conditional table with the joint's shape."""
    table = getattr(w, "table", w)
    table = np.asarray(table, dtype=np.float64)
    if table.shape != q.sizes:
        raise ValidationError(f"joint {q.sizes} vs channel {table.shape}", "SHAPE_MISMATCH")
    return float(K.f_flat(np.ascontiguousarray(q.flat), log_table(table).reshape(-1)))


def binary_entropy(p: float) -> float:
    return entropy(JointDist(np.array([p, 1.0 - p])))


def to_pmf(p: Sequence[float] | np.ndarray | JointDist, name="pmf") -> np.ndarray:
    """Validate a one-dimensional pmf and return it as a float array."""
    a = p.probs if isinstance(p, JointDist) else np.asarray(p, dtype=np.float64)
    if a.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional", "DIMENSION_MISMATCH")
    return np.array(JointDist(a).probs)
