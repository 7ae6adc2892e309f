"""Error exponent and achievable region of the ordinary fixed-composition
ensemble for receiver 1 of a two-user interference channel.

Receiver 1 decodes its own message with the likelihood averaged over the
interferer's codebook. For a conditional type Q of the output given the
inputs,

    t0(Q)      = R2 + max{ f(Qh) - I_Qh(X2; X1 Y) : Qh_X1Y = Q_X1Y, Qh_X2 = P2, I <= R2 }
    E1(Qt, Q)  = min [ I_Qh(X2; X1 Y) - R2 ]+ over admissible Qh with Qh_X1Y = Qt_X1Y
    E1hat(Q)   = min over Qt (Qt_X2Y = Q_X2Y, Qt_X1 = P1) of I_Qt(X1; X2 Y) + E1(Qt, Q)
    E2hat(Q)   = the same minimum without the information term
    E*(Q)      = max( [E1hat - R1]+, E2hat )
    E(R1, R2)  = min_Q D(Q || W | P1 P2) + E*(Q)

with f(Q) = E_Q log W(Y | X1 X2). See ``l_set`` below for the admissibility
rule.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._engine import ExponentEngine, Pattern, coarse_resolution
from .channels import Dmc2User, marginal_channel
from .errors import ValidationError
from .infomeasures import JointDist, conditional_mutual_information, mutual_information, to_pmf
from .simplexopt import CloudContext, FiCloud, GridSpec, refine_local

# "proof" also admits competitors whose own likelihood beats every other term
# (r > max[f(Qh), t0, s]); "display" uses only the two listed conditions.
DEFAULT_L_SET = "proof"

ORDINARY_PATTERN = (Pattern((0,), ((0,),), (0,)),)


@dataclass(frozen=True)
class RatePair:
    R1: float
    R2: float

    def __post_init__(self):
        for name in ("R1", "R2"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"{name}={v} must be finite and >= 0", "INVALID_RATE")
            object.__setattr__(self, name, v)


@dataclass
class ExponentResult:
    value: float
    argmin_q: JointDist | None
    grid: GridSpec
    bracket: tuple
    details: dict = field(default_factory=dict)

    @property
    def tau(self):
        """Bracket width |value(m) - value(coarse m)|, the reported grid tolerance."""
        a, b = self.bracket
        if math.isinf(a) and math.isinf(b):
            return 0.0
        return abs(b - a)


def _pmf(p, name):
    return to_pmf(p, name)


def _wtable(w):
    if isinstance(w, Dmc2User):
        w = marginal_channel(w, 1)
    return np.asarray(getattr(w, "table", w), dtype=np.float64)


def _check_joint(q: JointDist, table):
    if q.sizes != table.shape:
        raise ValidationError(f"joint {q.sizes} vs channel {table.shape}", "SHAPE_MISMATCH")


def t_zero(cloud: FiCloud, r2: float) -> float:
    """R2 + max{ f - I : (f, I) in cloud, I <= R2 }."""
    best = -math.inf
    for p in cloud.points:
        if p.info <= r2 and p.f - p.info > best:
            best = p.f - p.info
    return r2 + best if best > -math.inf else -math.inf


class _Single:
    """Helpers for the pointwise quantities on one channel."""

    def __init__(self, table, p2, grid, k_axis, t0_constrained):
        self.table = table
        self.ctx = CloudContext(table, k_axis, p2, grid, constrained=True)
        self.ctx_t0 = self.ctx if t0_constrained else CloudContext(table, k_axis, p2, grid, False)

    def t0(self, q_flat, s, rk):
        _, fv, iv = self.ctx_t0.points(self.ctx.anchors_of(q_flat[None])[0])
        ik = self.ctx.info_k(q_flat[None])[0]
        return K.t0_scan(fv, iv, 0, fv.shape[0], s, ik, rk)

    def e1(self, qt_flat, q_flat, rk, proof):
        logw = self.ctx.logw
        s = K.f_flat(q_flat, logw)
        r = K.f_flat(qt_flat, logw)
        t0 = self.t0(q_flat, s, rk)
        _, fv, iv = self.ctx.points(self.ctx.anchors_of(qt_flat[None])[0])
        ik = self.ctx.info_k(qt_flat[None])[0]
        return K.e1_scan(fv, iv, 0, fv.shape[0], r, ik, fv.min(), r, t0, s, rk, proof)


def e_one(q_tilde: JointDist, q: JointDist, r2: float, w, grid: GridSpec, p_x2=None,
          l_set=DEFAULT_L_SET, t0_constrained=True) -> float:
    """One-competitor exponent E1(q~, q) at interferer rate r2.

    ``p_x2`` defaults to q's X2 marginal. The cloud is anchored at q~'s
    (X1, Y) marginal and contains q~ itself; t0 is taken at q's anchor with q
    as an extra point.
    """
    table = _wtable(w)
    _check_joint(q, table)
    _check_joint(q_tilde, table)
    p2 = q.marginal(1).probs if p_x2 is None else _pmf(p_x2, "p_x2")
    one = _Single(table, p2, grid, 1, t0_constrained)
    return float(one.e1(np.ascontiguousarray(q_tilde.flat), np.ascontiguousarray(q.flat), float(r2),
                        l_set == "proof"))


def _pointwise_engine(q: JointDist, w, grid, p_x1, p_x2, l_set, t0_constrained):
    table = _wtable(w)
    _check_joint(q, table)
    p1 = q.marginal(0).probs if p_x1 is None else _pmf(p_x1, "p_x1")
    p2 = q.marginal(1).probs if p_x2 is None else _pmf(p_x2, "p_x2")
    return ExponentEngine(table, [p1, p2], 1, ORDINARY_PATTERN, grid, l_set=l_set,
                          t0_constrained=t0_constrained, outer=q.flat[None])


def e_hat(q: JointDist, r2: float, which: int, w, grid: GridSpec, p_x1=None, p_x2=None,
          l_set=DEFAULT_L_SET, t0_constrained=True) -> float:
    """E1hat (which=1) or E2hat (which=2) at the outer joint q."""
    if which not in (1, 2):
        raise ValidationError("which must be 1 or 2", "INVALID_OPTION")
    eng = _pointwise_engine(q, w, grid, p_x1, p_x2, l_set, t0_constrained)
    ev = eng.details(0, [0.0], float(r2))
    return float(ev.hats[0, 0] if which == 1 else ev.hats[0, 7])


def e_star_inner(q: JointDist, rates: RatePair, w, grid: GridSpec, p_x1=None, p_x2=None,
                 l_set=DEFAULT_L_SET, t0_constrained=True) -> float:
    """max( [E1hat - R1]+, E2hat ) at the outer joint q."""
    eng = _pointwise_engine(q, w, grid, p_x1, p_x2, l_set, t0_constrained)
    ev = eng.details(0, [rates.R1], rates.R2)
    return float(ev.pattern_values[0])


_ENGINES: "OrderedDict[tuple, ExponentEngine]" = OrderedDict()
_ENGINE_LOCK = threading.Lock()
_ENGINE_CACHE_SIZE = 8


def cached_engine(table, pmfs, k_axis, patterns, grid, l_set, t0_constrained, threads=1):
    """Build or reuse an engine; keyed by the exact bytes of every input."""
    key = (table.tobytes(), table.shape, tuple(p.tobytes() for p in pmfs), k_axis,
           tuple(patterns), grid.m, l_set, t0_constrained)
    with _ENGINE_LOCK:
        eng = _ENGINES.get(key)
        if eng is not None:
            _ENGINES.move_to_end(key)
            return eng
    eng = ExponentEngine(table, pmfs, k_axis, patterns, grid, l_set=l_set,
                         t0_constrained=t0_constrained, threads=threads)
    with _ENGINE_LOCK:
        _ENGINES[key] = eng
        while len(_ENGINES) > _ENGINE_CACHE_SIZE:
            _ENGINES.popitem(last=False)
    return eng


class OrdinaryExponent:
    """Receiver-1 exponent of the ordinary ensemble, reusable across rates.

    Builds the rate-independent tables at resolution m and at the coarse
    resolution used for the bracket once; ``exponent`` then costs a scan.
    """

    def __init__(self, dmc, p_x1, p_x2, grid: GridSpec = GridSpec(), *, l_set=DEFAULT_L_SET,
                 t0_constrained=True, bracket=True, threads=1):
        self.table = _wtable(dmc)
        if self.table.ndim != 3:
            raise ValidationError("expected a channel with inputs (X1, X2)", "SHAPE_MISMATCH")
        self.p1 = _pmf(p_x1, "p_x1")
        self.p2 = _pmf(p_x2, "p_x2")
        if self.table.shape[:2] != (self.p1.size, self.p2.size):
            raise ValidationError("input pmfs do not match the channel", "SHAPE_MISMATCH")
        self.grid = grid
        self.l_set = l_set
        self.t0_constrained = t0_constrained
        args = ([self.p1, self.p2], 1, ORDINARY_PATTERN)
        self.engine = cached_engine(self.table, *args, grid, l_set, t0_constrained, threads)
        self.coarse = None
        if bracket:
            mc = coarse_resolution(grid.m)
            if mc != grid.m:
                self.coarse = cached_engine(self.table, *args, GridSpec(mc), l_set, t0_constrained,
                                            threads)

    def exponent(self, rates: RatePair) -> ExponentResult:
        ev = self.engine.evaluate([rates.R1], rates.R2)
        value = ev.value
        coarse = self.coarse.evaluate([rates.R1], rates.R2).value if self.coarse else value
        details = {"divergence": ev.divergence, "t0": ev.t0, "e_star": float(ev.pattern_values[0]),
                   "e1_hat": float(ev.hats[0, 0]), "e2_hat": float(ev.hats[0, 7])}
        joint = JointDist.trusted(ev.joint.reshape(self.table.shape)) if math.isfinite(value) else None
        bracket = (coarse, value)
        if self.grid.refine and joint is not None:
            joint, refined = self._refine(joint, rates)
            if refined < value:
                details["grid_value"] = value
                bracket = (value, refined)
                value = refined
        return ExponentResult(value, joint, self.grid, bracket, details)

    def _refine(self, joint, rates):
        pin = np.multiply.outer(self.p1, self.p2)

        def objective(q):
            qc = q.probs / np.where(pin > 0, pin, 1.0)[..., None]
            eng = ExponentEngine(self.table, [self.p1, self.p2], 1, ORDINARY_PATTERN, self.grid,
                                 l_set=self.l_set, t0_constrained=self.t0_constrained,
                                 outer=q.flat[None])
            return float(eng.details(0, [rates.R1], rates.R2).value) if np.all(qc >= 0) else math.inf

        start = objective(joint)
        best = refine_local(joint, objective, equality_marginals=[(0, 1)], steps=4,
                            initial_step=1.0 / (2 * self.grid.m), max_sweeps=3)
        val = objective(best)
        return (best, val) if val < start else (joint, start)


def exponent_ordinary(dmc, p_x1, p_x2, rates: RatePair, grid: GridSpec = GridSpec(), *,
                      l_set=DEFAULT_L_SET, t0_constrained=True, bracket=True) -> ExponentResult:
    """Receiver-1 random-coding exponent of the ordinary ensemble at ``rates``.

    Repeated calls with the same channel, pmfs and grid reuse the cached
    rate-independent tables.
    """
    return OrdinaryExponent(dmc, p_x1, p_x2, grid, l_set=l_set, t0_constrained=t0_constrained,
                            bracket=bracket).exponent(rates)


def _halfplanes_distance(point, planes):
    """Euclidean distance from ``point`` to {x : a.x <= b for (a, b) in planes}
    (at most two half-planes)."""
    x = np.asarray(point, dtype=float)
    viol = [(np.asarray(a, float), b) for a, b in planes if np.dot(a, x) > b]
    if not viol:
        return 0.0
    cands = []
    for a, b in planes:
        a = np.asarray(a, float)
        proj = x - max(0.0, np.dot(a, x) - b) / np.dot(a, a) * a
        if all(np.dot(np.asarray(a2, float), proj) <= b2 + 1e-15 for a2, b2 in planes):
            cands.append(np.linalg.norm(x - proj))
    if len(planes) == 2:
        (a1, b1), (a2, b2) = planes
        mat = np.array([a1, a2], dtype=float)
        if abs(np.linalg.det(mat)) > 1e-15:
            corner = np.linalg.solve(mat, [b1, b2])
            cands.append(np.linalg.norm(x - corner))
    return min(cands)


@dataclass(frozen=True)
class RegionOrdinary:
    """R1 < I(X1;Y1), or R1 + R2 < I(X1 X2; Y1) and R1 < I(X1; Y1 | X2)."""

    i_x1_y1: float
    i_x1_y1_given_x2: float
    i_x1x2_y1: float

    def _r(self, rates):
        return (rates.R1, rates.R2) if isinstance(rates, RatePair) else tuple(map(float, rates))

    def contains(self, rates) -> bool:
        r1, r2 = self._r(rates)
        return r1 < self.i_x1_y1 or (r1 + r2 < self.i_x1x2_y1 and r1 < self.i_x1_y1_given_x2)

    def boundary_distance(self, rates) -> float:
        """Euclidean distance from the rate point to the region's boundary in the plane."""
        x = self._r(rates)
        piece_a = [((1.0, 0.0), self.i_x1_y1)]
        piece_b = [((1.0, 1.0), self.i_x1x2_y1), ((1.0, 0.0), self.i_x1_y1_given_x2)]
        if self.contains(x):
            # distance to the complement: {R1 >= I_c} or {R1 >= I_1, R1 + R2 >= I_s}
            comp1 = [((-1.0, 0.0), -self.i_x1_y1_given_x2)]
            comp2 = [((-1.0, 0.0), -self.i_x1_y1), ((-1.0, -1.0), -self.i_x1x2_y1)]
            return min(_halfplanes_distance(x, comp1), _halfplanes_distance(x, comp2))
        return min(_halfplanes_distance(x, piece_a), _halfplanes_distance(x, piece_b))


def region_ordinary(dmc, p_x1, p_x2) -> RegionOrdinary:
    """The three information constants under P1 x P2 x W (receiver 1)."""
    table = _wtable(dmc)
    p1 = _pmf(p_x1, "p_x1")
    p2 = _pmf(p_x2, "p_x2")
    joint = JointDist(np.multiply.outer(np.multiply.outer(p1, p2), np.ones(table.shape[-1])) * table)
    return RegionOrdinary(
        i_x1_y1=mutual_information(joint, (0,), (2,)),
        i_x1_y1_given_x2=conditional_mutual_information(joint, (0,), (2,), (1,)),
        i_x1x2_y1=mutual_information(joint, (0, 1), (2,)),
    )
