"""Error exponent and achievable region for receiver 1 under the rate-split
(common/private) superposition ensemble.

Sender k maps two independently drawn fixed-composition codewords through a
deterministic map. Inputs are indexed 1..4 for (Z11, Z12, Z21, Z22); the
receiver decodes (m11, m12, m21) while averaging over the Z22 codebook.

An error pattern v redraws the coordinates U(v), where U(1..7) =
{1}, {2}, {3}, {1,2}, {1,3}, {2,3}, {1,2,3}. For pattern v the legal
families are the u with U(u) a subset of U(v), plus the tail u = 8 which
carries no information term. Rate sums: R_u = sum of the rates of U(u).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._engine import ExponentEngine, Pattern, coarse_resolution
from .channels import VirtualChannel
from .errors import ValidationError
from .infomeasures import JointDist, conditional_mutual_information, to_pmf
from .ordinary import DEFAULT_L_SET, ExponentResult, _Single, cached_engine, t_zero
from .simplexopt import FiCloud, GridSpec

U_SETS = {1: (0,), 2: (1,), 3: (2,), 4: (0, 1), 5: (0, 2), 6: (1, 2), 7: (0, 1, 2)}
TAIL = 8
K_AXIS = 3


@dataclass(frozen=True)
class HkRates:
    R11: float
    R12: float
    R21: float
    R22: float

    def __post_init__(self):
        for name in ("R11", "R12", "R21", "R22"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"{name}={v} must be finite and >= 0", "INVALID_RATE")
            object.__setattr__(self, name, v)

    @property
    def R1(self):
        return self.R11 + self.R12

    @property
    def R2(self):
        return self.R21 + self.R22


@dataclass(frozen=True)
class RateSums:
    values: tuple

    def __getitem__(self, u):
        """1-based access, R_u for u in 1..7."""
        if not 1 <= u <= 7:
            raise IndexError(u)
        return self.values[u - 1]


def rate_sums(rates: HkRates) -> RateSums:
    base = (rates.R11, rates.R12, rates.R21)
    return RateSums(tuple(sum(base[i] for i in U_SETS[u]) for u in range(1, 8)))


def legal_u(v: int):
    if v not in U_SETS:
        raise ValidationError(f"error pattern v={v} outside 1..7", "ILLEGAL_UV_PAIR")
    return [u for u in range(1, 8) if set(U_SETS[u]) <= set(U_SETS[v])]


def make_pattern(v: int) -> Pattern:
    fams = legal_u(v)
    return Pattern(U_SETS[v], tuple(U_SETS[u] for u in fams), tuple(u - 1 for u in fams))


def live_patterns(z_sizes):
    """Patterns that redraw no singleton coordinate. A coordinate with one
    symbol has a single possible codeword, so a pattern that redraws it
    describes no error and contributes +inf."""
    return [v for v in range(1, 8) if all(z_sizes[a] > 1 for a in U_SETS[v])]


def _vtable(vch):
    t = np.asarray(getattr(vch, "table", vch), dtype=np.float64)
    if t.ndim != 5:
        raise ValidationError("expected a virtual channel with four inputs", "SHAPE_MISMATCH")
    return t


def _pmfs(p_z, table):
    if len(p_z) != 4:
        raise ValidationError("need four input pmfs", "DIMENSION_MISMATCH")
    ps = [to_pmf(p, f"p_z{i + 1}") for i, p in enumerate(p_z)]
    if tuple(p.size for p in ps) != table.shape[:4]:
        raise ValidationError("input pmfs do not match the virtual channel", "SHAPE_MISMATCH")
    return ps


def r_zero(cloud: FiCloud, r22: float) -> float:
    """R22 + max{ f - I(Z4; Z1 Z2 Z3 Y) : I <= R22 } over the cloud."""
    return t_zero(cloud, r22)


def e_one_hk(q_tilde: JointDist, q: JointDist, r22: float, vch, grid: GridSpec, p_z4=None,
             l_set=DEFAULT_L_SET, t0_constrained=True) -> float:
    table = _vtable(vch)
    for x in (q, q_tilde):
        if x.sizes != table.shape:
            raise ValidationError(f"joint {x.sizes} vs channel {table.shape}", "SHAPE_MISMATCH")
    p4 = q.marginal(K_AXIS).probs if p_z4 is None else to_pmf(p_z4, "p_z4")
    one = _Single(table, p4, grid, K_AXIS, t0_constrained)
    return float(one.e1(np.ascontiguousarray(q_tilde.flat), np.ascontiguousarray(q.flat), float(r22),
                        l_set == "proof"))


def _point_engine(q, v, vch, grid, p_z, l_set, t0_constrained):
    table = _vtable(vch)
    if q.sizes != table.shape:
        raise ValidationError(f"joint {q.sizes} vs channel {table.shape}", "SHAPE_MISMATCH")
    ps = [q.marginal(a).probs for a in range(4)] if p_z is None else _pmfs(p_z, table)
    return ExponentEngine(table, ps, K_AXIS, [make_pattern(v)], grid, l_set=l_set,
                          t0_constrained=t0_constrained, outer=q.flat[None])


def e_hat_family(q: JointDist, v: int, u: int, r22: float, vch, grid: GridSpec, p_z=None,
                 l_set=DEFAULT_L_SET, t0_constrained=True) -> float:
    """E_u^(v)(q) for legal u, or the tail E_8^(v)(q) for u = 8."""
    fams = legal_u(v)
    if u != TAIL and u not in fams:
        raise ValidationError(f"u={u} is not legal for pattern v={v}", "ILLEGAL_UV_PAIR")
    eng = _point_engine(q, v, vch, grid, p_z, l_set, t0_constrained)
    ev = eng.details(0, np.zeros(7), float(r22))
    return float(ev.hats[0, 7] if u == TAIL else ev.hats[0, fams.index(u)])


def e_hk_u(q: JointDist, v: int, rates: HkRates, vch, grid: GridSpec, p_z=None,
           l_set=DEFAULT_L_SET, t0_constrained=True) -> float:
    """max( max_u [E_u^(v) - R_u]+, E_8^(v) ) at the outer joint q."""
    eng = _point_engine(q, v, vch, grid, p_z, l_set, t0_constrained)
    ev = eng.details(0, rate_sums(rates).values, rates.R22)
    return float(ev.pattern_values[0])


class HkExponent:
    """Receiver-1 exponent of the superposition ensemble, reusable across rates."""

    def __init__(self, vch, p_z, grid: GridSpec = GridSpec(3), *, l_set=DEFAULT_L_SET,
                 t0_constrained=True, bracket=True, threads=1):
        self.table = _vtable(vch)
        self.pmfs = _pmfs(p_z, self.table)
        self.grid = grid
        self.patterns_v = live_patterns(self.table.shape[:4])
        pats = tuple(make_pattern(v) for v in self.patterns_v)
        self.engine = cached_engine(self.table, self.pmfs, K_AXIS, pats, grid, l_set,
                                    t0_constrained, threads)
        self.coarse = None
        if bracket:
            mc = coarse_resolution(grid.m)
            if mc != grid.m:
                self.coarse = cached_engine(self.table, self.pmfs, K_AXIS, pats, GridSpec(mc),
                                            l_set, t0_constrained, threads)

    def exponent(self, rates: HkRates) -> ExponentResult:
        rs = rate_sums(rates).values
        ev = self.engine.evaluate(rs, rates.R22)
        value = ev.value
        coarse = self.coarse.evaluate(rs, rates.R22).value if self.coarse else value
        per_v = {v: math.inf for v in range(1, 8)}
        for i, v in enumerate(self.patterns_v):
            per_v[v] = float(ev.pattern_values[i])
        joint = JointDist.trusted(ev.joint.reshape(self.table.shape)) if math.isfinite(value) else None
        details = {"divergence": ev.divergence, "r0": ev.t0, "per_pattern": per_v}
        return ExponentResult(value, joint, self.grid, (coarse, value), details)


def exponent_hk(vch, p_z, rates: HkRates, grid: GridSpec = GridSpec(3), *, l_set=DEFAULT_L_SET,
                t0_constrained=True, bracket=True) -> ExponentResult:
    return HkExponent(vch, p_z, grid, l_set=l_set, t0_constrained=t0_constrained,
                      bracket=bracket).exponent(rates)


@dataclass(frozen=True)
class RegionHk:
    """Seven bounds R_u < I(Z_U(u); Y | Z_{123 minus U(u)}), u = 1..7.

    ``active[u-1]`` is False when U(u) contains a singleton coordinate: that
    sub-message carries no information, so the bound is dropped.
    """

    bounds: tuple
    active: tuple = field(default=(True,) * 7)

    def contains(self, rates: HkRates) -> bool:
        rs = rate_sums(rates)
        return all(rs[u] < self.bounds[u - 1] for u in range(1, 8) if self.active[u - 1])

    def _faces(self):
        a, b = [], []
        for u in range(1, 8):
            if self.active[u - 1]:
                a.append([1.0 if i in U_SETS[u] else 0.0 for i in range(3)])
                b.append(self.bounds[u - 1])
        return np.array(a).reshape(-1, 3), np.array(b)

    def boundary_distance(self, rates: HkRates) -> float:
        """Euclidean distance in (R11, R12, R21) from the rate point to the
        region's boundary (R22 does not enter the region)."""
        x = np.array([rates.R11, rates.R12, rates.R21])
        a, b = self._faces()
        if a.shape[0] == 0:
            return math.inf
        gaps = (b - a @ x) / np.linalg.norm(a, axis=1)
        if np.all(gaps > 0):
            return float(gaps.min())
        return _polytope_distance(x, a, b)

    def margin(self, rates: HkRates) -> float:
        """Smallest gap bound - R_u over active faces (negative when outside)."""
        rs = rate_sums(rates)
        gaps = [self.bounds[u - 1] - rs[u] for u in range(1, 8) if self.active[u - 1]]
        return min(gaps) if gaps else math.inf


def _polytope_distance(x, a, b):
    """Distance from x to {z : a z <= b}: the nearest point is the projection
    onto the affine hull of some set of tight faces, so try every set."""
    best = math.inf
    n = a.shape[0]
    for k in range(n + 1):
        for rows in itertools.combinations(range(n), k):
            if k == 0:
                z = x
            else:
                ak, bk = a[list(rows)], b[list(rows)]
                # least-norm correction onto {z : ak z = bk}
                corr, *_ = np.linalg.lstsq(ak, bk - ak @ x, rcond=None)
                z = x + corr
                if not np.allclose(ak @ z, bk, atol=1e-12):
                    continue
            if np.all(a @ z <= b + 1e-12):
                best = min(best, float(np.linalg.norm(z - x)))
    return best


def region_hk(vch, p_z) -> RegionHk:
    table = _vtable(vch)
    ps = _pmfs(p_z, table)
    pin = np.ones(())
    for p in ps:
        pin = np.multiply.outer(pin, p)
    joint = JointDist(pin[..., None] * table)
    bounds, active = [], []
    for u in range(1, 8):
        U = U_SETS[u]
        C = tuple(a for a in (0, 1, 2) if a not in U)
        bounds.append(conditional_mutual_information(joint, U, (4,), C))
        active.append(all(table.shape[a] > 1 for a in U))
    return RegionHk(tuple(bounds), tuple(active))
