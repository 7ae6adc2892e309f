"""Exact checks of union-of-events bounds on small enumerable spaces.

A union instance has G independent groups of i.i.d. draws. Group g holds
``counts[g]`` independent copies of a random vector with pmf ``pmfs[g]``
(flattened over that group's alphabet). The event is

    there exist indices (i_0, ..., i_{G-1}) with T(U_0(i_0), ..., U_{G-1}(i_{G-1})) = 1,

where ``T`` is the indicator of the union over l of the per-l conditions.
For the two-group bound the groups are V1 (count L1) and (V2..VK) (count
L2); for the (J+1)-group bound they are Z_1..Z_J and (V1..VK).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import NamedTuple, Sequence

import numpy as np

from ..errors import ComputeGuardError, ValidationError

MAX_ATOMS = 10**7
CONST_TOL = 1e-12


@dataclass(frozen=True)
class UnionInstance:
    """Generic union instance; ``table`` has one axis per group."""

    pmfs: tuple
    counts: tuple
    table: np.ndarray

    def __post_init__(self):
        pmfs = tuple(np.asarray(p, dtype=np.float64).ravel() for p in self.pmfs)
        counts = tuple(int(c) for c in self.counts)
        table = np.asarray(self.table, dtype=bool)
        if len(pmfs) != len(counts) or table.ndim != len(pmfs):
            raise ValidationError("one pmf, count and table axis per group", "DIMENSION_MISMATCH")
        for p in pmfs:
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ValidationError("group pmf is not a distribution", "ROW_SUM")
        if any(c < 1 for c in counts):
            raise ValidationError("counts must be >= 1", "INVALID_OPTION")
        if table.shape != tuple(p.size for p in pmfs):
            raise ValidationError(f"table {table.shape} vs alphabets", "SHAPE_MISMATCH")
        object.__setattr__(self, "pmfs", pmfs)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "table", table)

    @property
    def atoms(self):
        return math.prod(p.size ** c for p, c in zip(self.pmfs, self.counts))


@dataclass(frozen=True)
class LemmaInstance:
    """V1 with count L1 and V2..VK with common count L2, plus N event triples.

    ``a0[l]`` is a membership vector over V1, ``a[l][k]`` a matrix over
    V1 x V_{k+2} (k = 0..K-2) and ``g[l][k]`` a vector over V_{k+2}.
    """

    sizes: tuple
    pmfs: tuple
    L1: int
    L2: int
    a0: tuple
    a: tuple
    g: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValidationError("need K >= 2 positive alphabet sizes", "DIMENSION_MISMATCH")
        if len(self.pmfs) != len(sizes):
            raise ValidationError("one pmf per variable", "DIMENSION_MISMATCH")
        n = len(self.a0)
        if len(self.a) != n or len(self.g) != n:
            raise ValidationError("a0, a and g must list the same N events", "DIMENSION_MISMATCH")
        for l in range(n):
            if np.shape(self.a0[l]) != (sizes[0],):
                raise ValidationError("A_{l,0} outside V1", "SHAPE_MISMATCH")
            for k in range(len(sizes) - 1):
                if np.shape(self.a[l][k]) != (sizes[0], sizes[k + 1]):
                    raise ValidationError(f"A_{{l,{k + 1}}} outside V1 x V{k + 2}", "SHAPE_MISMATCH")
                if np.shape(self.g[l][k]) != (sizes[k + 1],):
                    raise ValidationError(f"G_{{l,{k + 2}}} outside V{k + 2}", "SHAPE_MISMATCH")
        object.__setattr__(self, "sizes", sizes)

    @property
    def K(self):
        return len(self.sizes)

    def event_table(self) -> np.ndarray:
        """Indicator over V1 x V2 x ... x VK of the union of the N conditions."""
        shape = self.sizes
        out = np.zeros(shape, dtype=bool)
        for l in range(len(self.a0)):
            ev = np.asarray(self.a0[l], dtype=bool).reshape((-1,) + (1,) * (self.K - 1))
            ev = np.broadcast_to(ev, shape).copy()
            for k in range(self.K - 1):
                pair = np.asarray(self.a[l][k], dtype=bool)
                gk = np.asarray(self.g[l][k], dtype=bool)
                view = [1] * self.K
                view[0], view[k + 1] = shape[0], shape[k + 1]
                ev &= (pair & gk[None, :]).reshape(view)
            out |= ev
        return out

    def to_union(self) -> UnionInstance:
        rest = np.ones(())
        for p in self.pmfs[1:]:
            rest = np.multiply.outer(rest, np.asarray(p, dtype=np.float64))
        t = self.event_table().reshape(self.sizes[0], -1)
        return UnionInstance((self.pmfs[0], rest.ravel()), (self.L1, self.L2), t)


class Bounds(NamedTuple):
    upper: float
    lower: float
    conditions_hold: bool


def _as_union(instance) -> UnionInstance:
    if isinstance(instance, UnionInstance):
        return instance
    if isinstance(instance, LemmaInstance):
        return instance.to_union()
    raise ValidationError(f"unsupported instance type {type(instance).__name__}", "INVALID_OPTION")


def _guard(u: UnionInstance):
    if u.atoms > MAX_ATOMS:
        raise ComputeGuardError(f"{u.atoms} atoms exceed the enumeration guard {MAX_ATOMS}",
                                "SPACE_TOO_LARGE")


def _presence_distribution(pmf, count):
    """Exact law of the set of symbols seen in ``count`` i.i.d. draws, by
    enumerating every draw sequence. Returns (bitmasks, probabilities)."""
    k = pmf.size
    masks = np.zeros(1, dtype=np.int64)
    probs = np.ones(1)
    for _ in range(count):
        masks = (masks[:, None] | (np.int64(1) << np.arange(k, dtype=np.int64))[None, :]).ravel()
        probs = (probs[:, None] * pmf[None, :]).ravel()
    uniq, inv = np.unique(masks, return_inverse=True)
    return uniq, np.bincount(inv, weights=probs, minlength=uniq.size)


def _mask_to_bool(mask, k):
    return ((int(mask) >> np.arange(k)) & 1).astype(bool)


def exact_union_probability(instance) -> float:
    """P(union) by enumerating all draw sequences of every group.

    Sequences are grouped by the set of symbols they contain (the event only
    depends on that set), then every combination of sets is checked.
    """
    u = _as_union(instance)
    _guard(u)
    dists = [_presence_distribution(p, c) for p, c in zip(u.pmfs, u.counts)]
    total = []
    for combo in product(*[range(d[0].size) for d in dists]):
        pr = math.prod(float(dists[g][1][i]) for g, i in enumerate(combo))
        if pr == 0.0:
            continue
        sub = u.table
        for g, i in enumerate(combo):
            sel = _mask_to_bool(dists[g][0][i], u.pmfs[g].size)
            sub = np.compress(sel, sub, axis=g)
        if sub.any():
            total.append(pr)
    return math.fsum(total)


def _subset_terms(u: UnionInstance):
    """For each non-empty subset J of groups: (prod of counts over J,
    P(U_J in projection of T), whether P(T | U_J = u_J) is constant on that
    projection)."""
    n = len(u.pmfs)
    joint = np.ones(())
    for p in u.pmfs:
        joint = np.multiply.outer(joint, p)
    terms = []
    for r in range(1, n + 1):
        for J in combinations(range(n), r):
            rest = tuple(g for g in range(n) if g not in J)
            proj = u.table.any(axis=rest) if rest else u.table
            pj = np.ones(())
            for g in J:
                pj = np.multiply.outer(pj, u.pmfs[g])
            prob = math.fsum((pj * proj).ravel().tolist())
            hit = (joint * u.table).sum(axis=rest) if rest else joint * u.table
            live = proj & (pj > 0)
            cond = hit[live] / pj[live]
            const = bool(cond.size == 0 or np.ptp(cond) <= CONST_TOL * max(1.0, cond.max()))
            terms.append((J, math.prod(u.counts[g] for g in J), prob, const))
    return terms


def union_bounds(instance) -> Bounds:
    """min{1, min_J (prod_{j in J} N_j) P(U_J in B_J)} and the same times
    2^-(number of groups); the lower bound is claimed only when, for every
    proper non-empty J, P(event | U_J = u_J) is the same for all u_J in B_J."""
    u = _as_union(instance)
    _guard(u)
    terms = _subset_terms(u)
    upper = min([1.0] + [c * p for _, c, p, _ in terms])
    n = len(u.pmfs)
    conditions = all(const for J, _, _, const in terms if len(J) < n)
    return Bounds(upper, upper * 2.0 ** (-n), conditions)


def lemma3_bounds(instance) -> Bounds:
    """Two-group bound: min{1, L1 P(F1), L2 P(F2), L1 L2 P(E)} with factor 1/4 below."""
    u = _as_union(instance)
    if len(u.pmfs) != 2:
        raise ValidationError("the two-group bound needs exactly two groups", "DIMENSION_MISMATCH")
    return union_bounds(u)


def lemma4_bounds(instance) -> Bounds:
    """(J+1)-group bound with factor 2^-(J+1) below."""
    return union_bounds(_as_union(instance))


def decaen_lower_bound(events, probs) -> float:
    """sum_i P(A_i)^2 / sum_i' P(A_i & A_i') for events given as boolean rows
    over atoms with probabilities ``probs``. Events of probability 0 add 0."""
    ev = np.asarray(events, dtype=bool)
    p = np.asarray(probs, dtype=np.float64)
    if ev.ndim != 2 or ev.shape[1] != p.size:
        raise ValidationError("events must be (M, atoms) matching probs", "SHAPE_MISMATCH")
    pa = ev.astype(np.float64) @ p
    inter = (ev * p).astype(np.float64) @ ev.T.astype(np.float64)
    den = inter.sum(axis=1)
    terms = np.where(pa > 0, pa * pa / np.where(den > 0, den, 1.0), 0.0)
    return math.fsum(terms.tolist())


def union_probability(events, probs) -> float:
    ev = np.asarray(events, dtype=bool)
    return math.fsum(np.asarray(probs, dtype=np.float64)[ev.any(axis=0)].tolist())


def truncated_union_bounds(events, probs):
    """(1/2 min{1, sum P}, min{1, sum P}); the lower end holds for pairwise
    independent events."""
    ev = np.asarray(events, dtype=bool)
    s = math.fsum((ev.astype(np.float64) @ np.asarray(probs, dtype=np.float64)).tolist())
    up = min(1.0, s)
    return 0.5 * up, up


def pairwise_independent_family(prime: int, subsets: Sequence[Sequence[int]], coeffs=None):
    """Events A_a = {a*X + B mod q in S_a} with (X, B) uniform on F_q^2.

    For distinct coefficients a the variables a*X + B are pairwise
    independent and uniform on F_q, so the events are pairwise independent.
    Returns (events over the q^2 atoms, atom probabilities).
    """
    q = int(prime)
    if q < 2 or any(q % d == 0 for d in range(2, int(q**0.5) + 1)):
        raise ValidationError(f"{q} is not prime", "INVALID_OPTION")
    coeffs = list(range(len(subsets))) if coeffs is None else list(coeffs)
    if len(coeffs) != len(subsets) or len(set(c % q for c in coeffs)) != len(coeffs):
        raise ValidationError("need one distinct coefficient mod q per event", "INVALID_OPTION")
    x, b = np.divmod(np.arange(q * q), q)
    events = np.zeros((len(subsets), q * q), dtype=bool)
    for i, (a, s) in enumerate(zip(coeffs, subsets)):
        events[i] = np.isin((a * x + b) % q, np.asarray(list(s), dtype=np.int64))
    return events, np.full(q * q, 1.0 / (q * q))


# --- random instance generators ------------------------------------------------

def random_lemma_instance(rng: np.random.Generator, K=3, max_size=3, max_n=3, max_count=3,
                          density=0.5) -> LemmaInstance:
    """Unstructured instance; the constancy hypotheses usually fail."""
    sizes = tuple(int(rng.integers(1, max_size + 1)) for _ in range(K))
    pmfs = tuple(rng.dirichlet(np.ones(s)) for s in sizes)
    n = int(rng.integers(1, max_n + 1))
    a0 = tuple(rng.random(sizes[0]) < density for _ in range(n))
    a = tuple(tuple(rng.random((sizes[0], sizes[k + 1])) < density for k in range(K - 1))
              for _ in range(n))
    g = tuple(tuple(rng.random(sizes[k + 1]) < density for k in range(K - 1)) for _ in range(n))
    L1 = int(rng.integers(1, max_count + 1))
    L2 = int(rng.integers(1, max_count + 1))
    return LemmaInstance(sizes, pmfs, L1, L2, a0, a, g)


def constancy_lemma_instance(rng: np.random.Generator, K=3, max_blocks=2, max_count=3,
                             max_n=3) -> LemmaInstance:
    """Instance whose conditional hit probabilities are constant on the
    projections, built from a type-like structure.

    V1 is uniform on a blocks x b symbols, each V_k uniform on its own
    blocks x b grid. Every event pairs a V1 block set with the same shift
    rule: (v1, v_k) satisfies A when the within-block offsets agree up to a
    fixed shift. Given any v1 in the projection, exactly one symbol of each
    V_k per block qualifies, so the hit probability is the same everywhere.
    """
    b = int(rng.integers(1, 3))
    blocks = int(rng.integers(1, max_blocks + 1))
    s1 = blocks * b
    sizes = (s1,) + tuple(blocks * b for _ in range(K - 1))
    pmfs = tuple(np.full(s, 1.0 / s) for s in sizes)
    shifts = [int(rng.integers(0, b)) for _ in range(K - 1)]
    n = int(rng.integers(1, max_n + 1))
    chosen = rng.random((n, blocks)) < 0.6
    chosen[:, 0] |= ~chosen.any(axis=1)
    a0, a, g = [], [], []
    # one partner block set per event, shared by every l so per-v1 counts agree
    partner = rng.permutation(blocks)
    for l in range(n):
        mask0 = np.repeat(chosen[l], b)
        a0.append(mask0)
        al, gl = [], []
        for k in range(K - 1):
            m = np.zeros((s1, sizes[k + 1]), dtype=bool)
            for blk in range(blocks):
                if not chosen[l, blk]:
                    continue
                pb = partner[blk]
                for off in range(b):
                    m[blk * b + off, pb * b + (off + shifts[k]) % b] = True
            al.append(m)
            gl.append(np.ones(sizes[k + 1], dtype=bool))
        a.append(tuple(al))
        g.append(tuple(gl))
    L1 = int(rng.integers(1, max_count + 1))
    L2 = int(rng.integers(1, max_count + 1))
    return LemmaInstance(sizes, pmfs, L1, L2, tuple(a0), tuple(a), tuple(g))


def random_union_instance(rng: np.random.Generator, groups=3, max_size=3, max_count=2,
                          density=0.4) -> UnionInstance:
    sizes = tuple(int(rng.integers(1, max_size + 1)) for _ in range(groups))
    pmfs = tuple(rng.dirichlet(np.ones(s)) for s in sizes)
    counts = tuple(int(rng.integers(1, max_count + 1)) for _ in range(groups))
    return UnionInstance(pmfs, counts, rng.random(sizes) < density)


def constancy_union_instance(rng: np.random.Generator, groups=3, max_size=3, max_count=2):
    """Event T = product of per-group symbol sets: P(T | U_J) is then constant
    on the projection for every J."""
    sizes = tuple(int(rng.integers(1, max_size + 1)) for _ in range(groups))
    pmfs = tuple(rng.dirichlet(np.ones(s)) for s in sizes)
    counts = tuple(int(rng.integers(1, max_count + 1)) for _ in range(groups))
    t = np.ones((), dtype=bool)
    for s in sizes:
        sel = rng.random(s) < 0.5
        t = np.multiply.outer(t, sel)
    return UnionInstance(pmfs, counts, t)


def monte_carlo_union(instance, rng: np.random.Generator, trials: int) -> float:
    """Plain simulation estimate of the union probability (cross-check only)."""
    u = _as_union(instance)
    hits = 0
    for _ in range(trials):
        present = []
        for p, c in zip(u.pmfs, u.counts):
            sel = np.zeros(p.size, dtype=bool)
            sel[rng.choice(p.size, size=c, p=p)] = True
            present.append(sel)
        sub = u.table
        for g, sel in enumerate(present):
            sub = np.compress(sel, sub, axis=g)
        hits += bool(sub.any())
    return hits / trials
