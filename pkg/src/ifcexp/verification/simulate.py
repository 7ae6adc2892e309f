"""Monte Carlo estimates of the random-coding error probability of receiver 1.

Seeding discipline: trial t uses its own Philox stream with key = master
seed and counter = (0, 0, 0, t). Streams never overlap, so the estimate does
not depend on how trials are split across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..channels import Dmc2User, MarginalChannel, VirtualChannel, marginal_channel
from ..errors import ComputeGuardError, ValidationError
from ..infomeasures import to_pmf
from ..ordinary import RatePair
from . import _simkernels as SK

EXACT_Y_LIMIT = 2**20
MAX_WORK = 2**28
TIE_TOL = 1e-12
MASK64 = (1 << 64) - 1


@dataclass
class SimReport:
    n: int
    trials: int
    p_error: float
    ci: tuple
    ties: int
    seed: int
    mode: str
    messages: tuple
    compositions: tuple = field(default_factory=tuple)

    @property
    def exponent_estimate(self):
        """-(1/n) ln P_e (inf when no error was seen)."""
        return -math.log(self.p_error) / self.n if self.p_error > 0 else math.inf


def wilson_interval(p_hat: float, trials: int, z: float = 1.959963984540054):
    if trials <= 0:
        return (0.0, 1.0)
    den = 1.0 + z * z / trials
    centre = (p_hat + z * z / (2 * trials)) / den
    half = z * math.sqrt(p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if p_hat <= 0 else max(0.0, centre - half)
    hi = 1.0 if p_hat >= 1 else min(1.0, centre + half)
    return (lo, hi)


def composition(pmf, n: int) -> np.ndarray:
    """Symbol counts summing to n closest to n*pmf in total variation
    (largest remainders, ties to the lower symbol)."""
    p = to_pmf(pmf)
    target = n * p
    counts = np.floor(target).astype(np.int64)
    short = n - int(counts.sum())
    order = sorted(range(p.size), key=lambda i: (-(target[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def message_count(rate: float, n: int) -> int:
    return max(1, math.ceil(math.exp(n * rate) - 1e-12))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & MASK64, counter=[0, 0, 0, trial]))


def _codebook(rng, comp, m):
    base = np.repeat(np.arange(comp.size), comp)
    keys = rng.random((m, base.size))
    return base[np.argsort(keys, axis=1, kind="stable")]


def _run_trials(trial_fn, trials, threads):
    threads = max(1, int(threads))
    chunks = np.array_split(np.arange(trials), threads)

    def work(idx):
        return [trial_fn(int(t)) for t in idx]

    if threads == 1:
        return work(chunks[0])
    with ThreadPoolExecutor(threads) as ex:
        parts = list(ex.map(work, chunks))
    return [r for part in parts for r in part]


def _simulate(w, decoded_comps, averaged_comp, counts, n, trials, seed, threads, y_mode):
    """Shared driver: ``decoded_comps``/``counts[:-1]`` describe the decoded
    codebooks, the last entry the averaged one."""
    if n < 1 or trials < 1:
        raise ValidationError("n and trials must be positive", "INVALID_OPTION")
    ny = w.shape[-1]
    n_a = math.prod(counts[:-1])
    n_b = counts[-1]
    exact = ny**n <= EXACT_Y_LIMIT if y_mode == "auto" else y_mode == "exact"
    work = n_a * n_b * (ny**n if exact else n)
    if work > MAX_WORK:
        raise ComputeGuardError(f"{work} likelihood terms per trial exceed {MAX_WORK}",
                                "GUARD_EXCEEDED")
    sizes = [c.size for c in decoded_comps]
    wa = np.ascontiguousarray(w.reshape(math.prod(sizes), averaged_comp.size, ny))

    def one(t):
        rng = trial_rng(seed, t)
        books = [_codebook(rng, c, m) for c, m in zip(decoded_comps, counts[:-1])]
        b_seq = _codebook(rng, averaged_comp, n_b)
        # every tuple of decoded messages, tuple 0 = all zeros (the one sent)
        grids = np.meshgrid(*[np.arange(m) for m in counts[:-1]], indexing="ij")
        sym = np.zeros((n_a, n), dtype=np.int64)
        for g, book, sz in zip(grids, books, sizes):
            sym = sym * sz + book[g.ravel()]
        if n_a == 1:
            return 0.0, 0
        if exact:
            return SK.error_prob_exact(sym, b_seq, wa, TIE_TOL)
        py = wa[sym[0], b_seq[0]]
        y = (rng.random((n, 1)) > np.cumsum(py, axis=1)).sum(axis=1)
        y = np.minimum(y, ny - 1).astype(np.int64)
        err, tie = SK.error_indicator(sym, b_seq, wa, y, TIE_TOL)
        return float(err), int(tie)

    res = _run_trials(one, trials, threads)
    p_hat = math.fsum(r[0] for r in res) / trials
    ties = sum(int(r[1]) for r in res)
    return p_hat, wilson_interval(p_hat, trials), ties, "exact-y" if exact else "sampled-y"


def _ordinary_table(dmc):
    if isinstance(dmc, Dmc2User):
        return marginal_channel(dmc, 1).table
    t = np.asarray(getattr(dmc, "table", dmc), dtype=np.float64)
    if t.ndim != 3:
        raise ValidationError("expected a two-input channel", "SHAPE_MISMATCH")
    return t


def simulate_ordinary(dmc, p_x1, p_x2, rates: RatePair, n: int, trials: int, seed: int,
                      threads: int = 1, y_mode: str = "auto") -> SimReport:
    """Fixed-composition codebooks for both users, optimal receiver-1 decoder
    (sum over the interfering codebook), ties counted as errors."""
    w = _ordinary_table(dmc)
    c1, c2 = composition(p_x1, n), composition(p_x2, n)
    if (c1.size, c2.size) != w.shape[:2]:
        raise ValidationError("input pmfs do not match the channel", "SHAPE_MISMATCH")
    m1, m2 = message_count(rates.R1, n), message_count(rates.R2, n)
    p_hat, ci, ties, mode = _simulate(w, [c1], c2, (m1, m2), n, trials, seed, threads, y_mode)
    return SimReport(n, trials, p_hat, ci, ties, seed, mode, (m1, m2),
                     (tuple(c1.tolist()), tuple(c2.tolist())))


def simulate_hk(vch, p_z, rates, n: int, trials: int, seed: int, threads: int = 1,
                y_mode: str = "auto") -> SimReport:
    """Four fixed-composition codebooks; the decoder maximises the likelihood
    averaged over the Z22 codebook jointly over (m11, m12, m21)."""
    t = np.asarray(getattr(vch, "table", vch), dtype=np.float64)
    if t.ndim != 5 or len(p_z) != 4:
        raise ValidationError("expected a four-input virtual channel", "SHAPE_MISMATCH")
    comps = [composition(p, n) for p in p_z]
    if tuple(c.size for c in comps) != t.shape[:4]:
        raise ValidationError("input pmfs do not match the virtual channel", "SHAPE_MISMATCH")
    counts = tuple(message_count(r, n) for r in (rates.R11, rates.R12, rates.R21, rates.R22))
    p_hat, ci, ties, mode = _simulate(t, comps[:3], comps[3], counts, n, trials, seed, threads,
                                      y_mode)
    return SimReport(n, trials, p_hat, ci, ties, seed, mode, counts,
                     tuple(tuple(c.tolist()) for c in comps))


# --- distance-enumerator threshold ----------------------------------------------

@dataclass
class EnumeratorStats:
    n: int
    trials: int
    m2: int
    q_x1y: np.ndarray
    log_sums: np.ndarray
    counts: dict
    t_grid: np.ndarray
    tail: np.ndarray
    threshold: float
    t0: float
    p_at_threshold: float
    seed: int

    @property
    def gap(self):
        return abs(self.threshold - self.t0)


def reference_pair(p_x1, w, p_x2, n):
    """Sequences (x1, y) whose joint type is the n-type nearest to the
    typical one: x1 has the fixed composition and each x1-row of y is
    rounded separately."""
    w = np.asarray(w, dtype=np.float64)
    c1 = composition(p_x1, n)
    avg = np.einsum("b,aby->ay", to_pmf(p_x2), w)
    x1, y = [], []
    for a, cnt in enumerate(c1):
        if cnt == 0:
            continue
        cy = composition(avg[a], int(cnt))
        x1 += [a] * int(cnt)
        for yy, k in enumerate(cy):
            y += [yy] * int(k)
    x1 = np.array(x1, dtype=np.int64)
    y = np.array(y, dtype=np.int64)
    q = np.zeros((w.shape[0], w.shape[2]))
    np.add.at(q, (x1, y), 1.0 / n)
    return x1, y, q


def enumerator_threshold_check(dmc, p_x1, p_x2, r2: float, n: int, trials: int, seed: int,
                               grid=None, t_points: int = 201, threads: int = 1) -> EnumeratorStats:
    """Law of (1/n) ln sum_{j>=1} W^n(y | x1, X2_j) over fresh interfering codebooks.

    The sum is sum over types Q of N2(Q) e^{n f(Q)}, so its exponent has the
    same threshold as the distance enumerators. ``threshold`` is the point
    where the empirical P{(1/n) ln sum >= t} crosses 1/2; ``t0`` is the
    analytic value at the joint type of (x1, y).
    """
    from ..ordinary import t_zero
    from ..infomeasures import JointDist
    from ..simplexopt import GridSpec, build_fi_cloud

    w = _ordinary_table(dmc)
    grid = GridSpec(6) if grid is None else grid
    c2 = composition(p_x2, n)
    m2 = message_count(r2, n)
    if m2 < 2:
        raise ValidationError("need at least one interfering codeword besides the sent one",
                              "INVALID_RATE")
    work = (m2 - 1) * n * trials
    if work > 50 * MAX_WORK:
        raise ComputeGuardError(f"{work} likelihood terms exceed the guard", "GUARD_EXCEEDED")
    x1, y, q = reference_pair(p_x1, w, p_x2, n)
    wt = np.ascontiguousarray(w)

    def one(t):
        rng = trial_rng(seed, t)
        b = _codebook(rng, c2, m2 - 1)
        ls = SK.log_interference_sum(x1, b, wt, y) / n
        # joint types of (x1, x2_j, y): the distance enumerators N2(Q)
        codes = (x1[None, :] * w.shape[1] + b) * w.shape[2] + y[None, :]
        hist = np.apply_along_axis(np.bincount, 1, codes, minlength=w.size)
        keys, cnt = np.unique(hist, axis=0, return_counts=True)
        return ls, [(tuple(k.tolist()), int(c)) for k, c in zip(keys, cnt)]

    res = _run_trials(one, trials, threads)
    log_sums = np.array([r[0] for r in res])
    counts = {}
    for _, per in res:
        for key, c in per:
            counts.setdefault(key, []).append(c)
    finite = log_sums[np.isfinite(log_sums)]
    lo = float(finite.min()) - 0.1 if finite.size else -1.0
    hi = float(finite.max()) + 0.1 if finite.size else 0.0
    t_grid = np.linspace(lo, hi, t_points)
    tail = (log_sums[None, :] >= t_grid[:, None]).mean(axis=1)
    threshold = float(np.median(log_sums))
    cloud = build_fi_cloud(JointDist(q), p_x2, w, grid, k_axis=1)
    t0 = t_zero(cloud, r2)
    p_at = float((log_sums >= t0 - 0.1).mean())
    return EnumeratorStats(n, trials, m2, q, log_sums, counts, t_grid, tail, threshold, t0, p_at,
                           seed)
