"""Likelihood kernels for the codebook simulators.

Codebooks are given as symbol sequences: ``a_seq[i, t]`` is the decoded
super-symbol of message tuple i at time t and ``b_seq[j, t]`` the averaged
(interfering) symbol of codeword j. ``w[a, b, y]`` is the per-letter channel.
Message tuple 0 with interfering codeword 0 is the one sent.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _lik_over_y(a_row, b_row, w, ny, n, out):
    """out[y] = prod_t w[a_t, b_t, y_t] for all y in Y^n (y_0 most significant)."""
    out[0] = 1.0
    size = 1
    for t in range(n):
        at = a_row[t]
        bt = b_row[t]
        # expand in place from the back so earlier entries stay readable
        for idx in range(size - 1, -1, -1):
            base = out[idx]
            for y in range(ny - 1, -1, -1):
                out[idx * ny + y] = base * w[at, bt, y]
        size *= ny


@njit(cache=True, nogil=True)
def error_prob_exact(a_seq, b_seq, w, tie_tol):
    """Conditional error probability given the codebooks, every y^n enumerated.

    The decoder picks the tuple maximising sum_j W^n(y | a_i, b_j); a rival
    whose score reaches the true score (up to ``tie_tol`` relative) counts as
    an error. Returns (probability, 1 if some positive-probability y ties).
    """
    n_a, n = a_seq.shape
    n_b = b_seq.shape[0]
    ny = w.shape[2]
    ncell = ny**n
    scores = np.zeros((n_a, ncell))
    tmp = np.empty(ncell)
    for i in range(n_a):
        for j in range(n_b):
            _lik_over_y(a_seq[i], b_seq[j], w, ny, n, tmp)
            for y in range(ncell):
                scores[i, y] += tmp[y]
    _lik_over_y(a_seq[0], b_seq[0], w, ny, n, tmp)
    perr = 0.0
    tie = 0
    for y in range(ncell):
        py = tmp[y]
        if py <= 0.0:
            continue
        s0 = scores[0, y]
        best = -1.0
        for i in range(1, n_a):
            if scores[i, y] > best:
                best = scores[i, y]
        if best >= s0 * (1.0 - tie_tol):
            perr += py
            if best <= s0 * (1.0 + tie_tol):
                tie = 1
    return perr, tie


@njit(cache=True, nogil=True)
def error_indicator(a_seq, b_seq, w, y, tie_tol):
    """Same decision for one received sequence y. Returns (error, tie)."""
    n_a, n = a_seq.shape
    n_b = b_seq.shape[0]
    s0 = 0.0
    best = -1.0
    for i in range(n_a):
        s = 0.0
        for j in range(n_b):
            p = 1.0
            for t in range(n):
                p *= w[a_seq[i, t], b_seq[j, t], y[t]]
            s += p
        if i == 0:
            s0 = s
        elif s > best:
            best = s
    if best >= s0 * (1.0 - tie_tol):
        return 1, 1 if best <= s0 * (1.0 + tie_tol) else 0
    return 0, 0


@njit(cache=True, nogil=True)
def log_interference_sum(a_row, b_seq, w, y):
    """ln sum_j W^n(y | a, b_j) over the rows of b_seq (-inf if all vanish)."""
    n_b, n = b_seq.shape
    tot = 0.0
    for j in range(n_b):
        p = 1.0
        for t in range(n):
            p *= w[a_row[t], b_seq[j, t], y[t]]
        tot += p
    return np.log(tot) if tot > 0.0 else -np.inf
