"""Compiled inner loops shared by the exponent engine and its tests.

Every information quantity on a flattened joint goes through the scalar
functions here, so two code paths that build the same joint array get the
same float back.
"""

import numpy as np
from numba import njit

NEG_INF = -np.inf
POS_INF = np.inf


@njit(cache=True, nogil=True)
def f_flat(q, logw):
    """E_q log W with 0*log0 = 0; -inf as soon as q charges a zero of W."""
    acc = 0.0
    for i in range(q.shape[0]):
        if q[i] > 0.0:
            lw = logw[i]
            if lw == NEG_INF:
                return NEG_INF
            acc += q[i] * lw
    return acc


@njit(cache=True, nogil=True)
def entropy_flat(q):
    acc = 0.0
    for i in range(q.shape[0]):
        if q[i] > 0.0:
            acc -= q[i] * np.log(q[i])
    return max(acc, 0.0)


@njit(cache=True, nogil=True)
def kl_flat(q, p):
    acc = 0.0
    for i in range(q.shape[0]):
        if q[i] > 0.0:
            if p[i] <= 0.0:
                return POS_INF
            acc += q[i] * np.log(q[i] / p[i])
    return max(acc, 0.0)


@njit(cache=True, nogil=True)
def cmi_flat(q, la, lb, lc, na, nb, nc):
    """I(A;B|C) for a flat joint whose cells carry group labels la, lb, lc."""
    qac = np.zeros(na * nc)
    qbc = np.zeros(nb * nc)
    qc = np.zeros(nc)
    for i in range(q.shape[0]):
        v = q[i]
        if v > 0.0:
            c = lc[i]
            qac[la[i] * nc + c] += v
            qbc[lb[i] * nc + c] += v
            qc[c] += v
    acc = 0.0
    for i in range(q.shape[0]):
        v = q[i]
        if v > 0.0:
            c = lc[i]
            acc += v * np.log(v * qc[c] / (qac[la[i] * nc + c] * qbc[lb[i] * nc + c]))
    return max(acc, 0.0)


@njit(cache=True, nogil=True)
def f_rows(qs, logw):
    out = np.empty(qs.shape[0])
    for r in range(qs.shape[0]):
        out[r] = f_flat(qs[r], logw)
    return out


@njit(cache=True, nogil=True)
def kl_rows(qs, p):
    out = np.empty(qs.shape[0])
    for r in range(qs.shape[0]):
        out[r] = kl_flat(qs[r], p)
    return out


@njit(cache=True, nogil=True)
def cmi_rows(qs, la, lb, lc, na, nb, nc):
    out = np.empty(qs.shape[0])
    for r in range(qs.shape[0]):
        out[r] = cmi_flat(qs[r], la, lb, lc, na, nb, nc)
    return out


@njit(cache=True, nogil=True)
def _count_family(mass, n_grid):
    total = 1
    for j in range(mass.shape[0]):
        if mass[j] > 0.0:
            total *= n_grid
    return total


@njit(cache=True, nogil=True)
def enumerate_family(mass, grid, idx, n_cells, elab, pe, tol):
    """All joints mass[j] * c_j(t) with each c_j a grid pmf, in lexicographic
    order of the per-column grid indices (column 0 most significant).

    Columns with zero mass carry the uniform pmf. If ``pe`` is non-empty, only
    joints whose marginal on the ``elab`` labels is within ``tol`` of ``pe``
    (max-norm) are kept.
    """
    ncol = mass.shape[0]
    n_grid = grid.shape[0]
    kt = grid.shape[1]
    ne = pe.shape[0]
    total = _count_family(mass, n_grid)
    out = np.empty((total, n_cells))
    digits = np.zeros(ncol, dtype=np.int64)
    live = np.zeros(ncol, dtype=np.bool_)
    for j in range(ncol):
        live[j] = mass[j] > 0.0
    unif = 1.0 / kt
    em = np.zeros(max(ne, 1))
    count = 0
    for _ in range(total):
        row = out[count]
        for j in range(ncol):
            if live[j]:
                g = digits[j]
                for t in range(kt):
                    row[idx[j, t]] = mass[j] * grid[g, t]
            else:
                for t in range(kt):
                    row[idx[j, t]] = mass[j] * unif
        ok = True
        if ne > 0:
            for e in range(ne):
                em[e] = 0.0
            for i in range(n_cells):
                em[elab[i]] += row[i]
            for e in range(ne):
                if abs(em[e] - pe[e]) > tol:
                    ok = False
                    break
        if ok:
            count += 1
        # advance the mixed-radix counter, last live column fastest
        j = ncol - 1
        while j >= 0:
            if live[j]:
                digits[j] += 1
                if digits[j] < n_grid:
                    break
                digits[j] = 0
            j -= 1
    return out[:count]


@njit(cache=True, nogil=True)
def pareto_front(f, info):
    """Indices of points not dominated under (maximise f, minimise info),
    ordered by f descending; ties in both keep the earliest point."""
    o1 = np.argsort(info, kind="mergesort")
    o2 = np.argsort(-f[o1], kind="mergesort")
    order = o1[o2]
    keep = np.empty(order.shape[0], dtype=np.int64)
    n = 0
    best = POS_INF
    for k in range(order.shape[0]):
        i = order[k]
        if info[i] < best:
            keep[n] = i
            n += 1
            best = info[i]
    return keep[:n]


@njit(cache=True, nogil=True)
def cloud_points(anchor, grid, idx, n_cells, elab, pe, tol, logw, la, lb, pk):
    """Candidate joints of one cloud with their (f, I) values.

    Row 0 is the product of the anchor with ``pk`` (information exactly 0);
    the remaining rows are the grid family.
    """
    fam = enumerate_family(anchor, grid, idx, n_cells, elab, pe, tol)
    n = fam.shape[0] + 1
    joints = np.empty((n, n_cells))
    kt = pk.shape[0]
    for j in range(anchor.shape[0]):
        for t in range(kt):
            joints[0, idx[j, t]] = anchor[j] * pk[t]
    joints[1:] = fam
    fv = np.empty(n)
    iv = np.empty(n)
    lc = np.zeros(n_cells, dtype=np.int64)
    na = kt
    nb = anchor.shape[0]
    for r in range(n):
        fv[r] = f_flat(joints[r], logw)
        iv[r] = 0.0 if r == 0 else cmi_flat(joints[r], la, lb, lc, na, nb, 1)
    return joints, fv, iv


@njit(cache=True, nogil=True)
def frontiers_batch(anchors, grid, idx, n_cells, elab, pe, tol, logw, la, lb, pk):
    """Pareto frontiers of the clouds at each anchor row, concatenated, plus
    the smallest f of each full cloud."""
    nA = anchors.shape[0]
    off = np.zeros(nA + 1, dtype=np.int64)
    fmin = np.empty(nA)
    cap = max(16, nA * 8)
    bf = np.empty(cap)
    bi = np.empty(cap)
    pos = 0
    for a in range(nA):
        _, fv, iv = cloud_points(anchors[a], grid, idx, n_cells, elab, pe, tol,
                                 logw, la, lb, pk)
        keep = pareto_front(fv, iv)
        fmin[a] = fv.min()
        need = pos + keep.shape[0]
        if need > cap:
            while cap < need:
                cap *= 2
            nbf = np.empty(cap)
            nbi = np.empty(cap)
            nbf[:pos] = bf[:pos]
            nbi[:pos] = bi[:pos]
            bf = nbf
            bi = nbi
        for k in range(keep.shape[0]):
            bf[pos] = fv[keep[k]]
            bi[pos] = iv[keep[k]]
            pos += 1
        off[a + 1] = pos
    return bf[:pos].copy(), bi[:pos].copy(), off, fmin


@njit(cache=True, nogil=True)
def t0_scan(fr_f, fr_i, lo, hi, ef, ei, rk):
    """rk + max{f - I : I <= rk} over frontier[lo:hi] plus one extra point."""
    best = NEG_INF
    for k in range(lo, hi):
        if fr_i[k] <= rk:
            v = fr_f[k] - fr_i[k]
            if v > best:
                best = v
    if ei <= rk:
        v = ef - ei
        if v > best:
            best = v
    if best == NEG_INF:
        return NEG_INF
    return rk + best


@njit(cache=True, nogil=True)
def _e1_point(fh, ih, r, c, rk, proof):
    m = fh if fh > c else c
    slack = rk - ih
    if slack < 0.0:
        slack = 0.0
    if r <= m and m - fh <= slack:
        v = ih - rk
        return v if v > 0.0 else 0.0
    if proof and r > m:
        return 0.0
    return POS_INF


@njit(cache=True, nogil=True)
def e1_scan(fr_f, fr_i, lo, hi, ef, ei, fmin, r, t0, s, rk, proof):
    """Smallest [I - rk]+ over admissible points of a cloud plus one extra.

    A point (fh, ih) is admissible when r <= M and M - fh <= [rk - ih]+,
    with M = max(fh, t0, s). With ``proof`` set, points with r > M are also
    admissible at zero cost; that test bounds f from above, so it is decided
    with the unpruned cloud minimum ``fmin`` instead of the frontier.
    """
    c = t0 if t0 > s else s
    if proof and r > c and r > fmin:
        return 0.0
    best = _e1_point(ef, ei, r, c, rk, False)
    if best == 0.0:
        return best
    for k in range(lo, hi):
        v = _e1_point(fr_f[k], fr_i[k], r, c, rk, False)
        if v < best:
            best = v
            if best == 0.0:
                break
    return best


@njit(cache=True, nogil=True)
def eval_outer(q, s, ikq, aidq, t0aid, fr_f, fr_i, fr_off, fr_fmin, tf_f, tf_i, tf_off,
               cls, cls_off, qt_r, qt_ik, qt_aid, qt_mi, self_mi, nu, rs, rk, proof, hats):
    """Inner value at outer point q: min over patterns of the pattern value.

    ``hats`` (n_pat, 8) receives the per-family minima (last column: the
    term without an information charge). Returns (value, t0).
    """
    sq = s[q]
    ta = t0aid[q]
    t0 = t0_scan(tf_f, tf_i, tf_off[ta], tf_off[ta + 1], sq, ikq[q], rk)
    aq = aidq[q]
    n_pat = cls.shape[0]
    best = POS_INF
    for v in range(n_pat):
        for u in range(8):
            hats[v, u] = POS_INF
        g = cls[v, q]
        n_u = nu[v]
        # the outer point itself belongs to every class it defines
        e1 = e1_scan(fr_f, fr_i, fr_off[aq], fr_off[aq + 1], sq, ikq[q], fr_fmin[aq],
                     sq, t0, sq, rk, proof)
        if e1 < POS_INF:
            hats[v, 7] = e1
            for u in range(n_u):
                val = self_mi[v, q, u] + e1
                if val < hats[v, u]:
                    hats[v, u] = val
        for k in range(cls_off[g], cls_off[g + 1]):
            a = qt_aid[k]
            e1 = e1_scan(fr_f, fr_i, fr_off[a], fr_off[a + 1], qt_r[k], qt_ik[k],
                         fr_fmin[a], qt_r[k], t0, sq, rk, proof)
            if e1 < POS_INF:
                if e1 < hats[v, 7]:
                    hats[v, 7] = e1
                for u in range(n_u):
                    val = qt_mi[k, u] + e1
                    if val < hats[v, u]:
                        hats[v, u] = val
        ev = hats[v, 7]
        for u in range(n_u):
            d = hats[v, u] - rs[v, u]
            if d > ev:
                ev = d
        if ev < best:
            best = ev
    return best, t0


@njit(cache=True, nogil=True)
def _lex_less(a, b):
    for i in range(a.shape[0]):
        if a[i] < b[i]:
            return True
        if a[i] > b[i]:
            return False
    return False


@njit(cache=True, nogil=True)
def outer_min(order, dvals, joints, s, ikq, aidq, t0aid, fr_f, fr_i, fr_off, fr_fmin,
              tf_f, tf_i, tf_off, cls, cls_off, qt_r, qt_ik, qt_aid, qt_mi, self_mi,
              nu, rs, rk, proof):
    """min_q D(q) + inner(q), scanning q by increasing D and stopping once D
    alone exceeds the incumbent. Exact ties go to the lexicographically
    smallest joint."""
    n_pat = cls.shape[0]
    hats = np.empty((max(n_pat, 1), 8))
    best = POS_INF
    arg = -1
    for k in range(order.shape[0]):
        q = order[k]
        if dvals[q] > best:
            break
        inner, _ = eval_outer(q, s, ikq, aidq, t0aid, fr_f, fr_i, fr_off, fr_fmin,
                              tf_f, tf_i, tf_off, cls, cls_off, qt_r, qt_ik, qt_aid,
                              qt_mi, self_mi, nu, rs, rk, proof, hats)
        tot = dvals[q] + inner
        if arg < 0 or tot < best or (tot == best and _lex_less(joints[q], joints[arg])):
            best = tot
            arg = q
    return best, arg
