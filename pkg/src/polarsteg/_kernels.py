"""Compiled cores for SC/SCL path search and channel-alphabet merging.

Everything here operates on flat pre-shaped arrays so numba can compile it
once and the callers in codec.py / construction.py stay plain numpy.

Buffer geometry: layer ``lam`` of the butterfly has blocks of length
``N >> lam`` (lam = 0 is the channel side, lam = n the decision side).  With
channel LLRs loaded in natural position order and adjacent-pair combines,
leaf ``phi`` is exactly the phi-th subchannel of the bit-reversed generator,
so no index permutation appears anywhere in the decoders.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Natural-log clamp for channel LLR magnitudes; ln((1-p)/p) only exceeds
# this for p < 4.3e-18, so the clamp is in effect the p=0 sentinel.
LLR_CLAMP = 40.0

# log1p(exp(-x)) is below double-precision noise relative to x beyond this.
_CUT = 36.0


@njit(cache=True, inline="always")
def _softplus(x):
    if x > _CUT:
        return x
    if x < -_CUT:
        return np.exp(x)
    return np.log1p(np.exp(x))


@njit(cache=True, inline="always")
def _f_exact(a, b):
    # exact check-node LLR: ln((1 + e^(a+b)) / (e^a + e^b))
    m = min(abs(a), abs(b))
    if (a < 0.0) != (b < 0.0):
        m = -m
    r = m
    sa = abs(a + b)
    if sa < _CUT:
        r += np.log1p(np.exp(-sa))
    da = abs(a - b)
    if da < _CUT:
        r -= np.log1p(np.exp(-da))
    return r


# ---------------------------------------------------------------------------
# single-path successive cancellation
# ---------------------------------------------------------------------------

MODE_MAP = 0
MODE_RANDOMIZED = 1
MODE_GENIE = 2


@njit(cache=True, nogil=True)
def sc_single(llr_ch, known_mask, known_vals, mode, rr_u, err_out, P, C):
    """One SC pass over workspaces P (2N-1 float64) and C ((2N-1)*2 uint8).

    mode 0: positions with known_mask set are forced to known_vals, the rest
            take the sign decision.
    mode 1: as mode 0 but free decisions are sampled Ber(1/(1+e^L)) using the
            uniforms in rr_u.
    mode 2: genie run; every decision is compared against known_vals and then
            forced to it, mismatches accumulate into err_out.

    Returns the accumulated path metric.  The codeword of the decided input
    ends up in C at the channel layer, plane 0 (elements C[2*i], i < N).
    """
    N = llr_ch.shape[0]
    n = 0
    t = N
    while t > 1:
        n += 1
        t >>= 1
    for i in range(N):
        P[i] = llr_ch[i]
    pm = 0.0
    for phi in range(N):
        if phi == 0:
            lo = 1
        else:
            tz = 0
            t = phi
            while t & 1 == 0:
                tz += 1
                t >>= 1
            lo = n - tz
        for lam in range(lo, n + 1):
            llen = N >> lam
            offp = 2 * N - 2 * (N >> (lam - 1))
            offc = 2 * N - 2 * llen
            if (phi >> (n - lam)) & 1 == 0:
                for i in range(llen):
                    P[offc + i] = _f_exact(P[offp + 2 * i], P[offp + 2 * i + 1])
            else:
                for i in range(llen):
                    a = P[offp + 2 * i]
                    b = P[offp + 2 * i + 1]
                    if C[(offc + i) * 2] == 1:
                        P[offc + i] = b - a
                    else:
                        P[offc + i] = b + a
        Lf = P[2 * N - 2]
        if mode == MODE_GENIE:
            hard = 0 if Lf >= 0.0 else 1
            ub = known_vals[phi]
            if hard != ub:
                err_out[phi] += 1
        elif known_mask[phi] == 1:
            ub = known_vals[phi]
        elif mode == MODE_RANDOMIZED:
            if Lf >= 0.0:
                e = np.exp(-Lf)
                p1 = e / (1.0 + e)
            else:
                p1 = 1.0 / (1.0 + np.exp(Lf))
            ub = 1 if rr_u[phi] < p1 else 0
        else:
            ub = 0 if Lf >= 0.0 else 1
        pm += _softplus(Lf if ub == 1 else -Lf)
        C[(2 * N - 2) * 2 + (phi & 1)] = ub
        if phi & 1 == 1:
            lam = n
            p = phi
            while True:
                psi = p >> 1
                llen = N >> lam
                offc = 2 * N - 2 * llen
                offq = 2 * N - 2 * (N >> (lam - 1))
                pl = psi & 1
                for i in range(llen):
                    a = C[(offc + i) * 2]
                    b = C[(offc + i) * 2 + 1]
                    C[(offq + 2 * i) * 2 + pl] = a ^ b
                    C[(offq + 2 * i + 1) * 2 + pl] = b
                if pl == 0:
                    break
                lam -= 1
                p = psi
    return pm


@njit(cache=True, nogil=True)
def mc_genie_chunk(u_chunk, y_chunk, llr_mag, err_out):
    """Genie-aided SC over a batch of (true input, noisy codeword) rows,
    accumulating per-position first-error counts into err_out."""
    B, N = u_chunk.shape
    P = np.empty(2 * N - 1, np.float64)
    C = np.zeros((2 * N - 1) * 2, np.uint8)
    llr = np.empty(N, np.float64)
    mask = np.zeros(N, np.uint8)
    rr = np.zeros(1, np.float64)
    for tr in range(B):
        for i in range(N):
            llr[i] = llr_mag[i] * (1.0 - 2.0 * y_chunk[tr, i])
        sc_single(llr, mask, u_chunk[tr], MODE_GENIE, rr, err_out, P, C)


# ---------------------------------------------------------------------------
# list decoding with lazily copied layer buffers
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _cow(lam, l, path_buf, refcnt, free_buf, free_buf_n, P, C, off, N):
    """Make path l's buffer at layer lam private, copying if shared."""
    b = path_buf[lam, l]
    if refcnt[lam, b] == 1:
        return b
    refcnt[lam, b] -= 1
    nb = free_buf[lam, free_buf_n[lam] - 1]
    free_buf_n[lam] -= 1
    llen = N >> lam
    src = off[lam] + b * llen
    dst = off[lam] + nb * llen
    for i in range(llen):
        P[dst + i] = P[src + i]
        C[(dst + i) * 2] = C[(src + i) * 2]
        C[(dst + i) * 2 + 1] = C[(src + i) * 2 + 1]
    path_buf[lam, l] = nb
    refcnt[lam, nb] = 1
    return nb


@njit(cache=True, nogil=True)
def scl_run(llr_ch, frozen_mask, frozen_vals, L, x_out):
    """List decode; returns the winning metric, fills x_out with the winning
    codeword.  Ties in the final selection go to the lowest path index; list
    pruning is stable in (metric, path, bit-0-first) order."""
    N = llr_ch.shape[0]
    n = 0
    t = N
    while t > 1:
        n += 1
        t >>= 1

    off = np.empty(n + 2, np.int64)
    off[0] = 0
    for lam in range(n + 1):
        off[lam + 1] = off[lam] + L * (N >> lam)
    P = np.empty(off[n + 1], np.float64)
    C = np.zeros(off[n + 1] * 2, np.uint8)
    path_buf = np.full((n + 1, L), -1, np.int32)
    refcnt = np.zeros((n + 1, L), np.int32)
    free_buf = np.empty((n + 1, L), np.int32)
    free_buf_n = np.empty(n + 1, np.int32)
    for lam in range(n + 1):
        for b in range(L):
            free_buf[lam, b] = L - 1 - b
        free_buf_n[lam] = L
    active = np.zeros(L, np.uint8)
    free_path = np.empty(L, np.int32)
    for l in range(L):
        free_path[l] = L - 1 - l
    free_path_n = L
    pm = np.full(L, np.inf)

    # seed path 0
    l0 = free_path[free_path_n - 1]
    free_path_n -= 1
    active[l0] = 1
    pm[l0] = 0.0
    for lam in range(n + 1):
        b = free_buf[lam, free_buf_n[lam] - 1]
        free_buf_n[lam] -= 1
        path_buf[lam, l0] = b
        refcnt[lam, b] = 1
    base = off[0] + path_buf[0, l0] * N
    for i in range(N):
        P[base + i] = llr_ch[i]

    keep0 = np.zeros(L, np.uint8)
    keep1 = np.zeros(L, np.uint8)
    was = np.zeros(L, np.uint8)
    cand = np.empty(2 * L, np.float64)
    order = np.empty(2 * L, np.int32)

    for phi in range(N):
        if phi == 0:
            lo = 1
        else:
            tz = 0
            t = phi
            while t & 1 == 0:
                tz += 1
                t >>= 1
            lo = n - tz
        for lam in range(lo, n + 1):
            llen = N >> lam
            phase = (phi >> (n - lam)) & 1
            for l in range(L):
                if active[l] == 0:
                    continue
                wb = _cow(lam, l, path_buf, refcnt, free_buf, free_buf_n, P, C, off, N)
                rb = path_buf[lam - 1, l]
                srcp = off[lam - 1] + rb * (llen * 2)
                dstp = off[lam] + wb * llen
                if phase == 0:
                    for i in range(llen):
                        P[dstp + i] = _f_exact(P[srcp + 2 * i], P[srcp + 2 * i + 1])
                else:
                    for i in range(llen):
                        a = P[srcp + 2 * i]
                        b = P[srcp + 2 * i + 1]
                        if C[(dstp + i) * 2] == 1:
                            P[dstp + i] = b - a
                        else:
                            P[dstp + i] = b + a

        if frozen_mask[phi] == 1:
            ub = frozen_vals[phi]
            for l in range(L):
                if active[l] == 0:
                    continue
                wb = path_buf[n, l]
                Lf = P[off[n] + wb]
                pm[l] += _softplus(Lf if ub == 1 else -Lf)
                C[(off[n] + wb) * 2 + (phi & 1)] = ub
        else:
            nact = 0
            for l in range(L):
                if active[l] == 1:
                    nact += 1
                    Lf = P[off[n] + path_buf[n, l]]
                    cand[2 * l] = pm[l] + _softplus(-Lf)
                    cand[2 * l + 1] = pm[l] + _softplus(Lf)
                else:
                    cand[2 * l] = np.inf
                    cand[2 * l + 1] = np.inf
            rho = 2 * nact
            if rho > L:
                rho = L
            for k in range(2 * L):
                order[k] = k
            for k in range(1, 2 * L):
                ki = order[k]
                kv = cand[ki]
                j = k - 1
                while j >= 0 and cand[order[j]] > kv:
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = ki
            for l in range(L):
                keep0[l] = 0
                keep1[l] = 0
                was[l] = active[l]
            for k in range(rho):
                c = order[k]
                if c & 1:
                    keep1[c >> 1] = 1
                else:
                    keep0[c >> 1] = 1
            # retire losers first so clone slots are free
            for l in range(L):
                if was[l] == 1 and keep0[l] == 0 and keep1[l] == 0:
                    active[l] = 0
                    pm[l] = np.inf
                    free_path[free_path_n] = l
                    free_path_n += 1
                    for lam in range(n + 1):
                        b = path_buf[lam, l]
                        refcnt[lam, b] -= 1
                        if refcnt[lam, b] == 0:
                            free_buf[lam, free_buf_n[lam]] = b
                            free_buf_n[lam] += 1
                        path_buf[lam, l] = -1
            for l in range(L):
                if was[l] == 0:
                    continue
                if keep0[l] == 1 and keep1[l] == 1:
                    l2 = free_path[free_path_n - 1]
                    free_path_n -= 1
                    active[l2] = 1
                    for lam in range(n + 1):
                        b = path_buf[lam, l]
                        path_buf[lam, l2] = b
                        refcnt[lam, b] += 1
                    wb = _cow(n, l, path_buf, refcnt, free_buf, free_buf_n, P, C, off, N)
                    C[(off[n] + wb) * 2 + (phi & 1)] = 0
                    pm[l] = cand[2 * l]
                    wb2 = _cow(n, l2, path_buf, refcnt, free_buf, free_buf_n, P, C, off, N)
                    C[(off[n] + wb2) * 2 + (phi & 1)] = 1
                    pm[l2] = cand[2 * l + 1]
                elif keep0[l] == 1:
                    wb = path_buf[n, l]
                    C[(off[n] + wb) * 2 + (phi & 1)] = 0
                    pm[l] = cand[2 * l]
                elif keep1[l] == 1:
                    wb = path_buf[n, l]
                    C[(off[n] + wb) * 2 + (phi & 1)] = 1
                    pm[l] = cand[2 * l + 1]

        if phi & 1 == 1:
            for l in range(L):
                if active[l] == 0:
                    continue
                lam = n
                p = phi
                while True:
                    psi = p >> 1
                    llen = N >> lam
                    rb = path_buf[lam, l]
                    wb = _cow(lam - 1, l, path_buf, refcnt, free_buf, free_buf_n, P, C, off, N)
                    srcb = off[lam] + rb * llen
                    dstb = off[lam - 1] + wb * (llen * 2)
                    pl = psi & 1
                    for i in range(llen):
                        a = C[(srcb + i) * 2]
                        b = C[(srcb + i) * 2 + 1]
                        C[(dstb + 2 * i) * 2 + pl] = a ^ b
                        C[(dstb + 2 * i + 1) * 2 + pl] = b
                    if pl == 0:
                        break
                    lam -= 1
                    p = psi

    best = -1
    bestpm = np.inf
    for l in range(L):
        if active[l] == 1 and pm[l] < bestpm:
            bestpm = pm[l]
            best = l
    rb = off[0] + path_buf[0, best] * N
    for i in range(N):
        x_out[i] = C[(rb + i) * 2]
    return bestpm


# ---------------------------------------------------------------------------
# greedy adjacent-pair alphabet merging (degrading direction)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _sym_cap(a, b):
    s = a + b
    if s <= 0.0:
        return 0.0
    r = 0.0
    if a > 0.0:
        r += a * np.log2(2.0 * a / s)
    if b > 0.0:
        r += b * np.log2(2.0 * b / s)
    return r


@njit(cache=True, inline="always")
def _pair_loss(a, b, i, j):
    return _sym_cap(a[i], b[i]) + _sym_cap(a[j], b[j]) - _sym_cap(a[i] + a[j], b[i] + b[j])


@njit(cache=True, nogil=True)
def degrade_merge(a, b, mu):
    """Merge adjacent symbol pairs (sorted by likelihood ratio) until at most
    mu remain, always taking the pair whose merge loses the least capacity.
    Returns the packed (a', b') arrays, still in likelihood-ratio order."""
    K = a.shape[0]
    if K <= mu:
        return a.copy(), b.copy()
    aw = a.copy()
    bw = b.copy()
    nxt = np.empty(K, np.int64)
    prv = np.empty(K, np.int64)
    stamp = np.zeros(K, np.int64)
    for i in range(K):
        nxt[i] = i + 1
        prv[i] = i - 1
    nxt[K - 1] = -1

    cap = 3 * K + 4
    hval = np.empty(cap, np.float64)
    hidx = np.empty(cap, np.int64)
    hsl = np.empty(cap, np.int64)
    hsr = np.empty(cap, np.int64)
    hn = 0

    for i in range(K - 1):
        v = _pair_loss(aw, bw, i, i + 1)
        # sift-up push of (v, i, stamps)
        hval[hn] = v
        hidx[hn] = i
        hsl[hn] = 0
        hsr[hn] = 0
        k = hn
        hn += 1
        while k > 0:
            par = (k - 1) >> 1
            if hval[par] <= hval[k]:
                break
            hval[par], hval[k] = hval[k], hval[par]
            hidx[par], hidx[k] = hidx[k], hidx[par]
            hsl[par], hsl[k] = hsl[k], hsl[par]
            hsr[par], hsr[k] = hsr[k], hsr[par]
            k = par

    alive = K
    while alive > mu:
        # pop until a fresh pair surfaces
        i = -1
        while hn > 0:
            ci = hidx[0]
            csl = hsl[0]
            csr = hsr[0]
            hn -= 1
            hval[0] = hval[hn]
            hidx[0] = hidx[hn]
            hsl[0] = hsl[hn]
            hsr[0] = hsr[hn]
            k = 0
            while True:
                lc = 2 * k + 1
                rc = lc + 1
                sm = k
                if lc < hn and hval[lc] < hval[sm]:
                    sm = lc
                if rc < hn and hval[rc] < hval[sm]:
                    sm = rc
                if sm == k:
                    break
                hval[sm], hval[k] = hval[k], hval[sm]
                hidx[sm], hidx[k] = hidx[k], hidx[sm]
                hsl[sm], hsl[k] = hsl[k], hsl[sm]
                hsr[sm], hsr[k] = hsr[k], hsr[sm]
                k = sm
            j = nxt[ci]
            if j >= 0 and stamp[ci] == csl and stamp[j] == csr:
                i = ci
                break
        if i < 0:
            break  # unreachable while alive > 1; guards heap exhaustion
        j = nxt[i]
        aw[i] += aw[j]
        bw[i] += bw[j]
        stamp[i] += 1
        stamp[j] += 1
        nj = nxt[j]
        nxt[i] = nj
        if nj >= 0:
            prv[nj] = i
        alive -= 1
        # refresh the two pairs that involve the merged symbol
        pi = prv[i]
        if pi >= 0:
            v = _pair_loss(aw, bw, pi, i)
            hval[hn] = v
            hidx[hn] = pi
            hsl[hn] = stamp[pi]
            hsr[hn] = stamp[i]
            k = hn
            hn += 1
            while k > 0:
                par = (k - 1) >> 1
                if hval[par] <= hval[k]:
                    break
                hval[par], hval[k] = hval[k], hval[par]
                hidx[par], hidx[k] = hidx[k], hidx[par]
                hsl[par], hsl[k] = hsl[k], hsl[par]
                hsr[par], hsr[k] = hsr[k], hsr[par]
                k = par
        if nj >= 0:
            v = _pair_loss(aw, bw, i, nj)
            hval[hn] = v
            hidx[hn] = i
            hsl[hn] = stamp[i]
            hsr[hn] = stamp[nj]
            k = hn
            hn += 1
            while k > 0:
                par = (k - 1) >> 1
                if hval[par] <= hval[k]:
                    break
                hval[par], hval[k] = hval[k], hval[par]
                hidx[par], hidx[k] = hidx[k], hidx[par]
                hsl[par], hsl[k] = hsl[k], hsl[par]
                hsr[par], hsr[k] = hsr[k], hsr[par]
                k = par

    out_a = np.empty(alive, np.float64)
    out_b = np.empty(alive, np.float64)
    k = 0
    i = 0
    while i >= 0:
        out_a[k] = aw[i]
        out_b[k] = bw[i]
        k += 1
        i = nxt[i]
    return out_a, out_b
