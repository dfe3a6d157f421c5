"""Numba kernels for the solver and the pattern-tree traversals.

Everything here is deterministic and single-threaded; callers own all
parallelism. Kernels are monomorphic (float64/int64) and cached to disk.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# FNV-1a over occurrence rows; 64-bit so cross-column collisions are ~2^-64,
# and the traversal has a no-progress fallback that ignores hashes entirely.
_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)
_U64_ZERO = np.uint64(0)
_U64_ONE = np.uint64(1)


@njit(cache=True)
def _siftdown(bz, bs, start, end):
    root = start
    while True:
        child = 2 * root + 1
        if child >= end:
            return
        if child + 1 < end and bz[child + 1] < bz[child]:
            child += 1
        if bz[child] < bz[root]:
            bz[root], bz[child] = bz[child], bz[root]
            bs[root], bs[child] = bs[child], bs[root]
            root = child
        else:
            return


@njit(cache=True)
def _solve_1d_ws(d, ys, lam, bz, bs):
    """Exact minimizer of sum_k max(0, d_k - ys_k * z)^2 + lam * |z|.

    The smooth part's derivative g(z) = sum_k -2*ys_k*max(0, d_k - ys_k*z)
    is nondecreasing piecewise linear, so the minimizer is found by scanning
    breakpoints in ascending order. A min-heap over bz/bs (caller scratch,
    at least d.size long) delivers them lazily; the scan usually stops after
    a few pops, so no full sort is paid. Breakpoint ties are orderless: the
    derivative gains the same slope mass at equal z either way. lam = 0
    gives the unpenalized minimizer (used for the bias); on a flat optimal
    plateau the leftmost point is returned.
    """
    m = d.size
    g0 = 0.0
    for k in range(m):
        if d[k] > 0.0:
            g0 += -2.0 * ys[k] * d[k]
    if abs(g0) <= lam:
        return 0.0
    sign = 1.0
    flip = False
    if g0 > lam:
        # Mirror z -> -z: same problem with flipped labels.
        sign = -1.0
        flip = True
        g0 = -g0
    # Right side: g(0) < -lam, find g(z) = -lam with z > 0.
    slope = 0.0
    nbp = 0
    for k in range(m):
        yk = -ys[k] if flip else ys[k]
        if yk > 0.0:
            if d[k] > 0.0:
                slope += 2.0
                bz[nbp] = d[k]
                bs[nbp] = -2.0
                nbp += 1
        else:
            if d[k] >= 0.0:
                slope += 2.0
            else:
                bz[nbp] = -d[k]
                bs[nbp] = 2.0
                nbp += 1
    for s in range(nbp // 2 - 1, -1, -1):
        _siftdown(bz, bs, s, nbp)
    cz = 0.0
    cg = g0
    end = nbp
    while end > 0:
        znext = bz[0]
        gnext = cg + slope * (znext - cz) if slope > 0.0 else cg
        if slope > 0.0 and gnext >= -lam:
            return sign * (cz + (-lam - cg) / slope)
        cz = znext
        cg = gnext
        slope += bs[0]
        end -= 1
        bz[0] = bz[end]
        bs[0] = bs[end]
        _siftdown(bz, bs, 0, end)
    if slope > 0.0:
        return sign * (cz + (-lam - cg) / slope)
    return sign * cz


@njit(cache=True)
def solve_1d(d, ys, lam):
    """Allocating wrapper around the scratch-buffer 1-D solve."""
    bz = np.empty(d.size, dtype=np.float64)
    bs = np.empty(d.size, dtype=np.float64)
    return _solve_1d_ws(d, ys, lam, bz, bs)


@njit(cache=True)
def cd_epochs(indptr, indices, y, f, w, b, lam, n_epochs, eps0):
    """Cyclic coordinate descent epochs with exact 1-D coordinate and bias
    minimization. Mutates f and w in place; returns the new bias.

    Stationary coordinates are detected from the loss slope gathered in the
    same pass as the residuals and skipped without the breakpoint sort. A
    nonzero coordinate counts as stationary within the eps0 slack; if an
    epoch under that slack moves nothing the slack drops to zero, and a
    no-move epoch at zero slack is an exact fixed point of the sweep, after
    which further epochs are no-ops and the call returns early; the second
    return value is the number of epochs actually run, so used < n_epochs
    tells the caller the iterate is exactly stationary. Callers pass eps0 =
    0 for a polishing epoch in which every coordinate is re-solved exactly,
    which snaps boundary coordinates back onto hard zeros.
    """
    n = y.size
    ncols = w.size
    mmax = n
    for j in range(ncols):
        m = indptr[j + 1] - indptr[j]
        if m > mmax:
            mmax = m
    dvbuf = np.empty(mmax, dtype=np.float64)
    ysbuf = np.empty(mmax, dtype=np.float64)
    bzbuf = np.empty(mmax, dtype=np.float64)
    bsbuf = np.empty(mmax, dtype=np.float64)
    eps = eps0
    used = 0
    for _ in range(n_epochs):
        used += 1
        moved = False
        for j in range(ncols):
            a = indptr[j]
            c = indptr[j + 1]
            m = c - a
            if m == 0:
                w[j] = 0.0
                continue
            wj = w[j]
            g = 0.0
            for k in range(m):
                i = indices[a + k]
                yy = y[i]
                dv = 1.0 - yy * f[i] + yy * wj
                dvbuf[k] = dv
                ysbuf[k] = yy
                res = dv - yy * wj
                if res > 0.0:
                    g += yy * res
            if wj == 0.0:
                if 2.0 * abs(g) <= lam:
                    continue
            elif wj > 0.0:
                if abs(lam - 2.0 * g) <= eps:
                    continue
            else:
                if abs(lam + 2.0 * g) <= eps:
                    continue
            z = _solve_1d_ws(dvbuf[:m], ysbuf[:m], lam, bzbuf, bsbuf)
            if z != wj:
                delta = z - wj
                w[j] = z
                moved = True
                for k in range(m):
                    f[indices[a + k]] += delta
        # Unpenalized bias: same subproblem with lam = 0 over all rows.
        for i in range(n):
            dvbuf[i] = 1.0 - y[i] * f[i] + y[i] * b
        z = _solve_1d_ws(dvbuf[:n], y, 0.0, bzbuf, bsbuf)
        if z != b:
            delta = z - b
            b = z
            moved = True
            for i in range(n):
                f[i] += delta
        if not moved:
            if eps == 0.0:
                used -= 1  # a verification pass, not a productive epoch
                break
            eps = 0.0
    return b, used


@njit(cache=True)
def project_alpha(alpha, y):
    """Exact Euclidean projection of alpha >= 0 onto {a >= 0, sum y*a = 0}.

    The shifted point a(t) = max(0, alpha - t*y) has h(t) = sum y*a(t)
    nonincreasing and piecewise linear; the root is found by scanning the
    sorted breakpoints of the class being shrunk.
    """
    n = alpha.size
    h0 = 0.0
    for i in range(n):
        h0 += y[i] * alpha[i]
    out = np.empty(n, dtype=np.float64)
    if h0 == 0.0:
        for i in range(n):
            out[i] = alpha[i]
        return out
    yy = y.copy()
    if h0 < 0.0:
        # Mirror t -> -t by flipping labels.
        for i in range(n):
            yy[i] = -yy[i]
        h0 = -h0
    # h(t) for t > 0: shrinking class has yy = +1; the other class only grows.
    npos = 0
    nneg = 0
    bz = np.empty(n, dtype=np.float64)
    for i in range(n):
        if yy[i] > 0.0:
            if alpha[i] > 0.0:
                bz[npos] = alpha[i]
                npos += 1
        else:
            nneg += 1
    slope = -(npos + nneg)
    order = np.argsort(bz[:npos])
    ct = 0.0
    ch = h0
    t_star = 0.0
    found = False
    for t in range(npos):
        znext = bz[order[t]]
        hnext = ch + slope * (znext - ct)
        if hnext <= 0.0:
            t_star = ct + (0.0 - ch) / slope
            found = True
            break
        ct = znext
        ch = hnext
        slope += 1.0
    if not found:
        if slope < 0.0:
            t_star = ct + (0.0 - ch) / slope
        else:
            t_star = ct  # h already 0 here (single-class corner)
    for i in range(n):
        v = alpha[i] - t_star * yy[i]
        out[i] = v if v > 0.0 else 0.0
    return out


@njit(cache=True)
def compute_f(indptr, indices, w, b, n):
    """f = X w + b for the column-sparse binary matrix."""
    f = np.full(n, b, dtype=np.float64)
    for j in range(w.size):
        wj = w[j]
        if wj != 0.0:
            for k in range(indptr[j], indptr[j + 1]):
                f[indices[k]] += wj
    return f


@njit(cache=True)
def gap_from_f(indptr, indices, y, f, lam, w_l1):
    """Duality gap at (w, b) given f = Xw + b and ||w||_1.

    Builds the feasible dual point (residual link, projection onto the
    bias constraint, box rescale over THESE columns) and returns
    (gap, primal, alpha).
    """
    n = y.size
    resid = np.empty(n, dtype=np.float64)
    primal = lam * w_l1
    for i in range(n):
        r = 1.0 - y[i] * f[i]
        if r < 0.0:
            r = 0.0
        resid[i] = r
        primal += r * r
    alpha = project_alpha(2.0 * resid, y)
    ncols = indptr.size - 1
    smax = 0.0
    for j in range(ncols):
        s = 0.0
        for k in range(indptr[j], indptr[j + 1]):
            i = indices[k]
            s += alpha[i] * y[i]
        if abs(s) > smax:
            smax = abs(s)
    if smax > lam and smax > 0.0:
        scale = lam / smax
        for i in range(n):
            alpha[i] *= scale
    dual = 0.0
    for i in range(n):
        dual += alpha[i] - 0.25 * alpha[i] * alpha[i]
    return primal - dual, primal, alpha


@njit(cache=True)
def col_sums(indptr, indices, vals):
    """Per-column sums of vals over the rows each column touches."""
    ncols = indptr.size - 1
    out = np.empty(ncols, dtype=np.float64)
    for j in range(ncols):
        s = 0.0
        for k in range(indptr[j], indptr[j + 1]):
            s += vals[indices[k]]
        out[j] = s
    return out


@njit(cache=True)
def _tree_children(ctok, indptr, m, occ_seq, occ_suf, depth, lvl_cnt, lvl_seq, lvl_suf, seen, stamp):
    """First-occurrence extensions of a projected database.

    occ holds at most one entry per sequence: occ_seq[k] is the sequence
    index and occ_suf[k] the absolute ctok offset where its suffix starts.
    Children are written into row `depth` of the level buffers: child e
    occupies lvl_seq[depth, offs[e]:offs[e]+lvl_cnt[depth, e]], grouped by
    event code ascending and sequence ascending within a child. Returns the
    per-event offsets. No allocation happens on the hot path.
    """
    nk = occ_seq.size
    cnt = lvl_cnt[depth]
    c_seq = lvl_seq[depth]
    c_suf = lvl_suf[depth]
    for e in range(m):
        cnt[e] = 0
    for k in range(nk):
        end = indptr[occ_seq[k] + 1]
        stamp[0] += 1
        st = stamp[0]
        nf = 0
        for t in range(occ_suf[k], end):
            e = ctok[t]
            if seen[e] != st:
                seen[e] = st
                cnt[e] += 1
                nf += 1
                if nf == m:
                    break
    offs = lvl_cnt[depth, m : 2 * m + 1]
    total = 0
    for e in range(m):
        offs[e] = total
        total += cnt[e]
    offs[m] = total
    fill = lvl_cnt[depth, 2 * m + 1 : 3 * m + 1]
    for e in range(m):
        fill[e] = offs[e]
    for k in range(nk):
        i = occ_seq[k]
        end = indptr[i + 1]
        stamp[0] += 1
        st = stamp[0]
        nf = 0
        for t in range(occ_suf[k], end):
            e = ctok[t]
            if seen[e] != st:
                seen[e] = st
                c_seq[fill[e]] = i
                c_suf[fill[e]] = t + 1
                fill[e] += 1
                nf += 1
                if nf == m:
                    break
    return offs


@njit(cache=True)
def _tree_max_rec(ctok, indptr, m, v, occ_seq, occ_suf, depth, max_len, best,
                  lvl_cnt, lvl_seq, lvl_suf, seen, stamp, stats):
    """Branch-and-bound max of |sum of v over occ| across all patterns.

    The subtree bound max(sum of positive v, -sum of negative v) over a
    node's occurrences dominates |score| for every descendant, so subtrees
    whose bound cannot beat the running best are skipped. Single-occurrence
    nodes are never descended: descendants share the same occurrence set,
    hence the same score.
    """
    offs = _tree_children(ctok, indptr, m, occ_seq, occ_suf, depth, lvl_cnt, lvl_seq, lvl_suf, seen, stamp)
    for e in range(m):
        a = offs[e]
        cend = offs[e + 1]
        ce = cend - a
        if ce == 0:
            continue
        stats[0] += 1
        s = 0.0
        pos = 0.0
        neg = 0.0
        for k in range(a, cend):
            vv = v[lvl_seq[depth, k]]
            s += vv
            if vv > 0.0:
                pos += vv
            else:
                neg -= vv
        if abs(s) > best:
            best = abs(s)
        u = pos if pos > neg else neg
        if depth + 1 < max_len and ce > 1 and u > best:
            best = _tree_max_rec(
                ctok, indptr, m, v, lvl_seq[depth, a:cend], lvl_suf[depth, a:cend],
                depth + 1, max_len, best, lvl_cnt, lvl_seq, lvl_suf, seen, stamp, stats,
            )
        else:
            stats[1] += 1
    return best


@njit(cache=True)
def _tree_cert_rec(
    ctok, indptr, m, v, thresh, occ_seq, occ_suf, depth, max_len, best, path,
    out_pat, out_pat_ptr, out_occ, out_occ_ptr, out_score, out_hash, cur,
    known_hashes, htab,
    lvl_cnt, lvl_seq, lvl_suf, lvl_fe, lvl_fseq, lvl_fsuf, lvl_val,
    seen, stamp, stats,
):
    """Combined certificate-and-collection sweep above a score floor.

    Prunes any subtree (root included) whose bound u is below thresh; among
    the rest it tracks the running max |score| (exact whenever the true max
    reaches thresh, which is the only case the caller needs exactly) and
    emits every node with |score| >= thresh into the out_* buffers. Each
    emitted occurrence set is FNV-hashed; sets whose hash appears in the
    sorted known_hashes array (the caller's working set) or already in this
    sweep's htab table are skipped, so many tree nodes sharing one column
    cost one emission. cur is [n_nodes, pat_cursor, occ_cursor, saturated];
    once the buffers fill the sweep stops collecting but keeps walking so
    the max stays exact, and the caller works with the partial batch.
    Single-occurrence nodes are emitted but never descended; their
    descendants would duplicate the same one-sequence column. Each suffix is
    scanned once: children are captured flat, then counting-sorted by event
    into the grouped buffers.
    """
    nk = occ_seq.size
    cnt = lvl_cnt[depth]
    for e in range(m):
        cnt[e] = 0
        lvl_val[depth, e] = 0.0
        lvl_val[depth, m + e] = 0.0
        lvl_val[depth, 2 * m + e] = 0.0
        lvl_val[depth, 3 * m + e] = 0.0
        lvl_val[depth, 4 * m + e] = 0.0
    fp = 0
    for k in range(nk):
        i = occ_seq[k]
        vv = v[i]
        end = indptr[i + 1]
        stamp[0] += 1
        st = stamp[0]
        nf = 0
        for t in range(occ_suf[k], end):
            e = ctok[t]
            if seen[e] != st:
                seen[e] = st
                cnt[e] += 1
                lvl_fe[depth, fp] = e
                lvl_fseq[depth, fp] = i
                lvl_fsuf[depth, fp] = t + 1
                fp += 1
                lvl_val[depth, e] += vv
                if vv > 0.0:
                    lvl_val[depth, m + e] += vv
                    if t + 1 < end:
                        lvl_val[depth, 3 * m + e] += vv
                else:
                    lvl_val[depth, 2 * m + e] -= vv
                    if t + 1 < end:
                        lvl_val[depth, 4 * m + e] -= vv
                nf += 1
                if nf == m:
                    break
    offs = lvl_cnt[depth, m : 2 * m + 1]
    total = 0
    for e in range(m):
        offs[e] = total
        total += cnt[e]
    offs[m] = total
    fill = lvl_cnt[depth, 2 * m + 1 : 3 * m + 1]
    for e in range(m):
        fill[e] = offs[e]
    for q in range(fp):
        e = lvl_fe[depth, q]
        lvl_seq[depth, fill[e]] = lvl_fseq[depth, q]
        lvl_suf[depth, fill[e]] = lvl_fsuf[depth, q]
        fill[e] += 1
    for e in range(m):
        a = offs[e]
        cend = offs[e + 1]
        ce = cend - a
        if ce == 0:
            continue
        stats[0] += 1
        u = max(lvl_val[depth, m + e], lvl_val[depth, 2 * m + e])
        if u < thresh:
            stats[1] += 1
            continue
        s = lvl_val[depth, e]
        if abs(s) > best:
            best = abs(s)
        path[depth] = e
        if abs(s) >= thresh:
            if cur[3] == 0:
                h = _FNV_OFFSET
                for k in range(a, cend):
                    h = (h ^ np.uint64(lvl_seq[depth, k])) * _FNV_PRIME
                dup = False
                lo = 0
                hi = known_hashes.size
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if known_hashes[mid] < h:
                        lo = mid + 1
                    else:
                        hi = mid
                if lo < known_hashes.size and known_hashes[lo] == h:
                    dup = True
                if not dup and h != _U64_ZERO:
                    # open addressing; an empty slot always exists because
                    # inserts stop at saturation and htab is 2x the node cap
                    mask = np.uint64(htab.size - 1)
                    slot = h & mask
                    while True:
                        cell = htab[slot]
                        if cell == _U64_ZERO:
                            htab[slot] = h
                            break
                        if cell == h:
                            dup = True
                            break
                        slot = (slot + _U64_ONE) & mask
                if not dup:
                    nn = cur[0]
                    pp = cur[1]
                    op = cur[2]
                    plen = depth + 1
                    if nn + 1 >= out_pat_ptr.size or nn >= out_score.size or pp + plen > out_pat.size or op + ce > out_occ.size:
                        cur[3] = 1
                    else:
                        for q in range(plen):
                            out_pat[pp + q] = path[q]
                        for k in range(ce):
                            out_occ[op + k] = lvl_seq[depth, a + k]
                        out_pat_ptr[nn + 1] = pp + plen
                        out_occ_ptr[nn + 1] = op + ce
                        out_score[nn] = s
                        out_hash[nn] = h
                        cur[0] = nn + 1
                        cur[1] = pp + plen
                        cur[2] = op + ce
                        stats[3] += 1
        else:
            stats[2] += 1
        # Grandchildren draw only on rows whose suffix extends past the
        # matched event, so the bound over those rows alone gates descent.
        u_deep = max(lvl_val[depth, 3 * m + e], lvl_val[depth, 4 * m + e])
        if depth + 1 < max_len and ce > 1 and u_deep >= thresh:
            best = _tree_cert_rec(
                ctok, indptr, m, v, thresh,
                lvl_seq[depth, a:cend], lvl_suf[depth, a:cend],
                depth + 1, max_len, best, path,
                out_pat, out_pat_ptr, out_occ, out_occ_ptr, out_score, out_hash, cur,
                known_hashes, htab,
                lvl_cnt, lvl_seq, lvl_suf, lvl_fe, lvl_fseq, lvl_fsuf, lvl_val,
                seen, stamp, stats,
            )
    return best
