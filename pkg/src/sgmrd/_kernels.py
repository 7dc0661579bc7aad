"""Compiled inner loops: rank-index maintenance, seed hashing, KS scans.

Everything here works on plain arrays so it can be called with the GIL
released from worker threads.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)

# Below this the Kolmogorov survival function equals 1 to within 1e-12.
_LAMBDA_FLOOR = 0.2


@njit(cache=True, nogil=True)
def splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def mix_key(seed, values):
    key = splitmix64(np.uint64(seed))
    for v in values:
        key = splitmix64(key ^ np.uint64(v))
    return key


@njit(cache=True, nogil=True)
def draw_offset(key, iteration, attempt, cond, span):
    """Counter-based draw in [0, span) for one (iteration, attempt, dim)."""
    h = splitmix64(key ^ np.uint64(iteration))
    h = splitmix64(h ^ np.uint64(attempt))
    h = splitmix64(h ^ np.uint64(cond))
    return np.int64(h % np.uint64(span))


@njit(cache=True, nogil=True)
def kolmogorov_sf(lam):
    if lam < _LAMBDA_FLOOR:
        return 1.0
    total = 0.0
    sign = 1.0
    k = 1
    while True:
        term = np.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-10:
            break
        sign = -sign
        k += 1
    p = 2.0 * total
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


@njit(cache=True, nogil=True)
def ks_pvalue_from_stat(stat, n_a, n_b):
    n_e = n_a * n_b / (n_a + n_b)
    return kolmogorov_sf(np.sqrt(n_e) * stat)


@njit(cache=True, nogil=True)
def rank_update(data, order, slot, new_values, n):
    """Replace the row stored in ``slot`` and keep every column order sorted.

    ``order[j, :n]`` lists slots by ascending ``data[:, j]``; equal values keep
    arrival order. When ``slot == n`` the row is appended (window not full).
    """
    d = data.shape[1]
    appending = slot == n
    for j in range(d):
        col = order[j]
        size = n
        if not appending:
            old = data[slot, j]
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) // 2
                if data[col[mid], j] < old:
                    lo = mid + 1
                else:
                    hi = mid
            pos = lo
            while col[pos] != slot:
                pos += 1
            for k in range(pos, n - 1):
                col[k] = col[k + 1]
            size = n - 1
        val = new_values[j]
        lo = 0
        hi = size
        while lo < hi:
            mid = (lo + hi) // 2
            if data[col[mid], j] <= val:
                lo = mid + 1
            else:
                hi = mid
        for k in range(size, lo, -1):
            col[k] = col[k - 1]
        col[lo] = slot
    for j in range(d):
        data[slot, j] = new_values[j]


@njit(cache=True, nogil=True)
def popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return np.int64((x * np.uint64(0x0101010101010101)) >> np.uint64(56))


_POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


@njit(cache=True, nogil=True)
def _scan_byte(byte, nbits, v, n, n_in, hi, lo):
    for b in range(nbits):
        v += ((byte >> b) & 1) * n - n_in
        hi = max(hi, v)
        lo = min(lo, v)
    return hi, lo


@njit(cache=True, nogil=True)
def _ks_scan_exact(bits, n, n_in, last_of_run, has_ties):
    """Bit-by-bit reference for :func:`_ks_scan`."""
    c_in = np.int64(0)
    hi = np.int64(0)
    lo = np.int64(0)
    one = np.uint64(1)
    for pos in range(n):
        c_in += np.int64((bits[pos >> 6] >> np.uint64(pos & 63)) & one)
        if not has_ties or last_of_run[pos]:
            v = c_in * n - (pos + 1) * n_in
            hi = max(hi, v)
            lo = min(lo, v)
    return max(hi, -lo)


@njit(cache=True, nogil=True)
def _ks_scan(bits, n, n_in, last_of_run, has_ties):
    """n_in * n_out * D for the inside set given as a bitset over target ranks.

    v(pos) = c_in(pos) * n - (pos + 1) * n_in is a walk ending at 0. Without
    ties the walk is first sampled at byte boundaries; a byte is then walked
    bit by bit only if its ones (or zeros) could push v past the extremes
    already seen. The result is exact.
    """
    if has_ties:
        return _ks_scan_exact(bits, n, n_in, last_of_run, has_ties)
    raw = bits.view(np.uint8)
    nb = n // 8
    n_out = n - n_in
    vb = np.empty(nb + 1, dtype=np.int64)
    v = np.int64(0)
    hi = np.int64(0)
    lo = np.int64(0)
    vb[0] = 0
    for m in range(nb):
        v += _POP8[raw[m]] * n - 8 * n_in
        vb[m + 1] = v
        hi = max(hi, v)
        lo = min(lo, v)
    for m in range(nb):
        byte = np.int64(raw[m])
        pc = _POP8[byte]
        vs = vb[m]
        if vs + pc * n_out > hi or vs - (8 - pc) * n_in < lo:
            hi, lo = _scan_byte(byte, 8, vs, n, n_in, hi, lo)
    tail = n - 8 * nb
    if tail:
        hi, lo = _scan_byte(np.int64(raw[nb]), tail, vb[nb], n, n_in, hi, lo)
    return max(hi, -lo)


@njit(cache=True, nogil=True)
def _set_bit(bits, p):
    bits[p >> 6] |= np.uint64(1) << np.uint64(p & 63)


@njit(cache=True, nogil=True)
def _clear_bit(bits, p):
    bits[p >> 6] &= ~(np.uint64(1) << np.uint64(p & 63))


@njit(cache=True, nogil=True)
def contrast_pvalues(data, order, n, target, cond, block, iterations, key,
                     max_redraws):
    """p-values of the inside/outside KS test for ``iterations`` conditions.

    Conditions take a block of ``block`` consecutive ranks in each dimension
    of ``cond``; offsets come from ``draw_offset`` so iteration j is the same
    whatever order iterations run in. An iteration whose split leaves one
    side empty is redrawn; after ``max_redraws`` redraws it yields p = 1.

    Blocks are held as bitsets over target ranks. For each conditioning
    dimension the first-attempt offsets are visited in sorted order so the
    block bitset slides instead of being rebuilt.
    """
    cap = data.shape[0]
    n_cond = cond.shape[0]
    span = n - block + 1
    tcol = order[target]

    tpos = np.empty(cap, dtype=np.int64)
    for pos in range(n):
        tpos[tcol[pos]] = pos
    last_of_run = np.ones(n, dtype=np.bool_)
    has_ties = False
    for pos in range(n - 1):
        if data[tcol[pos + 1], target] == data[tcol[pos], target]:
            last_of_run[pos] = False
            has_ties = True
    cpos = np.empty((n_cond, n), dtype=np.int64)
    for c in range(n_cond):
        col = order[cond[c]]
        for r in range(n):
            cpos[c, r] = tpos[col[r]]

    nw = (n + 63) // 64
    inside = np.zeros((iterations, nw), dtype=np.uint64)
    cur = np.zeros(nw, dtype=np.uint64)
    offs = np.empty(iterations, dtype=np.int64)
    for c in range(n_cond):
        cp = cpos[c]
        for it in range(iterations):
            offs[it] = draw_offset(key, it, 0, c, span)
        visit = np.argsort(offs)
        cur[:] = 0
        prev = offs[visit[0]]
        for r in range(prev, prev + block):
            _set_bit(cur, cp[r])
        for it in visit:
            o = offs[it]
            for r in range(prev, o):
                _clear_bit(cur, cp[r])
                _set_bit(cur, cp[r + block])
            prev = o
            if c == 0:
                for w in range(nw):
                    inside[it, w] = cur[w]
            else:
                for w in range(nw):
                    inside[it, w] &= cur[w]

    pvals = np.ones(iterations, dtype=np.float64)
    bits = np.empty(nw, dtype=np.uint64)
    blk = np.empty(nw, dtype=np.uint64)
    for it in range(iterations):
        for w in range(nw):
            bits[w] = inside[it, w]
        attempt = 0
        while True:
            n_in = 0
            for w in range(nw):
                n_in += popcount64(bits[w])
            if 0 < n_in < n:
                scaled = _ks_scan(bits, n, n_in, last_of_run, has_ties)
                n_out = n - n_in
                stat = scaled / (float(n_in) * float(n_out))
                pvals[it] = ks_pvalue_from_stat(stat, float(n_in), float(n_out))
                break
            attempt += 1
            if attempt > max_redraws:
                break
            # rare: rebuild this iteration's condition from scratch
            for c in range(n_cond):
                cp = cpos[c]
                o = draw_offset(key, it, attempt, c, span)
                blk[:] = 0
                for r in range(o, o + block):
                    _set_bit(blk, cp[r])
                if c == 0:
                    for w in range(nw):
                        bits[w] = blk[w]
                else:
                    for w in range(nw):
                        bits[w] &= blk[w]
    return pvals


@njit(cache=True, nogil=True)
def contrast_value(data, order, n, target, dims, seed, block, iterations, max_redraws):
    """1 - mean p-value for a sorted subspace ``dims`` containing ``target``.

    Returns -1.0 when the target column is constant in the window.
    """
    tcol = order[target]
    if data[tcol[0], target] == data[tcol[n - 1], target]:
        return -1.0
    vals = np.empty(dims.shape[0] + 2, dtype=np.int64)
    vals[0] = target
    vals[1] = dims.shape[0]
    cond = np.empty(dims.shape[0] - 1, dtype=np.int64)
    c = 0
    for k in range(dims.shape[0]):
        vals[k + 2] = dims[k]
        if dims[k] != target:
            cond[c] = dims[k]
            c += 1
    key = mix_key(seed, vals)
    p = contrast_pvalues(data, order, n, target, cond, block, iterations, key, max_redraws)
    q = 1.0 - p.mean()
    return min(1.0, max(0.0, q))
