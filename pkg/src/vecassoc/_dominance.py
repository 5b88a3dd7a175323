"""Componentwise dominance counting.

For points ``x_1, ..., x_n`` in ``R^d`` the dominance count of ``x_k`` is
``#{l : x_l <= x_k componentwise}`` (``x_k`` counts itself).  This is the
unnormalised empirical distribution function evaluated at the sample points,
which every marginal-copula score reduces to.

Three kernels share the work:

* ``d == 1``: a sort.
* ``n <= _BITSET_MAX_N``: per-dimension prefix bitsets, ``O(d n^2 / 64)``.
* larger ``n``: offline divide and conquer over dimensions with a Fenwick
  tree in the last two, ``O(n log^(d-1) n)``.
"""

import numpy as np
from numba import njit

_BITSET_MAX_N = 20_000
_BRUTE_MAX_M = 48

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(cache=True)
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


@njit(cache=True)
def _counts_bitset(pts):
    n, d = pts.shape
    w = (n + 63) // 64
    acc = np.empty((n, w), dtype=np.uint64)
    acc[:, :] = ~np.uint64(0)
    running = np.empty(w, dtype=np.uint64)
    for j in range(d):
        col = pts[:, j]
        order = np.argsort(col, kind="mergesort")
        running[:] = 0
        i = 0
        while i < n:
            g = i
            v = col[order[i]]
            while g < n and col[order[g]] == v:
                k = order[g]
                running[k >> 6] |= np.uint64(1) << np.uint64(k & 63)
                g += 1
            for t in range(i, g):
                k = order[t]
                for b in range(w):
                    acc[k, b] &= running[b]
            i = g
    out = np.zeros(n, dtype=np.int64)
    for k in range(n):
        c = np.uint64(0)
        for b in range(w):
            c += _popcount(acc[k, b])
        out[k] = np.int64(c)
    return out


@njit(cache=True)
def _counts_1d(col):
    n = col.shape[0]
    order = np.argsort(col, kind="mergesort")
    out = np.empty(n, dtype=np.int64)
    i = 0
    while i < n:
        g = i
        v = col[order[i]]
        while g < n and col[order[g]] == v:
            g += 1
        for t in range(i, g):
            out[order[t]] = g
        i = g
    return out


@njit(cache=True)
def _brute(coords, pts, isq, dim, out):
    m = pts.shape[0]
    d = coords.shape[1]
    for a in range(m):
        if not isq[a]:
            continue
        qa = pts[a]
        c = 0
        for b in range(m):
            if isq[b]:
                continue
            pb = pts[b]
            ok = True
            for j in range(dim, d):
                if coords[pb, j] > coords[qa, j]:
                    ok = False
                    break
            if ok:
                c += 1
        out[qa] += c


@njit(cache=True)
def _sweep2d(coords, pts, isq, dim, out):
    # dims (dim, dim + 1) remain; data items sort before queries on ties
    m = pts.shape[0]
    key = np.empty(m, dtype=np.int64)
    last = np.empty(m, dtype=np.int64)
    for a in range(m):
        key[a] = coords[pts[a], dim] * 2 + (1 if isq[a] else 0)
        last[a] = coords[pts[a], dim + 1]
    order2 = np.argsort(last, kind="mergesort")
    rank = np.empty(m, dtype=np.int64)
    r = 0
    prev = -1
    for t in range(m):
        a = order2[t]
        if t == 0 or last[a] != prev:
            r += 1
            prev = last[a]
        rank[a] = r
    tree = np.zeros(r + 1, dtype=np.int64)
    order = np.argsort(key, kind="mergesort")
    for t in range(m):
        a = order[t]
        i = rank[a]
        if isq[a]:
            s = 0
            while i > 0:
                s += tree[i]
                i -= i & (-i)
            out[pts[a]] += s
        else:
            while i <= r:
                tree[i] += 1
                i += i & (-i)


@njit(cache=True)
def _cdq(coords, pts, isq, dim, out):
    m = pts.shape[0]
    d = coords.shape[1]
    if m <= _BRUTE_MAX_M:
        _brute(coords, pts, isq, dim, out)
        return 0
    if dim == d - 2:
        _sweep2d(coords, pts, isq, dim, out)
        return 0
    key = np.empty(m, dtype=np.int64)
    for a in range(m):
        key[a] = coords[pts[a], dim] * 2 + (1 if isq[a] else 0)
    order = np.argsort(key, kind="mergesort")
    pts_s = pts[order]
    isq_s = isq[order]
    mid = m // 2
    _cdq(coords, pts_s[:mid], isq_s[:mid], dim, out)
    _cdq(coords, pts_s[mid:], isq_s[mid:], dim, out)
    # lower-half data against upper-half queries, one dimension fewer
    nd = 0
    for a in range(mid):
        if not isq_s[a]:
            nd += 1
    nq = 0
    for a in range(mid, m):
        if isq_s[a]:
            nq += 1
    if nd > 0 and nq > 0:
        cp = np.empty(nd + nq, dtype=np.int64)
        cq = np.empty(nd + nq, dtype=np.bool_)
        c = 0
        for a in range(mid):
            if not isq_s[a]:
                cp[c] = pts_s[a]
                cq[c] = False
                c += 1
        for a in range(mid, m):
            if isq_s[a]:
                cp[c] = pts_s[a]
                cq[c] = True
                c += 1
        _cdq(coords, cp, cq, dim + 1, out)
    return 0


def _dense_ranks(pts):
    coords = np.empty(pts.shape, dtype=np.int64)
    for j in range(pts.shape[1]):
        _, inv = np.unique(pts[:, j], return_inverse=True)
        coords[:, j] = inv.reshape(-1)
    return coords


def _counts_cdq(pts):
    n, d = pts.shape
    coords = _dense_ranks(pts)
    idx = np.arange(n, dtype=np.int64)
    all_pts = np.concatenate([idx, idx])
    isq = np.concatenate([np.zeros(n, dtype=np.bool_), np.ones(n, dtype=np.bool_)])
    out = np.zeros(n, dtype=np.int64)
    _cdq(coords, all_pts, isq, 0, out)
    return out


def dominance_counts(points):
    """Return ``#{l : points[l] <= points[k]}`` for every row ``k``.

    Parameters
    ----------
    points : array_like, shape (n, d)

    Returns
    -------
    numpy.ndarray of int64, shape (n,)
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-d array")
    n, d = pts.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if d == 1:
        return _counts_1d(pts[:, 0])
    if n <= _BITSET_MAX_N:
        return _counts_bitset(pts)
    return _counts_cdq(pts)


@njit(cache=True)
def _batch_bitset(pts):
    m, n, _ = pts.shape
    out = np.empty((m, n), dtype=np.int64)
    for i in range(m):
        out[i] = _counts_bitset(pts[i])
    return out


def dominance_counts_batch(points):
    """Dominance counts for a stack of samples, shape ``(m, n, d) -> (m, n)``."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    m, n, d = pts.shape
    if d == 1 or n > _BITSET_MAX_N:
        return np.stack([dominance_counts(x) for x in pts]) if m else np.zeros((0, n), np.int64)
    return _batch_bitset(pts)


@njit(cache=True)
def _count_below(data, queries):
    # prefix bitsets over the data, swept once per dimension in query order
    n, d = data.shape
    m = queries.shape[0]
    w = (n + 63) // 64
    acc = np.empty((m, w), dtype=np.uint64)
    acc[:, :] = ~np.uint64(0)
    running = np.empty(w, dtype=np.uint64)
    for j in range(d):
        dord = np.argsort(data[:, j], kind="mergesort")
        qord = np.argsort(queries[:, j], kind="mergesort")
        running[:] = 0
        k = 0
        for t in range(m):
            qi = qord[t]
            qv = queries[qi, j]
            while k < n and data[dord[k], j] <= qv:
                r = dord[k]
                running[r >> 6] |= np.uint64(1) << np.uint64(r & 63)
                k += 1
            for b in range(w):
                acc[qi, b] &= running[b]
    out = np.zeros(m, dtype=np.int64)
    for i in range(m):
        c = np.uint64(0)
        for b in range(w):
            c += _popcount(acc[i, b])
        out[i] = np.int64(c)
    return out


_QUERY_CHUNK = 2048


def count_below(data, queries):
    """For each query row, the number of data rows componentwise ``<=`` it."""
    data = np.ascontiguousarray(data, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    if data.ndim != 2 or queries.ndim != 2 or data.shape[1] != queries.shape[1]:
        raise ValueError("data and queries must be 2-d with the same number of columns")
    parts = [_count_below(data, queries[s : s + _QUERY_CHUNK]) for s in range(0, len(queries), _QUERY_CHUNK)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def count_above(data, queries):
    """For each query row, the number of data rows componentwise ``>=`` it."""
    return count_below(-np.asarray(data, dtype=np.float64), -np.asarray(queries, dtype=np.float64))
