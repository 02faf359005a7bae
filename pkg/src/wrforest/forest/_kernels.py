"""Compiled tree-growing kernels.

Every kernel works on *slots*: positions ``0 .. a_n-1`` into a tree's
subsample. ``rows[slot]`` maps a slot back to its original data row, so a row
drawn twice by the bootstrap occupies two slots and counts twice everywhere.
"""
import numpy as np
from numba import njit

MODE_WRF = 0
MODE_ERT = 1
MODE_MONDRIAN = 2

CRIT_INTRA = 0
CRIT_INTER = 1


@njit(cache=True, nogil=True)
def _pow(a, p):
    if p == 1.0:
        return a
    if p == 2.0:
        return a * a
    return a ** p


@njit(cache=True, nogil=True)
def midpoint(a, b):
    # a < b; the midpoint of adjacent floats can round up to b
    t = 0.5 * (a + b)
    if t >= b:
        t = a
    return t


@njit(cache=True, nogil=True)
def intra_scan(ys, xs):
    """Best variance-reduction cut over cell points already sorted by ``xs``.

    ``ys`` is (N, d'). Returns (gain, position) where position ``i`` means the
    left child holds sorted points ``0..i``; position -1 means no valid cut.
    """
    n, dy = ys.shape
    total = np.zeros(dy)
    for i in range(n):
        for k in range(dy):
            total[k] += ys[i, k]
    mean_a = total / n
    left = np.zeros(dy)
    best = -np.inf
    best_pos = -1
    for i in range(n - 1):
        for k in range(dy):
            left[k] += ys[i, k]
        if xs[i] == xs[i + 1]:
            continue
        nl = i + 1
        nr = n - nl
        g = 0.0
        for k in range(dy):
            dl = left[k] / nl - mean_a[k]
            dr = (total[k] - left[k]) / nr - mean_a[k]
            g += nl * dl * dl + nr * dr * dr
        g /= n
        if g > best:
            best = g
            best_pos = i
    return best, best_pos


@njit(cache=True, nogil=True)
def intra_partition_gain(ys, in_left):
    n, dy = ys.shape
    nl = 0
    for i in range(n):
        if in_left[i]:
            nl += 1
    nr = n - nl
    g = 0.0
    for k in range(dy):
        sa = 0.0
        sl = 0.0
        for i in range(n):
            sa += ys[i, k]
            if in_left[i]:
                sl += ys[i, k]
        ma = sa / n
        dl = sl / nl - ma
        dr = (sa - sl) / nr - ma
        g += nl * dl * dl + nr * dr * dr
    return g / n


@njit(cache=True, nogil=True)
def inter_masked(v, mask, nl, p):
    """Inter-class criterion for the split encoded by ``mask``.

    ``v`` holds the cell's responses sorted ascending, ``mask[r]`` flags the
    sorted position ``r`` as belonging to the left child (``nl`` of them).
    Returns (nl/N) W_p^p(left, cell) + (nr/N) W_p^p(right, cell), integrating
    the quantile functions over their merged breakpoints in exact integer
    arithmetic (breakpoints scaled by N * child size).
    """
    n = v.shape[0]
    nr = n - nl
    if p == 1.0:
        # W1 through CDFs: both children collapse into one sum
        acc = 0.0
        cl = 0
        for k in range(n - 1):
            if mask[k]:
                cl += 1
            gap = v[k + 1] - v[k]
            if gap > 0.0:
                acc += gap * abs(cl - nl * (k + 1) / n)
        return 2.0 * acc / n
    if p == 2.0:
        c, prefix, sq_a = _centered(v)
        return _inter_sq(c, prefix, sq_a, mask, nl)
    out = 0.0
    for side in range(2):
        ns = nl if side == 0 else nr
        target = side == 0
        pos = 0
        while mask[pos] != target:
            pos += 1
        i = 0
        j = 0
        u = 0
        acc = 0.0
        while i < n:
            a_end = (i + 1) * ns
            s_end = (j + 1) * n
            e = a_end if a_end < s_end else s_end
            diff = abs(v[i] - v[pos])
            if diff > 0.0:
                acc += (e - u) * _pow(diff, p)
            u = e
            if a_end == e:
                i += 1
            if s_end == e:
                j += 1
                if j < ns:
                    pos += 1
                    while mask[pos] != target:
                        pos += 1
        # (ns / n) * acc / (n * ns)
        out += acc / (n * n)
    return out


@njit(cache=True, nogil=True)
def _centered(v):
    shift = 0.5 * (v[0] + v[-1])
    n = v.shape[0]
    c = np.empty(n)
    prefix = np.empty(n + 1)
    prefix[0] = 0.0
    sq = 0.0
    for k in range(n):
        c[k] = v[k] - shift
        prefix[k + 1] = prefix[k] + c[k]
        sq += c[k] * c[k]
    return c, prefix, sq / n


@njit(cache=True, nogil=True)
def _inter_sq(c, prefix, sq_a, mask, nl):
    """Quadratic case: W_2^2 = E_child[v^2] + E_cell[v^2] - 2 * cross term.

    ``c`` are the sorted responses re-centred (W_2 is shift invariant) and
    ``prefix`` their cumulative sums. The cross term pairs each child
    quantile piece with the integral of the cell quantile function over the
    same piece, one pass over the cell.
    """
    n = c.shape[0]
    nr = n - nl
    # index 1: left child, index 0: right child (branch-free updates)
    step = np.empty(2)
    step[0] = n / nr
    step[1] = n / nl
    j = np.zeros(2)
    g = np.zeros(2)
    cross = np.zeros(2)
    sq = np.zeros(2)
    for k in range(n):
        ck = c[k]
        s = 1 if mask[k] else 0
        j[s] += 1.0
        t = j[s] * step[s]
        # the integral is continuous, so rounding of i at breakpoints is harmless
        i = min(int(t), n - 1)
        gk = prefix[i] + c[i] * (t - i)
        cross[s] += ck * (gk - g[s])
        g[s] = gk
        sq[s] += ck * ck
    wl = max(sq[1] / nl + sq_a - 2.0 * cross[1] / n, 0.0)
    wr = max(sq[0] / nr + sq_a - 2.0 * cross[0] / n, 0.0)
    return (nl * wl + nr * wr) / n


@njit(cache=True, nogil=True)
def inter_scan(v, rank, xs_order, xs, p):
    """Best inter-class cut scanning points in x order.

    ``rank[i]`` is the sorted-response position of cell point ``i``;
    ``xs_order`` lists cell points by ascending x, ``xs`` the sorted x values.
    """
    n = v.shape[0]
    mask = np.zeros(n, dtype=np.bool_)
    c, prefix, sq_a = _centered(v)
    best = -np.inf
    best_pos = -1
    for i in range(n - 1):
        mask[rank[xs_order[i]]] = True
        if xs[i] == xs[i + 1]:
            continue
        if p == 2.0:
            g = _inter_sq(c, prefix, sq_a, mask, i + 1)
        else:
            g = inter_masked(v, mask, i + 1, p)
        if g > best:
            best = g
            best_pos = i
    return best, best_pos


@njit(cache=True, nogil=True)
def _all_identical(X, rows, cell):
    first = rows[cell[0]]
    for c in range(1, cell.shape[0]):
        r = rows[cell[c]]
        for k in range(X.shape[1]):
            if X[r, k] != X[first, k]:
                return False
    return True


@njit(cache=True, nogil=True)
def _draw_dims(rng, d, mtry):
    perm = np.arange(d)
    for i in range(mtry):
        j = rng.integers(i, d)
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t
    return np.sort(perm[:mtry])


@njit(cache=True, nogil=True)
def grow_tree(X, Y, rows, nodesize, mtry, mode, criterion, p, rng):
    """Grow one tree on the subsample ``rows`` (Algorithm 2 inner loop).

    Cells are processed first-in first-out. Returns flat node arrays
    (dim, thr, left, right, leaf_start, leaf_len) and ``order``, the slot
    permutation in which every leaf is a contiguous segment.
    """
    a_n = rows.shape[0]
    d = X.shape[1]
    dy = Y.shape[1]
    cap = 2 * a_n
    dim = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    leaf_start = np.full(cap, -1, dtype=np.int64)
    leaf_len = np.zeros(cap, dtype=np.int64)
    order = np.arange(a_n)
    buf = np.empty(a_n, dtype=np.int64)

    q_node = np.empty(cap, dtype=np.int64)
    q_start = np.empty(cap, dtype=np.int64)
    q_end = np.empty(cap, dtype=np.int64)
    q_node[0] = 0
    q_start[0] = 0
    q_end[0] = a_n
    head = 0
    tail = 1
    n_nodes = 1

    while head < tail:
        node = q_node[head]
        s = q_start[head]
        e = q_end[head]
        head += 1
        cell = order[s:e]
        n = e - s

        best_dim = -1
        best_thr = 0.0
        if n >= nodesize and not _all_identical(X, rows, cell):
            if mode == MODE_MONDRIAN:
                lo = np.empty(d)
                hi = np.empty(d)
                total = 0.0
                for k in range(d):
                    lo[k] = np.inf
                    hi[k] = -np.inf
                    for c in range(n):
                        xv = X[rows[cell[c]], k]
                        if xv < lo[k]:
                            lo[k] = xv
                        if xv > hi[k]:
                            hi[k] = xv
                    total += hi[k] - lo[k]
                u = rng.random() * total
                acc = 0.0
                for k in range(d):
                    ext = hi[k] - lo[k]
                    if ext <= 0.0:
                        continue
                    acc += ext
                    best_dim = k
                    if u < acc:
                        break
                k = best_dim
                best_thr = lo[k] + rng.random() * (hi[k] - lo[k])
                if best_thr >= hi[k]:
                    best_thr = lo[k]
            else:
                dims = _draw_dims(rng, d, mtry)
                ys = np.empty((n, dy))
                for c in range(n):
                    for k in range(dy):
                        ys[c, k] = Y[rows[cell[c]], k]
                v = np.empty(0)
                rank = np.empty(0, dtype=np.int64)
                if criterion == CRIT_INTER:
                    yo = np.argsort(ys[:, 0], kind="mergesort")
                    v = ys[yo, 0]
                    rank = np.empty(n, dtype=np.int64)
                    for r in range(n):
                        rank[yo[r]] = r
                best = -np.inf
                xcol = np.empty(n)
                for kk in range(mtry):
                    k = dims[kk]
                    for c in range(n):
                        xcol[c] = X[rows[cell[c]], k]
                    if mode == MODE_WRF:
                        xo = np.argsort(xcol, kind="mergesort")
                        xs = xcol[xo]
                        if criterion == CRIT_INTRA:
                            g, pos = intra_scan(ys[xo], xs)
                        else:
                            g, pos = inter_scan(v, rank, xo, xs, p)
                        if pos >= 0 and g > best:
                            best = g
                            best_dim = k
                            best_thr = midpoint(xs[pos], xs[pos + 1])
                    else:
                        lo = xcol.min()
                        hi = xcol.max()
                        if hi <= lo:
                            continue
                        t = lo + rng.random() * (hi - lo)
                        if t >= hi:
                            t = lo
                        in_left = xcol <= t
                        if criterion == CRIT_INTRA:
                            g = intra_partition_gain(ys, in_left)
                        else:
                            mask = np.zeros(n, dtype=np.bool_)
                            nl = 0
                            for c in range(n):
                                if in_left[c]:
                                    mask[rank[c]] = True
                                    nl += 1
                            g = inter_masked(v, mask, nl, p)
                        if g > best:
                            best = g
                            best_dim = k
                            best_thr = t

        if best_dim < 0:
            leaf_start[node] = s
            leaf_len[node] = n
            continue

        # stable partition of the cell segment
        nl = 0
        for c in range(n):
            if X[rows[cell[c]], best_dim] <= best_thr:
                buf[nl] = cell[c]
                nl += 1
        m = nl
        for c in range(n):
            if X[rows[cell[c]], best_dim] > best_thr:
                buf[m] = cell[c]
                m += 1
        for c in range(n):
            order[s + c] = buf[c]

        dim[node] = best_dim
        thr[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        q_node[tail] = n_nodes
        q_start[tail] = s
        q_end[tail] = s + nl
        tail += 1
        q_node[tail] = n_nodes + 1
        q_start[tail] = s + nl
        q_end[tail] = e
        tail += 1
        n_nodes += 2

    return (dim[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes],
            leaf_start[:n_nodes], leaf_len[:n_nodes], order)


@njit(cache=True, nogil=True)
def route(dim, thr, left, right, x):
    node = 0
    while left[node] >= 0:
        if x[dim[node]] <= thr[node]:
            node = left[node]
        else:
            node = right[node]
    return node


@njit(cache=True, nogil=True)
def forest_weights(node_off, dim, thr, left, right, leaf_start, leaf_len,
                   order, sub_off, subsample, tree_mask, n, x):
    """Accumulate alpha_i(x) over the trees selected by ``tree_mask``.

    Weights are unnormalized by the number of selected trees; callers divide.
    """
    alpha = np.zeros(n)
    n_trees = node_off.shape[0] - 1
    for j in range(n_trees):
        if not tree_mask[j]:
            continue
        a = node_off[j]
        b = node_off[j + 1]
        leaf = route(dim[a:b], thr[a:b], left[a:b], right[a:b], x)
        cnt = leaf_len[a + leaf]
        if cnt <= 0:
            continue
        st = leaf_start[a + leaf]
        base = sub_off[j]
        w = 1.0 / cnt
        for c in range(st, st + cnt):
            alpha[subsample[base + order[base + c]]] += w
    return alpha
