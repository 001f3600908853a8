# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Contract and arithmetic order mirror ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt, fabs
from libc.stdlib cimport qsort

cnp.import_array()

cdef enum:
    MAXD = 8
cdef int RECOMPUTE_EVERY = 10000


cdef struct Grid:
    int n
    int d
    int side
    double cs
    int *head
    int *nxt
    int *prv
    int *bucket
    int *big
    int nbig


cdef inline long _hash(Grid *g, long *cell) nogil:
    cdef long h = 0
    cdef int i
    cdef long c
    for i in range(g.d):
        c = cell[i] % g.side
        if c < 0:
            c += g.side
        h = h * g.side + c
    return h


cdef inline long _bucket_of(Grid *g, double *x) nogil:
    cdef long cell[MAXD]
    cdef int i
    for i in range(g.d):
        cell[i] = <long>floor(x[i] / g.cs)
    return _hash(g, cell)


cdef inline void _link(Grid *g, int i, long b) nogil:
    g.bucket[i] = b
    g.prv[i] = -1
    g.nxt[i] = g.head[b]
    if g.head[b] >= 0:
        g.prv[g.head[b]] = i
    g.head[b] = i


cdef inline void _unlink(Grid *g, int i) nogil:
    cdef long b = g.bucket[i]
    if g.prv[i] >= 0:
        g.nxt[g.prv[i]] = g.nxt[i]
    else:
        g.head[b] = g.nxt[i]
    if g.nxt[i] >= 0:
        g.prv[g.nxt[i]] = g.prv[i]


cdef class _GridStore:
    cdef object head, nxt, prv, bucket, big
    cdef Grid g

    def __init__(self, double[:, ::1] x, double[::1] radii, double cs):
        cdef int n = x.shape[0]
        cdef int d = x.shape[1]
        cdef int side = 4
        while (side * 2) ** d <= 65536 and side < 256:
            side *= 2
        cdef long nb = 1
        cdef int i
        for i in range(d):
            nb *= side
        self.head = np.full(nb, -1, dtype=np.intc)
        self.nxt = np.full(n, -1, dtype=np.intc)
        self.prv = np.full(n, -1, dtype=np.intc)
        self.bucket = np.full(n, -1, dtype=np.intc)
        self.big = np.zeros(n, dtype=np.intc)
        cdef int[::1] hv = self.head
        cdef int[::1] nv = self.nxt
        cdef int[::1] pv = self.prv
        cdef int[::1] bv = self.bucket
        cdef int[::1] gv = self.big
        self.g.n = n
        self.g.d = d
        self.g.side = side
        self.g.cs = cs
        self.g.head = &hv[0]
        self.g.nxt = &nv[0]
        self.g.prv = &pv[0]
        self.g.bucket = &bv[0]
        self.g.big = &gv[0]
        self.g.nbig = 0
        for i in range(n):
            if 2.0 * radii[i] > cs:
                self.g.big[self.g.nbig] = i
                self.g.nbig += 1
                self.g.bucket[i] = -1
            else:
                _link(&self.g, i, _bucket_of(&self.g, &x[i, 0]))


cdef inline void _grid_move(Grid *g, int i, double *x) nogil:
    if g.bucket[i] < 0:
        return
    cdef long b = _bucket_of(g, x)
    if b != g.bucket[i]:
        _unlink(g, i)
        _link(g, i, b)


cdef inline bint _hits(Grid *g, double[:, ::1] x, double[::1] radii, int k,
                       double *p, double r) nogil:
    """True if a ball of radius r at p overlaps any ball other than k."""
    cdef long lo[MAXD]
    cdef long hi[MAXD]
    cdef long cur[MAXD]
    cdef int d = g.d
    cdef int i, j, m, c
    cdef double reach = r + 0.5 * g.cs
    cdef double rr, d2, diff
    for i in range(d):
        lo[i] = <long>floor((p[i] - reach) / g.cs)
        hi[i] = <long>floor((p[i] + reach) / g.cs)
        if hi[i] - lo[i] + 1 > g.side:
            hi[i] = lo[i] + g.side - 1
        cur[i] = lo[i]
    for m in range(g.nbig):
        j = g.big[m]
        if j == k:
            continue
        rr = r + radii[j]
        d2 = 0.0
        for c in range(d):
            diff = p[c] - x[j, c]
            d2 += diff * diff
        if d2 < rr * rr:
            return True
    while True:
        j = g.head[_hash(g, cur)]
        while j >= 0:
            if j != k:
                rr = r + radii[j]
                d2 = 0.0
                for c in range(d):
                    diff = p[c] - x[j, c]
                    d2 += diff * diff
                if d2 < rr * rr:
                    return True
            j = g.nxt[j]
        i = d - 1
        while i >= 0:
            cur[i] += 1
            if cur[i] <= hi[i]:
                break
            cur[i] = lo[i]
            i -= 1
        if i < 0:
            break
    return False


cdef inline bint _inside(double *x, int d, double r, double w) nogil:
    cdef double lim, s
    cdef int i
    if not x[0] > r:
        return False
    lim = w - r
    if lim <= 0:
        return False
    if d == 2:
        return fabs(x[1]) < lim
    s = 0.0
    for i in range(1, d):
        s += x[i] * x[i]
    return s < lim * lim


def mh_run(double[:, ::1] centers, double[::1] radii, double[::1] drifts,
           double[::1] weights, double[::1] steps, double half_width,
           double cell_size, long[::1] ks, double[:, ::1] noise,
           double[::1] logu, long[::1] acc, long[::1] prop, long rec_every,
           double[:, :, ::1] rec_centers, double[::1] rec_wcm,
           double[:, ::1] best_centers, double[::1] stats):
    cdef int n = centers.shape[0]
    cdef int d = centers.shape[1]
    if d > MAXD:
        raise ValueError("dimension too large for the compiled kernel")
    store = _GridStore(centers, radii, cell_size)
    cdef _GridStore st = store
    cdef Grid *g = &st.g
    cdef double wcm = stats[0]
    cdef double best = stats[1]
    cdef long nrec = 0
    cdef long t, m = ks.shape[0]
    cdef int k, i
    cdef double r, s, dx1, lr
    cdef double new[MAXD]
    cdef bint ok
    with nogil:
        for t in range(m):
            k = <int>ks[t]
            prop[k] += 1
            r = radii[k]
            s = steps[k]
            for i in range(d):
                new[i] = centers[k, i] + s * noise[t, i]
            ok = _inside(new, d, r, half_width)
            if ok:
                ok = not _hits(g, centers, radii, k, new, r)
            if ok:
                dx1 = new[0] - centers[k, 0]
                lr = -2.0 * drifts[k] * dx1
                if lr >= 0.0 or logu[t] < lr:
                    for i in range(d):
                        centers[k, i] = new[i]
                    _grid_move(g, k, new)
                    acc[k] += 1
                    wcm += weights[k] * dx1
                    if wcm < best:
                        best = wcm
                        best_centers[:, :] = centers
            if (t + 1) % RECOMPUTE_EVERY == 0:
                wcm = 0.0
                for i in range(n):
                    wcm += weights[i] * centers[i, 0]
            if rec_every > 0 and (t + 1) % rec_every == 0:
                rec_centers[nrec, :, :] = centers
                rec_wcm[nrec] = wcm
                nrec += 1
    stats[0] = wcm
    stats[1] = best
    return nrec


cdef double *_sort_depth
cdef int *_sort_i
cdef int *_sort_j


cdef int _cmp(const void *a, const void *b) noexcept nogil:
    cdef int p = (<int *>a)[0]
    cdef int q = (<int *>b)[0]
    if _sort_depth[p] > _sort_depth[q]:
        return -1
    if _sort_depth[p] < _sort_depth[q]:
        return 1
    if _sort_i[p] != _sort_i[q]:
        return -1 if _sort_i[p] < _sort_i[q] else 1
    if _sort_j[p] != _sort_j[q]:
        return -1 if _sort_j[p] < _sort_j[q] else 1
    return 0


cdef class _PairBuf:
    cdef object depth_a, i_a, j_a, ord_a
    cdef double *depth
    cdef int *pi
    cdef int *pj
    cdef int *order
    cdef int cap

    def __init__(self, int cap):
        self.cap = 0
        self.grow(cap)

    cdef grow(self, int cap):
        old_d = self.depth_a
        old_i = self.i_a
        old_j = self.j_a
        self.depth_a = np.zeros(cap, dtype=np.float64)
        self.i_a = np.zeros(cap, dtype=np.intc)
        self.j_a = np.zeros(cap, dtype=np.intc)
        self.ord_a = np.zeros(cap, dtype=np.intc)
        if self.cap:
            self.depth_a[:self.cap] = old_d
            self.i_a[:self.cap] = old_i
            self.j_a[:self.cap] = old_j
        cdef double[::1] dv = self.depth_a
        cdef int[::1] iv = self.i_a
        cdef int[::1] jv = self.j_a
        cdef int[::1] ov = self.ord_a
        self.depth = &dv[0]
        self.pi = &iv[0]
        self.pj = &jv[0]
        self.order = &ov[0]
        self.cap = cap


cdef int _collect(double[:, ::1] x, double[::1] radii, double w, int grid_cut,
                  _PairBuf buf, double *worst) except -2:
    """Fill buf with overlapping pairs; returns count (grows buf as needed)."""
    cdef int n = x.shape[0]
    cdef int d = x.shape[1]
    cdef int i, j, c, np_ = 0
    cdef double reach, d2, diff, v, lim, s
    cdef double wst = 0.0
    cdef _GridStore st
    cdef Grid *g = NULL
    cdef long lo[MAXD]
    cdef long hi[MAXD]
    cdef long cur[MAXD]
    cdef int m, q, jj
    cdef double rq
    if n > grid_cut:
        cs = 2.0 * np.max(radii)
        st = _GridStore(x, radii, cs)
        g = &st.g
    for i in range(n):
        if g == NULL:
            for j in range(i + 1, n):
                reach = radii[i] + radii[j]
                d2 = 0.0
                for c in range(d):
                    diff = x[i, c] - x[j, c]
                    d2 += diff * diff
                if d2 < reach * reach:
                    if np_ == buf.cap:
                        buf.grow(2 * buf.cap)
                    buf.depth[np_] = reach - sqrt(d2)
                    buf.pi[np_] = i
                    buf.pj[np_] = j
                    if buf.depth[np_] > wst:
                        wst = buf.depth[np_]
                    np_ += 1
        else:
            rq = radii[i] + 0.5 * g.cs
            for c in range(d):
                lo[c] = <long>floor((x[i, c] - rq) / g.cs)
                hi[c] = <long>floor((x[i, c] + rq) / g.cs)
                if hi[c] - lo[c] + 1 > g.side:
                    hi[c] = lo[c] + g.side - 1
                cur[c] = lo[c]
            while True:
                j = g.head[_hash(g, cur)]
                while j >= 0:
                    if j > i:
                        reach = radii[i] + radii[j]
                        d2 = 0.0
                        for c in range(d):
                            diff = x[i, c] - x[j, c]
                            d2 += diff * diff
                        if d2 < reach * reach:
                            if np_ == buf.cap:
                                buf.grow(2 * buf.cap)
                            buf.depth[np_] = reach - sqrt(d2)
                            buf.pi[np_] = i
                            buf.pj[np_] = j
                            if buf.depth[np_] > wst:
                                wst = buf.depth[np_]
                            np_ += 1
                    j = g.nxt[j]
                c = d - 1
                while c >= 0:
                    cur[c] += 1
                    if cur[c] <= hi[c]:
                        break
                    cur[c] = lo[c]
                    c -= 1
                if c < 0:
                    break
    for i in range(n):
        v = radii[i] - x[i, 0]
        if v > wst:
            wst = v
        lim = w - radii[i]
        if d == 2:
            v = fabs(x[i, 1]) - lim
        else:
            s = 0.0
            for c in range(1, d):
                s += x[i, c] * x[i, c]
            v = sqrt(s) - lim
        if v > wst:
            wst = v
    worst[0] = wst
    return np_


cdef int _project(double[:, ::1] x, double[::1] radii, double[::1] mob, double w,
                  double tol, int max_iters, int grid_cut, _PairBuf buf) except -2:
    global _sort_depth, _sort_i, _sort_j
    cdef int n = x.shape[0]
    cdef int d = x.shape[1]
    cdef int it, np_, p, q, i, j, c, k
    cdef double worst, reach, d2, diff, dist, depth, sh, u, r, lim, s, f
    for it in range(max_iters + 1):
        np_ = _collect(x, radii, w, grid_cut, buf, &worst)
        if worst <= tol:
            return it
        if it == max_iters:
            break
        for p in range(np_):
            buf.order[p] = p
        _sort_depth = buf.depth
        _sort_i = buf.pi
        _sort_j = buf.pj
        qsort(buf.order, np_, sizeof(int), _cmp)
        for q in range(np_):
            p = buf.order[q]
            i = buf.pi[p]
            j = buf.pj[p]
            reach = radii[i] + radii[j]
            d2 = 0.0
            for c in range(d):
                diff = x[i, c] - x[j, c]
                d2 += diff * diff
            if not d2 < reach * reach:
                continue
            dist = sqrt(d2)
            depth = reach - dist
            sh = depth / (mob[i] + mob[j])
            for c in range(d):
                if dist > 0:
                    u = (x[i, c] - x[j, c]) / dist
                else:
                    u = 1.0 if c == 0 else 0.0
                x[i, c] += u * sh * mob[i]
                x[j, c] -= u * sh * mob[j]
        for k in range(n):
            r = radii[k]
            if x[k, 0] < r:
                x[k, 0] = r
            lim = w - r
            if d == 2:
                if x[k, 1] > lim:
                    x[k, 1] = lim
                elif x[k, 1] < -lim:
                    x[k, 1] = -lim
            else:
                s = 0.0
                for c in range(1, d):
                    s += x[k, c] * x[k, c]
                if s > lim * lim:
                    f = lim / sqrt(s)
                    for c in range(1, d):
                        x[k, c] *= f
    return -1


def project(double[:, ::1] x, double[::1] radii, double[::1] mob, double half_width,
            double tol, int max_iters, int grid_cut=64):
    buf = _PairBuf(max(16, 4 * x.shape[0]))
    return _project(x, radii, mob, half_width, tol, max_iters, grid_cut, buf)


def em_run(double[:, ::1] x, double[::1] radii, double[::1] drifts, double[::1] mob,
           double[::1] sig, double dt, double[:, :, ::1] noise, double half_width,
           double tol, int max_iters, long rec_every, double[:, :, ::1] rec_x,
           long[::1] info):
    cdef int n = x.shape[0]
    cdef int d = x.shape[1]
    cdef double sq = sqrt(dt)
    cdef long nrec = 0
    cdef long t, m = noise.shape[0]
    cdef int k, c, used
    buf = _PairBuf(max(16, 4 * n))
    info[0] = -1
    for t in range(m):
        for k in range(n):
            for c in range(d):
                x[k, c] += sig[k] * sq * noise[t, k, c]
            x[k, 0] -= drifts[k] * dt
        used = _project(x, radii, mob, half_width, tol, max_iters, 64, buf)
        if used < 0:
            info[0] = t
            return nrec
        if used > info[1]:
            info[1] = used
        if rec_every > 0 and (t + 1) % rec_every == 0:
            rec_x[nrec, :, :] = x
            nrec += 1
    return nrec


def any_overlap(double[:, ::1] centers, double[::1] radii, double tol):
    cdef int n = centers.shape[0]
    cdef int d = centers.shape[1]
    cdef int i, j, c
    cdef double reach, d2, diff
    # tol only shrinks contact distances, so the unshrunk grid stays a superset
    store = _GridStore(centers, radii, 2.0 * np.max(radii))
    cdef _GridStore st = store
    cdef Grid *g = &st.g
    cdef double p[MAXD]
    for i in range(n):
        for c in range(d):
            p[c] = centers[i, c]
        if _hits_tol(g, centers, radii, i, p, radii[i], tol):
            return True
    return False


cdef bint _hits_tol(Grid *g, double[:, ::1] x, double[::1] radii, int k,
                    double *p, double r, double tol) nogil:
    cdef long lo[MAXD]
    cdef long hi[MAXD]
    cdef long cur[MAXD]
    cdef int d = g.d
    cdef int i, j, c
    cdef double reach = r + 0.5 * g.cs
    cdef double rr, d2, diff
    for i in range(d):
        lo[i] = <long>floor((p[i] - reach) / g.cs)
        hi[i] = <long>floor((p[i] + reach) / g.cs)
        if hi[i] - lo[i] + 1 > g.side:
            hi[i] = lo[i] + g.side - 1
        cur[i] = lo[i]
    while True:
        j = g.head[_hash(g, cur)]
        while j >= 0:
            if j > k:
                rr = r + radii[j] - tol
                if rr > 0:
                    d2 = 0.0
                    for c in range(d):
                        diff = p[c] - x[j, c]
                        d2 += diff * diff
                    if d2 < rr * rr:
                        return True
            j = g.nxt[j]
        i = d - 1
        while i >= 0:
            cur[i] += 1
            if cur[i] <= hi[i]:
                break
            cur[i] = lo[i]
            i -= 1
        if i < 0:
            break
    return False
