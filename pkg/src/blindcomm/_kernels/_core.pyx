# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: SBM draw + Horner filter, and nearest-centroid assignment."""

from libc.stdlib cimport malloc, free


def sbm_filter_batch(const double[:, ::1] u, const double[::1] pair_prob,
                     const double[::1] coeffs, const double[:, ::1] w,
                     double[:, ::1] out):
    """For each row d: edge (i, j) exists iff u[d, p] < pair_prob[p], pairs in
    row-major upper-triangle order; out[d] = sum_k coeffs[k] L^k w[d]."""
    cdef Py_ssize_t c = w.shape[0], n = w.shape[1]
    cdef Py_ssize_t npairs = u.shape[1], T = coeffs.shape[0] - 1
    cdef Py_ssize_t d, i, j, p, t, q
    cdef double acc
    if npairs != n * (n - 1) // 2 or pair_prob.shape[0] != npairs:
        raise ValueError("pair arrays do not match node count")
    if u.shape[0] != c or out.shape[0] != c or out.shape[1] != n:
        raise ValueError("batch shapes disagree")

    cdef int *deg = <int *> malloc(n * sizeof(int))
    cdef Py_ssize_t *ptr = <Py_ssize_t *> malloc((n + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *fill = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef int *nbr = <int *> malloc((2 * npairs + 1) * sizeof(int))
    cdef double *y = <double *> malloc(n * sizeof(double))
    cdef double *z = <double *> malloc(n * sizeof(double))
    if not (deg and ptr and fill and nbr and y and z):
        free(deg); free(ptr); free(fill); free(nbr); free(y); free(z)
        raise MemoryError()
    try:
        with nogil:
            for d in range(c):
                for i in range(n):
                    deg[i] = 0
                p = 0
                for i in range(n - 1):
                    for j in range(i + 1, n):
                        if u[d, p] < pair_prob[p]:
                            deg[i] += 1
                            deg[j] += 1
                        p += 1
                ptr[0] = 0
                for i in range(n):
                    ptr[i + 1] = ptr[i] + deg[i]
                    fill[i] = ptr[i]
                p = 0
                for i in range(n - 1):
                    for j in range(i + 1, n):
                        if u[d, p] < pair_prob[p]:
                            nbr[fill[i]] = <int> j
                            fill[i] += 1
                            nbr[fill[j]] = <int> i
                            fill[j] += 1
                        p += 1
                for i in range(n):
                    y[i] = coeffs[T] * w[d, i]
                for t in range(T - 1, -1, -1):
                    for i in range(n):
                        acc = deg[i] * y[i]
                        for q in range(ptr[i], ptr[i + 1]):
                            acc -= y[nbr[q]]
                        z[i] = acc + coeffs[t] * w[d, i]
                    for i in range(n):
                        y[i] = z[i]
                for i in range(n):
                    out[d, i] = y[i]
    finally:
        free(deg); free(ptr); free(fill); free(nbr); free(y); free(z)


def assign_nearest(const double[:, ::1] X, const double[:, ::1] C,
                   long[::1] labels, double[::1] mindist):
    """Squared-distance nearest centroid, ties to the lowest index. Returns inertia."""
    cdef Py_ssize_t n = X.shape[0], dim = X.shape[1], k = C.shape[0]
    cdef Py_ssize_t i, c, a
    cdef double best, dist, diff, total = 0.0
    cdef long arg
    if C.shape[1] != dim or labels.shape[0] != n or mindist.shape[0] != n:
        raise ValueError("shape mismatch")
    with nogil:
        for i in range(n):
            best = 0.0
            arg = -1
            for c in range(k):
                dist = 0.0
                for a in range(dim):
                    diff = X[i, a] - C[c, a]
                    dist += diff * diff
                if arg < 0 or dist < best:
                    best = dist
                    arg = c
            labels[i] = arg
            mindist[i] = best
            total += best
    return total
