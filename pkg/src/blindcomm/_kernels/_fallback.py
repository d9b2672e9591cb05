"""Pure numpy versions of the compiled kernels (same contracts, same outputs up to rounding)."""

import numpy as np


def sbm_filter_batch(u, pair_prob, coeffs, w, out):
    c, n = w.shape
    npairs = n * (n - 1) // 2
    if u.shape[1] != npairs or pair_prob.shape[0] != npairs:
        raise ValueError("pair arrays do not match node count")
    if u.shape[0] != c or out.shape != (c, n):
        raise ValueError("batch shapes disagree")
    iu, ju = np.triu_indices(n, 1)
    A = np.zeros((c, n, n))
    A[:, iu, ju] = u < pair_prob
    A += A.transpose(0, 2, 1)
    deg = A.sum(axis=2)
    y = coeffs[-1] * w
    for h in coeffs[-2::-1]:
        y = deg * y - np.einsum("cij,cj->ci", A, y) + h * w
    out[...] = y


def assign_nearest(X, C, labels, mindist):
    if C.shape[1] != X.shape[1] or labels.shape[0] != X.shape[0]:
        raise ValueError("shape mismatch")
    d2 = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    labels[...] = np.argmin(d2, axis=1)
    mindist[...] = d2[np.arange(X.shape[0]), labels]
    return float(mindist.sum())
