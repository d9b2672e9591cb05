"""Eigenpairs, k-means and blind partitioning from a sample covariance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from ._rng import substream
from .covariance import CovarianceAccumulator, sample_covariance
from .errors import ConvergenceError
from .graph_model import Partition
from .signals import ObservationBatch

DENSE_LIMIT = 512


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray  # descending
    vectors: np.ndarray  # n x k, orthonormal columns
    residuals: np.ndarray


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _deflated_power(C, k, tol, max_iter, seed):
    n = C.shape[0]
    # shift so the algebraically largest eigenvalues dominate in magnitude
    shift = np.abs(C).sum(axis=1).max()
    vals, vecs = [], []
    for i in range(k):
        rng = substream(seed, "eig", i)
        v = rng.standard_normal(n)
        Q = np.array(vecs).T if vecs else np.zeros((n, 0))
        lam = 0.0
        for _ in range(max_iter):
            v -= Q @ (Q.T @ v)
            v /= np.linalg.norm(v)
            z = C @ v + shift * v
            lam = v @ z - shift
            r = np.linalg.norm(z - shift * v - lam * v)
            v = z
            if r <= tol * max(shift, 1.0):
                break
        v -= Q @ (Q.T @ v)
        v /= np.linalg.norm(v)
        vals.append(float(v @ C @ v))
        vecs.append(v)
    return np.array(vals), np.array(vecs).T


def top_k_eigenpairs(C, k: int, tol: float = 1e-8, max_iter: int = 20000, seed=0,
                     method: str = "auto") -> EigenPairs:
    """Largest-``k`` eigenpairs (algebraic order) of a symmetric matrix.

    Dense LAPACK for ``n <= 512`` (or ``method="dense"``), deflated power
    iteration otherwise. Each vector's largest-magnitude entry is positive.
    Raises :class:`ConvergenceError` if a residual exceeds ``tol * ||C||``.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if C.ndim != 2 or C.shape[1] != n:
        raise ValueError("matrix must be square")
    scale = max(np.abs(C).max(), 1.0)
    if np.abs(C - C.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "power"
    if method == "dense":
        w, V = np.linalg.eigh(0.5 * (C + C.T))
        vals, vecs = w[::-1][:k], V[:, ::-1][:, :k]
    elif method == "power":
        vals, vecs = _deflated_power(C, k, tol * 1e-2, max_iter, seed)
        order = np.argsort(-vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    else:
        raise ValueError(f"unknown method {method!r}")
    vecs = _fix_signs(vecs)
    norm = max(np.abs(w).max() if method == "dense" else np.linalg.norm(C, 2), np.finfo(float).tiny)
    residuals = np.linalg.norm(C @ vecs - vecs * vals, axis=0)
    if np.any(residuals > tol * norm):
        raise ConvergenceError("eigenpair residuals above tolerance", residuals)
    return EigenPairs(np.asarray(vals), vecs, residuals)


# -- k-means -------------------------------------------------------------

@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 20
    max_iter: int = 300
    tol: float = 1e-9


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    restarts_used: int
    seed: object
    iterations: int = 0
    inertia_history: tuple = ()


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers[c] = X[idx]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def _repair_empty(labels, dist, k):
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        # farthest point from its centroid among non-singleton clusters, lowest index on ties
        far = int(np.argmax(np.where(counts[labels] > 1, dist, -1.0)))
        counts[labels[far]] -= 1
        labels[far] = empty
        dist[far] = 0.0
        counts[empty] = 1
    return counts


def _lloyd(X, centers, cfg):
    n, k = X.shape[0], centers.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    history = []
    it = 0
    for it in range(1, cfg.max_iter + 1):
        history.append(_kernels.assign_nearest(X, centers, labels, dist))
        counts = _repair_empty(labels, dist, k)
        new = np.zeros_like(centers)
        np.add.at(new, labels, X)
        new /= counts[:, None]
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift <= cfg.tol:
            break
    inertia = float(((X - centers[labels]) ** 2).sum())
    history.append(inertia)
    return labels, centers, inertia, it, history


def kmeans(X, k: int, cfg: KMeansConfig = KMeansConfig(), seed=0) -> ClusterResult:
    """Lloyd iterations from k-means++ seeds, best of ``cfg.restarts`` by inertia."""
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite coordinates")
    best = None
    for r in range(max(cfg.restarts, 1)):
        rng = substream(seed, "kmeans", r)
        run = _lloyd(X, _kmeanspp(X, k, rng), cfg)
        if best is None or run[2] < best[2]:
            best = run
    labels, centers, inertia, it, history = best
    return ClusterResult(labels, centers, inertia, max(cfg.restarts, 1), seed, it, tuple(history))


# -- Algorithm 1 ---------------------------------------------------------------

@dataclass(frozen=True)
class PartitionResult:
    partition: Partition
    eigenvalues: np.ndarray
    inertia: float
    eigengap: float
    low_confidence: bool
    num_groups_hint: int
    seed: object
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def labels(self) -> np.ndarray:
        return self.partition.labels

    def diagnostics(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "inertia": self.inertia,
            "eigengap": self.eigengap,
            "low_confidence": self.low_confidence,
            "num_groups_hint": self.num_groups_hint,
            "residuals": self.residuals.tolist(),
            "seed": self.seed if isinstance(self.seed, (int, str)) else repr(self.seed),
        }


def estimate_num_groups(values, max_k: Optional[int] = None, ratio: float = 0.5,
                        eps: float = 1e-12) -> int:
    """Number of leading eigenvalues standing above the bulk.

    Relative gaps ``(l_i - l_{i+1}) / max(l_{i+1}, eps)`` are computed for
    ``i <= max_k``; the estimate is the largest ``i`` whose gap is at least
    ``ratio`` times the largest gap. Returns 1 when there is no gap.
    """
    lam = np.asarray(values, dtype=float)
    if lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    max_k = lam.size - 1 if max_k is None else min(max_k, lam.size - 1)
    gaps = (lam[:max_k] - lam[1:max_k + 1]) / np.maximum(lam[1:max_k + 1], eps)
    top = gaps.max()
    if top <= eps:
        return 1
    return int(np.flatnonzero(gaps >= ratio * top).max()) + 1


def _covariance_from(source, center):
    if isinstance(source, ObservationBatch):
        if source.m < 1:
            raise ValueError("batch is empty")
        return sample_covariance(source.signals, center)
    if isinstance(source, CovarianceAccumulator):
        return source.finalize(center)
    C = np.asarray(source, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("covariance must be a square matrix")
    return C


def blind_partition(source, k: int, cfg: KMeansConfig = KMeansConfig(), seed=0, *,
                    center: bool = False, normalize_rows: bool = False,
                    gap_threshold: float = 1e-3) -> PartitionResult:
    """Sample covariance, top-``k`` eigenvectors, k-means on their rows.

    ``source`` is an :class:`ObservationBatch`, a :class:`CovarianceAccumulator`
    or an already formed covariance matrix.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    C = _covariance_from(source, center)
    n = C.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    kk = min(k + 1, n)
    pairs = top_k_eigenpairs(C, kk, seed=seed)
    V = pairs.vectors[:, :k]
    if normalize_rows:
        norms = np.linalg.norm(V, axis=1, keepdims=True)
        V = V / np.where(norms > 0, norms, 1.0)
    res = kmeans(V, k, cfg, seed)
    if kk > k:
        lo = pairs.values[k]
        gap = float((pairs.values[k - 1] - lo) / max(abs(lo), np.finfo(float).tiny))
    else:
        gap = math.inf
    hint = estimate_num_groups(pairs.values, max_k=k) if kk > 1 else 1
    return PartitionResult(
        partition=Partition(res.labels, k),
        eigenvalues=pairs.values,
        inertia=res.inertia,
        eigengap=gap,
        low_confidence=bool(gap < gap_threshold),
        num_groups_hint=hint,
        seed=seed,
        residuals=pairs.residuals,
    )
