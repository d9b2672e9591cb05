"""Stochastic block models, adjacency sampling and combinatorial Laplacians."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ._rng import as_generator


@dataclass(frozen=True)
class Partition:
    """Group labels ``0..k-1`` for ``n`` nodes."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be a vector")
        if self.k < 1:
            raise ValueError("k must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in 0..{self.k - 1}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size

    def indicator(self) -> np.ndarray:
        G = np.zeros((self.n, self.k))
        G[np.arange(self.n), self.labels] = 1.0
        return G

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    @classmethod
    def blocks(cls, n: int, k: int = 2) -> "Partition":
        if n % k:
            raise ValueError(f"n={n} is not divisible into {k} equal blocks")
        return cls(np.repeat(np.arange(k), n // k), k)


@dataclass(frozen=True)
class SbmModel:
    omega: np.ndarray
    partition: Partition

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float)
        k = self.partition.k
        if omega.shape != (k, k):
            raise ValueError(f"omega must be {k}x{k}, got {omega.shape}")
        if not np.array_equal(omega, omega.T):
            raise ValueError("omega must be symmetric")
        if not np.all((omega >= 0) & (omega <= 1)):
            raise ValueError("omega entries must lie in [0, 1]")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        if np.any(self.partition.sizes() == 0):
            raise ValueError("every group must be nonempty")

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def k(self) -> int:
        return self.partition.k

    def pair_probabilities(self) -> np.ndarray:
        """Edge probability of each pair ``i < j`` in row-major upper-triangle order."""
        iu, ju = np.triu_indices(self.n, 1)
        g = self.partition.labels
        return np.ascontiguousarray(self.omega[g[iu], g[ju]])

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        h.update(self.omega.tobytes())
        h.update(self.partition.labels.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class PlantedPartitionParams:
    n: int
    a: float
    b: float
    gamma: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValueError(f"planted partition needs an even n >= 2, got {self.n}")
        for name in ("a", "b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")

    @classmethod
    def from_gamma(cls, n: int, gamma: float) -> "PlantedPartitionParams":
        """``a = 4 ln(n) / n`` within blocks and ``b = gamma * a`` across."""
        a = 4.0 * math.log(n) / n
        return cls(n=n, a=a, b=gamma * a, gamma=gamma)


def build_planted_partition(params: PlantedPartitionParams) -> SbmModel:
    omega = np.array([[params.a, params.b], [params.b, params.a]])
    return SbmModel(omega, Partition.blocks(params.n, 2))


@dataclass(frozen=True)
class AdjacencySample:
    """Simple undirected graph stored as its edge list ``rows[e] < cols[e]``, ascending."""

    n: int
    rows: np.ndarray
    cols: np.ndarray

    @property
    def num_edges(self) -> int:
        return self.rows.size

    def to_sparse(self) -> sp.csr_array:
        data = np.ones(2 * self.num_edges)
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        return sp.csr_array((data, (r, c)), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        A[self.rows, self.cols] = 1.0
        A[self.cols, self.rows] = 1.0
        return A

    def degrees(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.n) + np.bincount(self.cols, minlength=self.n)

    @classmethod
    def from_dense(cls, A) -> "AdjacencySample":
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(A, A.T) or np.any(np.diag(A) != 0) or not np.all(np.isin(A, (0, 1))):
            raise ValueError("adjacency must be symmetric, binary, with zero diagonal")
        rows, cols = np.nonzero(np.triu(A, 1))
        return cls(A.shape[0], rows.astype(np.int64), cols.astype(np.int64))

    def write_edgelist(self, path) -> None:
        with open(path, "w") as fh:
            for i, j in zip(self.rows.tolist(), self.cols.tolist()):
                fh.write(f"{i} {j}\n")


def _edges_from_uniforms(n, u, pair_prob):
    iu, ju = np.triu_indices(n, 1)
    keep = u < pair_prob
    return AdjacencySample(n, iu[keep].astype(np.int64), ju[keep].astype(np.int64))


def sample_adjacency(model: SbmModel, seed) -> AdjacencySample:
    """One SBM draw. Each pair ``i < j`` gets one uniform; no self-loops."""
    rng = as_generator(seed)
    pair_prob = model.pair_probabilities()
    return _edges_from_uniforms(model.n, rng.random(pair_prob.size), pair_prob)


def laplacian(adj: AdjacencySample) -> sp.csr_array:
    A = adj.to_sparse()
    L = sp.diags_array(A.sum(axis=1).astype(float)) - A
    return sp.csr_array(L)


def dense_laplacian(adj: AdjacencySample) -> np.ndarray:
    A = adj.to_dense()
    return np.diag(A.sum(axis=1)) - A


def expected_adjacency(model: SbmModel) -> np.ndarray:
    """``G Omega G^T`` including its diagonal; sampled graphs never carry self-loops."""
    G = model.partition.indicator()
    return G @ model.omega @ G.T
