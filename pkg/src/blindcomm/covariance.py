"""Sample second moments, the two-block covariance model and its spectrum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ._rng import substream
from .filters import GraphFilter, symmetric_norm
from .graph_model import (
    Partition,
    PlantedPartitionParams,
    build_planted_partition,
    dense_laplacian,
    sample_adjacency,
)
from .signals import iter_signal_chunks

DENSE_CAP = 512


class CovarianceAccumulator:
    """Running ``sum y y^T`` (and ``sum y``) over observed signals; mergeable."""

    def __init__(self, n: int):
        self.n = n
        self.count = 0
        self.sum_outer = np.zeros((n, n))
        self.sum_vec = np.zeros(n)

    def accumulate(self, y) -> "CovarianceAccumulator":
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise ValueError(f"expected a length-{self.n} signal, got shape {y.shape}")
        self.sum_outer += np.outer(y, y)
        self.sum_vec += y
        self.count += 1
        return self

    def accumulate_many(self, Y) -> "CovarianceAccumulator":
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[1] != self.n:
            raise ValueError(f"expected rows of length {self.n}, got shape {Y.shape}")
        self.sum_outer += Y.T @ Y
        self.sum_vec += Y.sum(axis=0)
        self.count += Y.shape[0]
        return self

    def merge(self, other: "CovarianceAccumulator") -> "CovarianceAccumulator":
        if other.n != self.n:
            raise ValueError("cannot merge accumulators of different size")
        out = CovarianceAccumulator(self.n)
        out.count = self.count + other.count
        out.sum_outer = self.sum_outer + other.sum_outer
        out.sum_vec = self.sum_vec + other.sum_vec
        return out

    def finalize(self, center: bool = False) -> np.ndarray:
        """Uncentered ``(1/m) sum y y^T``; ``center=True`` subtracts the sample mean."""
        if self.count < 1:
            raise ValueError("no samples accumulated")
        S = self.sum_outer / self.count
        if center:
            mu = self.sum_vec / self.count
            S = S - np.outer(mu, mu)
        return 0.5 * (S + S.T)


def merge(a: CovarianceAccumulator, b: CovarianceAccumulator) -> CovarianceAccumulator:
    return a.merge(b)


def sample_covariance(signals, center: bool = False) -> np.ndarray:
    signals = np.asarray(signals, dtype=float)
    return CovarianceAccumulator(signals.shape[1]).accumulate_many(signals).finalize(center)


def streamed_covariance(model, filt, spec, m, master_seed, parallelism=1, center=False):
    """Sample covariance of a simulated batch without keeping the signals."""
    acc = CovarianceAccumulator(model.n)
    for _, block in iter_signal_chunks(model, filt, spec, m, master_seed, parallelism):
        acc.accumulate_many(block)
    return acc.finalize(center)


# -- filter moments --------------------------------------------------------

P_NAMES = ("p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8")


@dataclass(frozen=True)
class PParams:
    values: np.ndarray
    stderr: np.ndarray
    trials: int
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def __getattr__(self, name):
        if name in P_NAMES:
            return float(self.values[P_NAMES.index(name)])
        if name.startswith("stderr") and name[6:].isdigit():
            return float(self.stderr[int(name[6:]) - 1])
        raise AttributeError(name)

    @classmethod
    def from_values(cls, **kw) -> "PParams":
        vals = np.array([float(kw.get(k, 0.0)) for k in P_NAMES])
        return cls(vals, np.zeros(8), 0)


def _moments_all(H, half):
    """Average of every product pattern over all index triples respecting it."""
    n = 2 * half
    d = np.diag(H)
    same = np.zeros((n, n), dtype=bool)
    same[:half, :half] = same[half:, half:] = True
    off = ~np.eye(n, dtype=bool)
    within = same & off
    across = ~same
    H2 = H * H
    p1 = np.mean(d * d)
    p2 = H2[within].mean()
    p3 = H2[across].mean()
    # Q[i, j] = H_ii H_ij
    Q = d[:, None] * H
    p5 = Q[within].mean()
    p7 = Q[across].mean()
    blocks = (slice(0, half), slice(half, n))
    s4 = s6 = 0.0
    for b, o in (blocks, blocks[::-1]):
        Hbb = H[b, b]
        Hbo = H[b, o]
        inner = Hbb @ Hbb
        # drop l = i and l = j from the within-block sum
        inner = inner - d[b][:, None] * Hbb - Hbb * d[b][None, :]
        mask = ~np.eye(half, dtype=bool)
        s4 += inner[mask].sum()
        s6 += (Hbo @ Hbo.T)[mask].sum()
    pairs_within = 2 * half * (half - 1)
    p4 = s4 / (pairs_within * (half - 2))
    p6 = s6 / (pairs_within * half)
    S = H @ H
    cross = S[:half, half:] - d[:half, None] * H[:half, half:] - H[:half, half:] * d[None, half:]
    p8 = cross.mean() / (n - 2)
    return np.array([p1, p2, p3, p4, p5, p6, p7, p8])


def _moments_at(H, triples):
    """Products at explicit index patterns: rows (i, j, l) per parameter."""
    out = np.empty(8)
    (i1,), (i2, j2), (i3, j3), (i4, j4, l4), (i5, j5), (i6, j6, l6), (i7, j7), (i8, j8, l8) = triples
    out[0] = H[i1, i1] ** 2
    out[1] = H[i2, j2] ** 2
    out[2] = H[i3, j3] ** 2
    out[3] = H[i4, l4] * H[j4, l4]
    out[4] = H[i5, i5] * H[j5, i5]
    out[5] = H[i6, l6] * H[j6, l6]
    out[6] = H[i7, i7] * H[j7, i7]
    out[7] = H[i8, l8] * H[j8, l8]
    return out


def _representative_triples(half):
    a0, a1, a2 = 0, 1, 2
    b0 = half
    return ((a0,), (a0, a1), (a0, b0), (a0, a1, a2), (a0, a1), (a0, a1, b0), (a0, b0), (a0, b0, a1))


def _random_triples(rng, half):
    n = 2 * half

    def block_of(i):
        return 0 if i < half else 1

    def pick(blk, exclude=()):
        while True:
            x = int(rng.integers(blk * half, (blk + 1) * half))
            if x not in exclude:
                return x

    i = int(rng.integers(n))
    bi, bo = block_of(i), 1 - block_of(i)
    j_same = pick(bi, (i,))
    l_same = pick(bi, (i, j_same))
    j_other = pick(bo)
    l_other = pick(bo)
    while True:
        l8 = int(rng.integers(n))
        if l8 not in (i, j_other):
            break
    return ((i,), (i, j_same), (i, j_other), (i, j_same, l_same), (i, j_same),
            (i, j_same, l_other), (i, j_other), (i, j_other, l8))


def estimate_p_params(params: PlantedPartitionParams, filt: GraphFilter, trials: int, seed,
                      mode: str = "all", random_triples: int = 8) -> PParams:
    """Monte-Carlo estimates of the eight filter-entry moments.

    ``mode="all"`` averages each pattern over every index triple that respects
    it (lowest variance); ``"representative"`` uses one fixed triple per
    pattern; ``"sampled"`` averages the fixed triple with ``random_triples``
    random pattern-respecting triples.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if params.n < 6:
        raise ValueError("need n >= 6 so that every index pattern exists")
    if params.n > DENSE_CAP:
        raise ValueError(f"dense filter matrices are capped at n={DENSE_CAP}")
    if mode not in ("all", "representative", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    model = build_planted_partition(params)
    half = params.n // 2
    fixed = _representative_triples(half)
    samples = np.empty((trials, 8))
    for t in range(trials):
        rng = substream(seed, "pparams", t)
        H = filt.dense(dense_laplacian(sample_adjacency(model, rng)))
        if mode == "all":
            samples[t] = _moments_all(H, half)
        elif mode == "representative":
            samples[t] = _moments_at(H, fixed)
        else:
            acc = _moments_at(H, fixed)
            for _ in range(random_triples):
                acc = acc + _moments_at(H, _random_triples(rng, half))
            samples[t] = acc / (random_triples + 1)
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(8)
    return PParams(mean, se, trials, samples)


def _c_weights(n):
    half = n / 2
    #            p1   p2        p3    p4        p5   p6    p7   p8
    return np.array([
        [0, 0, 0, half - 2, 2, half, 0, 0],
        [0, 0, 0, 0, 0, 0, 2, 2 * (half - 1)],
        [1, half - 1, half, 0, 0, 0, 0, 0],
    ])


def c_constants(p: PParams, n: int):
    if n % 2 or n < 4:
        raise ValueError("c-constants need an even n >= 4")
    c1, c2, c3 = _c_weights(n) @ p.values
    return float(c1), float(c2), float(c3)


def c_constants_stderr(p: PParams, n: int) -> np.ndarray:
    """Standard errors of ``(c1, c2, c3, c1 - c2)`` from the per-trial samples."""
    if p.samples is None or p.trials < 2:
        raise ValueError("need per-trial samples from at least two trials")
    c = p.samples @ _c_weights(n).T
    c = np.column_stack([c, c[:, 0] - c[:, 1]])
    return c.std(axis=0, ddof=1) / math.sqrt(p.trials)


@dataclass(frozen=True)
class TheoreticalCovariance:
    c1: float
    c2: float
    c3: float
    n: int
    partition: Partition

    def matrix(self) -> np.ndarray:
        G = self.partition.indicator()
        B = np.array([[self.c1, self.c2], [self.c2, self.c1]])
        return (self.c3 - self.c1) * np.eye(self.n) + G @ B @ G.T


def theoretical_covariance(c1, c2, c3, n) -> TheoreticalCovariance:
    if n % 2 or n < 2:
        raise ValueError("two equal blocks need an even n")
    return TheoreticalCovariance(float(c1), float(c2), float(c3), n, Partition.blocks(n, 2))


class Spectrum(NamedTuple):
    mu1: float
    mu2: float
    mu_rest: float
    recoverable: bool


def closed_form_spectrum(c1, c2, c3, n) -> Spectrum:
    """Eigenvalues for the all-ones vector, the block-sign vector, and the rest."""
    if n % 2:
        raise ValueError("n must be even")
    half = n / 2
    return Spectrum(half * (c1 + c2) + (c3 - c1), half * (c1 - c2) + (c3 - c1), c3 - c1,
                    bool(c1 > abs(c2)))


# -- concentration -----------------------------------------------------------

@dataclass
class ProbeResult:
    raw: list  # (m, trial, error)
    summary: list  # (m, mean, std)
    slope: float
    intercept: float


def concentration_probe(model, filt, spec, m_grid, reference, trials, seed,
                        tol=1e-6, parallelism=1) -> ProbeResult:
    """Spectral-norm distance of the sample covariance to ``reference`` over an ``m`` grid."""
    m_grid = [int(m) for m in m_grid]
    if not m_grid or any(m < 1 for m in m_grid) or any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ValueError("m_grid must be a nonempty strictly ascending list of positive sizes")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    reference = np.asarray(reference, dtype=float)
    raw = []
    summary = []
    for m in m_grid:
        errs = []
        for t in range(trials):
            cell = substream(seed, "probe", m, t).integers(2**63)
            C = streamed_covariance(model, filt, spec, m, int(cell), parallelism)
            err = symmetric_norm(C - reference, tol=tol, seed=int(cell)).value
            raw.append((m, t, err))
            errs.append(err)
        errs = np.array(errs)
        summary.append((m, float(errs.mean()), float(errs.std(ddof=1)) if trials > 1 else 0.0))
    if len(m_grid) > 1:
        slope, intercept = np.polyfit(np.log([s[0] for s in summary]),
                                      np.log([s[1] for s in summary]), 1)
    else:
        slope, intercept = float("nan"), float("nan")
    return ProbeResult(raw, summary, float(slope), float(intercept))


def write_probe_csv(result: ProbeResult, raw_path, summary_path) -> None:
    import csv

    with open(raw_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "trial", "spectral_error"])
        w.writerows(result.raw)
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "mean", "std", "slope_fit"])
        for m, mean, std in result.summary:
            w.writerow([m, mean, std, ""])
        w.writerow(["", "", "", result.slope])
