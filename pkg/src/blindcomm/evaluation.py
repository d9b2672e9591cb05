"""Partition error, the single-graph spectral clustering baseline, and the m-sweep experiment."""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._rng import substream
from .filters import lowpass_power_filter, paper_alpha
from .graph_model import AdjacencySample, Partition, PlantedPartitionParams, build_planted_partition, dense_laplacian, sample_adjacency
from .signals import ExcitationSpec, generate_batch
from .spectral import KMeansConfig, PartitionResult, blind_partition, kmeans, top_k_eigenpairs

log = logging.getLogger(__name__)

BRUTE_FORCE_MAX_K = 6


@dataclass(frozen=True)
class ErrorReport:
    error_rate: float
    permutation: tuple  # permutation[pred_label] = truth_label
    confusion: np.ndarray  # rows: pred, cols: truth


def _labels(p):
    return p.labels if isinstance(p, (Partition, PartitionResult)) else np.asarray(p, dtype=np.int64)


def _k(p, labels):
    return p.k if isinstance(p, Partition) else (p.partition.k if isinstance(p, PartitionResult) else int(labels.max()) + 1)


def error_rate(pred, truth) -> ErrorReport:
    """Fraction of misplaced nodes under the best matching of predicted to true labels."""
    a, b = _labels(pred), _labels(truth)
    if a.shape != b.shape:
        raise ValueError(f"partitions have different lengths {a.size} and {b.size}")
    k = max(_k(pred, a), _k(truth, b))
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (a, b), 1)
    n = a.size
    if k <= BRUTE_FORCE_MAX_K:
        best, perm = -1, None
        for p in itertools.permutations(range(k)):
            hit = int(conf[np.arange(k), p].sum())
            if hit > best:
                best, perm = hit, p
    else:
        rows, cols = linear_sum_assignment(conf, maximize=True)
        perm = tuple(int(c) for c in cols[np.argsort(rows)])
        best = int(conf[rows, cols].sum())
    return ErrorReport((n - best) / n if n else 0.0, tuple(perm), conf)


@dataclass(frozen=True)
class BaselineResult:
    partition: Partition
    eigenvalues: np.ndarray
    degenerate: bool


def sc_baseline(adj: AdjacencySample, k: int, cfg: KMeansConfig = KMeansConfig(), seed=0,
                normalized: bool = False) -> BaselineResult:
    """k-means on the eigenvectors of the ``k`` smallest Laplacian eigenvalues of one graph.

    ``normalized=True`` uses ``D^-1/2 L D^-1/2`` (isolated nodes kept at zero)
    and row-normalizes the embedding.
    """
    L = dense_laplacian(adj)
    if normalized:
        deg = np.diag(L).copy()
        inv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
        L = inv[:, None] * L * inv[None, :]
    pairs = top_k_eigenpairs(-L, k)
    V = pairs.vectors
    if normalized:
        norms = np.linalg.norm(V, axis=1, keepdims=True)
        V = V / np.where(norms > 0, norms, 1.0)
    res = kmeans(V, k, cfg, seed)
    vals = -pairs.values
    degenerate = bool(np.all(np.abs(np.linalg.eigvalsh(L)) <= 1e-12))
    return BaselineResult(Partition(res.labels, k), vals, degenerate)


# -- experiment driver -------------------------------------------------------

@dataclass
class Fig1Config:
    gammas: Sequence[float] = (0.1, 0.5, 0.9)
    m_grid: Sequence[int] = (250, 500, 1000, 2000, 3000)
    trials: int = 20
    n: int = 100
    p: int = 5
    alpha: Optional[float] = None  # None: 1 / ((4 + 4 gamma) ln n)
    excitation: ExcitationSpec = field(default_factory=ExcitationSpec)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    sc_trials: Optional[int] = None  # defaults to ``trials``
    master_seed: int = 0
    parallelism: int = 1

    def as_dict(self) -> dict:
        d = asdict(self)
        d["excitation"] = self.excitation.describe()
        d["gammas"] = list(self.gammas)
        d["m_grid"] = list(self.m_grid)
        return d


@dataclass
class Fig1Result:
    raw: list = field(default_factory=list)  # (gamma, m, trial, method, error)
    failures: list = field(default_factory=list)

    def summary(self) -> list:
        groups = {}
        for gamma, m, _, method, err in self.raw:
            groups.setdefault((gamma, m, method), []).append(err)
        rows = []
        for (gamma, m, method), errs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][2], kv[0][1])):
            e = np.array(errs)
            rows.append((gamma, m, method, float(e.mean()), float(e.std(ddof=1)) if e.size > 1 else 0.0))
        return rows

    def mean(self, gamma, m, method="blind") -> float:
        for g, mm, meth, mean, _ in self.summary():
            if g == gamma and mm == m and meth == method:
                return mean
        raise KeyError((gamma, m, method))


def cell_seed(master_seed, gamma, m, trial, method) -> int:
    return int(substream(master_seed, "fig1", repr(float(gamma)), int(m), int(trial), method).integers(2**63))


def run_blind_cell(cfg: Fig1Config, gamma: float, m: int, trial: int) -> float:
    params = PlantedPartitionParams.from_gamma(cfg.n, gamma)
    model = build_planted_partition(params)
    alpha = paper_alpha(cfg.n, gamma) if cfg.alpha is None else cfg.alpha
    filt = lowpass_power_filter(alpha, cfg.p)
    seed = cell_seed(cfg.master_seed, gamma, m, trial, "blind")
    batch = generate_batch(model, filt, cfg.excitation, m, seed, cfg.parallelism)
    res = blind_partition(batch, 2, cfg.kmeans, seed)
    return error_rate(res.partition, model.partition).error_rate


def run_sc_cell(cfg: Fig1Config, gamma: float, trial: int) -> float:
    model = build_planted_partition(PlantedPartitionParams.from_gamma(cfg.n, gamma))
    seed = cell_seed(cfg.master_seed, gamma, 1, trial, "sc")
    adj = sample_adjacency(model, substream(seed, "graph"))
    res = sc_baseline(adj, 2, cfg.kmeans, seed)
    return error_rate(res.partition, model.partition).error_rate


def run_fig1_experiment(cfg: Fig1Config, out_dir=None) -> Fig1Result:
    """Blind error per (gamma, m, trial) plus single-graph SC error per (gamma, trial).

    With ``out_dir`` set, raw rows are appended to ``raw.csv`` as cells finish,
    so an interrupted run keeps everything computed so far.
    """
    result = Fig1Result()
    raw_fh = writer = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        raw_fh = open(out_dir / "raw.csv", "w", newline="")
        writer = csv.writer(raw_fh)
        writer.writerow(["gamma", "m", "trial", "method", "error"])

    def record(row):
        result.raw.append(row)
        if writer is not None:
            writer.writerow(row)
            raw_fh.flush()

    try:
        for gamma in cfg.gammas:
            for m in cfg.m_grid:
                for t in range(cfg.trials):
                    try:
                        record((gamma, m, t, "blind", run_blind_cell(cfg, gamma, m, t)))
                    except Exception as exc:  # keep the sweep going, report at the end
                        log.warning("blind cell gamma=%s m=%s trial=%s failed: %s", gamma, m, t, exc)
                        result.failures.append((gamma, m, t, "blind", repr(exc)))
            for t in range(cfg.trials if cfg.sc_trials is None else cfg.sc_trials):
                try:
                    record((gamma, 1, t, "sc", run_sc_cell(cfg, gamma, t)))
                except Exception as exc:
                    log.warning("sc cell gamma=%s trial=%s failed: %s", gamma, t, exc)
                    result.failures.append((gamma, 1, t, "sc", repr(exc)))
    finally:
        if raw_fh is not None:
            raw_fh.close()
    if out_dir is not None:
        write_summary_csv(result, out_dir / "summary.csv")
        if result.failures:
            with open(out_dir / "failures.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["gamma", "m", "trial", "method", "error"])
                w.writerows(result.failures)
    return result


def write_summary_csv(result: Fig1Result, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "m", "method", "mean", "std"])
        w.writerows(result.summary())


def nonincreasing_with_slack(means, stds, max_inversions=1) -> bool:
    """True if ``means`` never rises, except at most ``max_inversions`` rises each within one std."""
    bad = 0
    for i in range(1, len(means)):
        rise = means[i] - means[i - 1]
        if rise > 0:
            if rise > max(stds[i - 1], stds[i]):
                return False
            bad += 1
    return bad <= max_inversions
