"""Excitations and batches of filtered signals on freshly drawn graphs."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from ._rng import as_generator, substream
from .filters import GraphFilter, apply_filter
from .graph_model import AdjacencySample, SbmModel, _edges_from_uniforms, laplacian

CHUNK = 64


@dataclass(frozen=True)
class ExcitationSpec:
    """Zero-mean, bounded, i.i.d. node excitation.

    ``kind`` is ``"uniform"`` (on ``[-bound, bound]``), ``"rademacher"`` or
    ``"custom"``; a custom ``sampler(rng, n)`` must be zero-mean with entries
    bounded by ``bound`` and have per-entry variance ``custom_variance``.
    """

    kind: str = "uniform"
    bound: float = 1.0
    unit_variance: bool = False
    sampler: Optional[Callable] = field(default=None, compare=False)
    custom_variance: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "rademacher", "custom"):
            raise ValueError(f"unknown excitation kind {self.kind!r}")
        if not (math.isfinite(self.bound) and self.bound > 0):
            raise ValueError("bound must be finite and positive")
        if self.kind == "custom" and (self.sampler is None or self.custom_variance is None):
            raise ValueError("custom excitation needs a sampler and its variance")

    @property
    def variance(self) -> float:
        if self.kind == "rademacher" or self.unit_variance:
            return 1.0
        if self.kind == "uniform":
            return self.bound**2 / 3.0
        return float(self.custom_variance)

    def describe(self) -> dict:
        return {"kind": self.kind, "bound": self.bound, "unit_variance": self.unit_variance}


def sample_excitation(n: int, spec: ExcitationSpec, seed) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be positive")
    rng = as_generator(seed)
    if spec.kind == "uniform":
        w = rng.uniform(-spec.bound, spec.bound, n)
        if spec.unit_variance:
            w *= math.sqrt(3.0) / spec.bound
        return w
    if spec.kind == "rademacher":
        return 2.0 * rng.integers(0, 2, n) - 1.0
    w = np.asarray(spec.sampler(rng, n), dtype=float)
    if w.shape != (n,) or np.any(np.abs(w) > spec.bound):
        raise ValueError("custom sampler returned an out-of-contract vector")
    if spec.unit_variance:
        w = w / math.sqrt(spec.custom_variance)
    return w


@dataclass
class ObservationDiagnostics:
    adjacency: Optional[AdjacencySample] = None
    laplacian: Optional[object] = None
    excitation: Optional[np.ndarray] = None


def generate_observation(
    model: Optional[SbmModel],
    filt: GraphFilter,
    spec: ExcitationSpec,
    seed,
    *,
    laplacian_override=None,
    excitation=None,
    keep=False,
):
    """One sample ``y = H(L) w`` on a fresh graph.

    The generator draws the graph's pair uniforms first and then ``w``, the
    same order as :func:`generate_batch`, so a batch row ``l`` equals this
    function called with ``seed_sequence(master, l)``.  ``laplacian_override``
    and ``excitation`` inject fixed inputs instead of drawing them.
    """
    rng = as_generator(seed)
    adj = None
    if laplacian_override is None:
        if model is None:
            raise ValueError("need a model or an injected Laplacian")
        pair_prob = model.pair_probabilities()
        adj = _edges_from_uniforms(model.n, rng.random(pair_prob.size), pair_prob)
        L = laplacian(adj)
    else:
        L = laplacian_override
    n = L.shape[0]
    w = sample_excitation(n, spec, rng) if excitation is None else np.asarray(excitation, float)
    y = apply_filter(filt, L, w)
    diag = ObservationDiagnostics(adj, L, w) if keep else ObservationDiagnostics()
    return y, diag


@dataclass(frozen=True)
class ObservationBatch:
    signals: np.ndarray  # m x n
    manifest: dict

    @property
    def m(self) -> int:
        return self.signals.shape[0]

    @property
    def n(self) -> int:
        return self.signals.shape[1]

    def write_csv(self, path, manifest_path=None) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"node_{i}" for i in range(self.n)])
            for row in self.signals:
                writer.writerow([repr(float(v)) for v in row])
        if manifest_path is not None:
            with open(manifest_path, "w") as fh:
                json.dump(self.manifest, fh, indent=2, sort_keys=True)

    @classmethod
    def read_csv(cls, path, manifest_path=None) -> "ObservationBatch":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        manifest = {}
        if manifest_path is not None:
            with open(manifest_path) as fh:
                manifest = json.load(fh)
        return cls(data, manifest)


def _draw_chunk(model, spec, master_seed, start, stop, pair_prob):
    n = model.n
    u = np.empty((stop - start, pair_prob.size))
    w = np.empty((stop - start, n))
    for row, ell in enumerate(range(start, stop)):
        rng = substream(master_seed, ell)
        u[row] = rng.random(pair_prob.size)
        w[row] = sample_excitation(n, spec, rng)
    return u, w


def iter_signal_chunks(model, filt, spec, m, master_seed, parallelism=1, chunk=CHUNK):
    """Yield ``(start, signals)`` blocks in order; memory is one chunk per worker."""
    if m < 1:
        raise ValueError("m must be at least 1")
    pair_prob = model.pair_probabilities()
    coeffs = np.ascontiguousarray(filt.coeffs)

    def work(start):
        stop = min(start + chunk, m)
        u, w = _draw_chunk(model, spec, master_seed, start, stop, pair_prob)
        out = np.empty_like(w)
        _kernels.sbm_filter_batch(u, pair_prob, coeffs, w, out)
        return start, out

    starts = range(0, m, chunk)
    if parallelism <= 1:
        for s in starts:
            yield work(s)
        return
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        yield from pool.map(work, starts)


def batch_manifest(model, filt, spec, m, master_seed) -> dict:
    return {
        "n": model.n,
        "m": m,
        "master_seed": master_seed if isinstance(master_seed, int) else repr(master_seed),
        "seed_rule": "PCG64(SeedSequence(master_seed, spawn_key=(l,)))",
        "model_digest": model.digest(),
        "omega": model.omega.tolist(),
        "labels": model.partition.labels.tolist(),
        "filter_coeffs": filt.coeffs.tolist(),
        "filter_digest": filt.digest(),
        "excitation": spec.describe(),
    }


def generate_batch(model: SbmModel, filt: GraphFilter, spec: ExcitationSpec, m: int,
                   master_seed, parallelism: int = 1) -> ObservationBatch:
    """``m`` independent observations; row ``l`` uses substream ``(master_seed, l)``."""
    Y = np.empty((m, model.n))
    for start, block in iter_signal_chunks(model, filt, spec, m, master_seed, parallelism):
        Y[start:start + block.shape[0]] = block
    Y.setflags(write=False)
    return ObservationBatch(Y, batch_manifest(model, filt, spec, m, master_seed))
