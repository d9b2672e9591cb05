"""Polynomial graph filters ``H(L) = sum_k h_k L^k``."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from ._rng import substream
from .errors import NumericalError


@dataclass(frozen=True)
class GraphFilter:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size == 0:
            raise ValueError("filter needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("filter coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, lam):
        return generating_polynomial_at(self, lam)

    def digest(self) -> str:
        return hashlib.sha256(self.coeffs.tobytes()).hexdigest()[:16]

    def dense(self, L) -> np.ndarray:
        """Materialize ``H(L)`` (small ``n`` only)."""
        L = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=float)
        n = L.shape[0]
        H = self.coeffs[-1] * np.eye(n)
        for h in self.coeffs[-2::-1]:
            H = L @ H
            H[np.diag_indices(n)] += h
        return H


def apply_filter(filt: GraphFilter, L, x) -> np.ndarray:
    """Horner recursion; ``T`` products with ``L``, no powers formed.

    ``x`` may be a vector or an ``n x m`` block of column signals.
    """
    x = np.asarray(x, dtype=float)
    if L.shape[0] != L.shape[1] or x.shape[0] != L.shape[0]:
        raise ValueError(f"signal length {x.shape[0]} does not match L of shape {L.shape}")
    y = filt.coeffs[-1] * x
    for h in filt.coeffs[-2::-1]:
        y = L @ y + h * x
    return y


def generating_polynomial_at(filt: GraphFilter, lam):
    out = filt.coeffs[-1] * np.ones_like(np.asarray(lam, dtype=float))
    for h in filt.coeffs[-2::-1]:
        out = out * lam + h
    return out if np.ndim(out) else float(out)


def lowpass_power_filter(alpha: float, p: int) -> GraphFilter:
    """Coefficients of ``(1 - alpha * lam) ** p``."""
    if p < 0:
        raise ValueError("power must be nonnegative")
    return GraphFilter([math.comb(p, k) * (-alpha) ** k for k in range(p + 1)])


def paper_alpha(n: int, gamma: float) -> float:
    """Step size ``1 / ((4 + 4 gamma) ln n)`` used with the planted-partition sweep."""
    return 1.0 / ((4.0 + 4.0 * gamma) * math.log(n))


class NormEstimate(NamedTuple):
    value: float
    iterations: int
    converged: bool


def _power_abs_eig(matvec, n, tol, max_iter, seed):
    # |largest-magnitude eigenvalue| of a symmetric operator
    for attempt in range(2):
        rng = substream(seed, "power", attempt)
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        est = 0.0
        for it in range(1, max_iter + 1):
            z = matvec(matvec(v))  # square to avoid +/- oscillation
            nz = np.linalg.norm(z)
            if not np.isfinite(nz):
                raise NumericalError("non-finite iterate in power iteration")
            if nz == 0.0:
                if it == 1 and attempt == 0:
                    break
                return NormEstimate(0.0, it, True)
            new = math.sqrt(nz)
            v = z / nz
            if abs(new - est) <= tol * max(new, np.finfo(float).tiny):
                return NormEstimate(new, it, True)
            est = new
        else:
            return NormEstimate(est, max_iter, False)
    return NormEstimate(0.0, 1, True)


def symmetric_norm(M, tol=1e-6, max_iter=1000, seed=0) -> NormEstimate:
    """Spectral norm of a symmetric matrix by power iteration on ``M^2``."""
    n = M.shape[0]
    return _power_abs_eig(lambda v: M @ v, n, tol, max_iter, seed)


def filter_spectral_norm(filt: GraphFilter, L, tol=1e-6, max_iter=1000, seed=0) -> NormEstimate:
    """``max |h(lambda_i(L))|`` estimated by power iteration through :func:`apply_filter`."""
    if filt.degree == 0:
        return NormEstimate(abs(float(filt.coeffs[0])), 0, True)
    return _power_abs_eig(lambda v: apply_filter(filt, L, v), L.shape[0], tol, max_iter, seed)
