"""Desk-scale sample quality and solver accuracy measures.

Quality against a known target distribution is measured with the sliced
Wasserstein-2 distance (exact sorted-pairing 1-D transport averaged over
seeded random directions); solver accuracy with closed-form Gaussian
distances and log-log convergence-order fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from samplersched.rng import Purpose, derive_stream


@dataclass(frozen=True)
class SampleBatch:
    """Samples as a (n, d) array plus provenance of the generating runs."""

    samples: np.ndarray
    seed_range: str = ""

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError(f"samples must be a non-empty (n, d) array, got shape {arr.shape}")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def w2_gaussian(
    mean_a: np.ndarray, std_a: float, mean_b: np.ndarray, std_b: float
) -> float:
    """Closed-form W2 between isotropic Gaussians:
    sqrt(|mean_a - mean_b|^2 + D (std_a - std_b)^2)."""
    if std_a <= 0.0 or std_b <= 0.0:
        raise ValueError("stds must be positive")
    mean_a = np.asarray(mean_a, dtype=float).reshape(-1)
    mean_b = np.asarray(mean_b, dtype=float).reshape(-1)
    if mean_a.shape != mean_b.shape:
        raise ValueError("means must share one dimension")
    d = mean_a.size
    return float(np.sqrt(np.sum((mean_a - mean_b) ** 2) + d * (std_a - std_b) ** 2))


def sliced_w2(a: SampleBatch, b: SampleBatch, n_projections: int, seed: int) -> float:
    """Mean over seeded random unit directions of the exact 1-D W2.

    Per direction the distance is the root-mean-square difference of the
    sorted projections (optimal 1-D pairing). Unequal batch sizes are
    truncated to the smaller count. Deterministic given the seed:
    direction p comes from the (seed, METRIC_PROJECTION, p) stream.
    """
    if n_projections < 1:
        raise ValueError(f"n_projections must be >= 1, got {n_projections}")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    n = min(a.n, b.n)
    xs = a.samples[:n]
    ys = b.samples[:n]
    dim = a.dim
    values = np.empty(n_projections)
    for p in range(n_projections):
        stream = derive_stream(seed, Purpose.METRIC_PROJECTION, p)
        direction = stream.gaussians(dim)
        norm = float(np.linalg.norm(direction))
        while norm == 0.0:  # vanishing draw; keep pulling from the same stream
            direction = stream.gaussians(dim)
            norm = float(np.linalg.norm(direction))
        direction = direction / norm
        pa = np.sort(xs @ direction)
        pb = np.sort(ys @ direction)
        values[p] = np.sqrt(np.mean((pa - pb) ** 2))
    return float(np.mean(values))


def fit_convergence_order(step_counts, errors) -> float:
    """Least-squares slope of log(error) against log(1/N)."""
    ns = np.asarray(step_counts, dtype=float)
    errs = np.asarray(errors, dtype=float)
    if ns.shape != errs.shape or ns.size < 3:
        raise ValueError("need at least 3 matching (step count, error) points")
    if np.any(errs <= 0.0):
        raise ValueError("errors must be positive")
    if np.any(ns <= 0.0):
        raise ValueError("step counts must be positive")
    slope, _ = np.polyfit(np.log(1.0 / ns), np.log(errs), 1)
    return float(slope)


def batch_moments(a: SampleBatch) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased per-coordinate std of a batch."""
    if a.n < 2:
        raise ValueError(f"need at least 2 samples, got {a.n}")
    return np.mean(a.samples, axis=0), np.std(a.samples, axis=0, ddof=1)
