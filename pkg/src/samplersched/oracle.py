"""Closed-form denoisers and exact solutions standing in for a network.

For Gaussian and isotropic Gaussian-mixture data the posterior mean
E[x0 | x, sigma] is available in closed form, so every sampler can be
checked against ground truth instead of a trained model. For purely
Gaussian data the deterministic flow also has an elementary exact
endpoint, which anchors the convergence-order measurements.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from samplersched.rng import RngStream
from samplersched.samplers import NoiseDraw


@dataclass(frozen=True)
class DenoiserOracle:
    """Pure function (x, sigma) -> posterior-mean estimate of clean data."""

    evaluate: Callable[[np.ndarray, float], np.ndarray]
    description: str = ""

    def __call__(self, x: np.ndarray, sigma: float) -> np.ndarray:
        return self.evaluate(x, sigma)


@dataclass(frozen=True)
class GmmComponent:
    weight: float
    mean: tuple[float, ...]
    std: float


@dataclass(frozen=True)
class GmmSpec:
    """Isotropic Gaussian mixture: weights sum to 1, all stds positive.

    Weights are renormalized to sum exactly to 1 on construction.
    """

    components: tuple[GmmComponent, ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("mixture needs at least one component")
        dim = len(self.components[0].mean)
        total = 0.0
        for comp in self.components:
            if comp.weight <= 0.0:
                raise ValueError(f"component weight must be positive, got {comp.weight!r}")
            if comp.std <= 0.0:
                raise ValueError(f"component std must be positive, got {comp.std!r}")
            if len(comp.mean) != dim:
                raise ValueError("all component means must share one dimension")
            total += comp.weight
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"component weights must sum to 1, got {total!r}")
        normalized = tuple(
            GmmComponent(c.weight / total, tuple(float(m) for m in c.mean), float(c.std))
            for c in self.components
        )
        object.__setattr__(self, "components", normalized)

    @property
    def dim(self) -> int:
        return len(self.components[0].mean)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(weights, means, stds) as numpy arrays, shapes (K,), (K, D), (K,)."""
        w = np.array([c.weight for c in self.components])
        mu = np.array([c.mean for c in self.components])
        s = np.array([c.std for c in self.components])
        return w, mu, s

    @classmethod
    def from_text(cls, text: str) -> "GmmSpec":
        """Parse `weight mean_0 ... mean_{D-1} std` lines; '#' starts a comment."""
        comps = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) < 3:
                raise ValueError(
                    f"line {lineno}: need at least weight, one mean coordinate, and std"
                )
            values = [float(f) for f in fields]
            comps.append(GmmComponent(values[0], tuple(values[1:-1]), values[-1]))
        if not comps:
            raise ValueError("no mixture components found")
        return cls(tuple(comps))

    @classmethod
    def from_file(cls, path: "str | Path") -> "GmmSpec":
        return cls.from_text(Path(path).read_text())


def gaussian_denoiser(sigma_data: float) -> DenoiserOracle:
    """Exact denoiser for zero-mean Gaussian data with std `sigma_data`:
    D(x, sigma) = sigma_data^2 / (sigma_data^2 + sigma^2) * x."""
    if sigma_data <= 0.0:
        raise ValueError(f"sigma_data must be positive, got {sigma_data!r}")
    var = sigma_data * sigma_data

    def evaluate(x: np.ndarray, sigma: float) -> np.ndarray:
        return (var / (var + sigma * sigma)) * np.asarray(x, dtype=float)

    return DenoiserOracle(evaluate, description=f"gaussian(sigma_data={sigma_data})")


def gmm_denoiser(spec: GmmSpec) -> DenoiserOracle:
    """Exact denoiser for isotropic-mixture data.

    D(x, sigma) = sum_k w_k(x) m_k(x) with responsibilities
    w_k proportional to pi_k N(x; mu_k, (s_k^2 + sigma^2) I), computed in
    log space, and per-component posterior means
    m_k = (s_k^2 x + sigma^2 mu_k) / (s_k^2 + sigma^2).

    Accepts x of shape (D,) or any batch shape (..., D).
    """
    weights, means, stds = spec.arrays()
    log_pi = np.log(weights)
    dim = spec.dim

    def evaluate(x: np.ndarray, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        var = stds * stds + sigma * sigma  # (K,)
        diff = x[..., None, :] - means  # (..., K, D)
        sq = np.sum(diff * diff, axis=-1)  # (..., K)
        log_resp = log_pi - 0.5 * dim * np.log(2.0 * np.pi * var) - sq / (2.0 * var)
        log_resp = log_resp - np.max(log_resp, axis=-1, keepdims=True)
        resp = np.exp(log_resp)
        resp = resp / np.sum(resp, axis=-1, keepdims=True)
        post = (stds * stds)[:, None] * x[..., None, :] + (sigma * sigma) * means
        post = post / var[:, None]  # (..., K, D)
        return np.sum(resp[..., None] * post, axis=-2)

    return DenoiserOracle(evaluate, description=f"gmm({len(spec.components)} components)")


def exact_gaussian_ode_endpoint(
    x_start: np.ndarray, sigma_start: float, sigma_end: float, sigma_data: float
) -> np.ndarray:
    """Exact deterministic-flow endpoint for Gaussian data.

    Under the Gaussian denoiser the flow is dx/dsigma = sigma/(sigma_data^2
    + sigma^2) x, a separable linear equation, so
    x_end = x_start * sqrt((sigma_data^2 + sigma_end^2) /
    (sigma_data^2 + sigma_start^2)).
    """
    if sigma_data <= 0.0:
        raise ValueError(f"sigma_data must be positive, got {sigma_data!r}")
    if sigma_end < 0.0 or sigma_start < sigma_end:
        raise ValueError(
            f"need sigma_start >= sigma_end >= 0, got {sigma_start!r}, {sigma_end!r}"
        )
    var = sigma_data * sigma_data
    factor = np.sqrt((var + sigma_end * sigma_end) / (var + sigma_start * sigma_start))
    return factor * np.asarray(x_start, dtype=float)


def forward_perturb(x0: np.ndarray, sigma: float, noise: NoiseDraw) -> np.ndarray:
    """Corrupt clean data to level sigma: returns x0 + sigma * eps."""
    x0 = np.asarray(x0, dtype=float)
    eps = np.asarray(noise.eps, dtype=float)
    if eps.shape != x0.shape:
        raise ValueError(f"noise shape {eps.shape} does not match data shape {x0.shape}")
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma!r}")
    return x0 + sigma * eps


def score_from_denoiser(oracle: DenoiserOracle, x: np.ndarray, sigma: float) -> np.ndarray:
    """Score of the perturbed density from a posterior-mean denoiser:
    grad log p(x; sigma) = (D(x, sigma) - x) / sigma^2."""
    if sigma <= 0.0:
        raise ValueError(f"score needs sigma > 0, got {sigma!r}")
    x = np.asarray(x, dtype=float)
    return (np.asarray(oracle(x, sigma), dtype=float) - x) / (sigma * sigma)


def sample_gmm(spec: GmmSpec, n_samples: int, stream: RngStream) -> np.ndarray:
    """Draw exact samples from the mixture, (n_samples, D).

    Consumes n_samples uniforms (component choice) followed by
    n_samples * D gaussians, in that order.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    weights, means, stds = spec.arrays()
    cum = np.cumsum(weights)
    u = stream.uniforms(n_samples)
    idx = np.minimum(np.searchsorted(cum, u, side="left"), len(weights) - 1)
    eps = stream.gaussians(n_samples * spec.dim).reshape(n_samples, spec.dim)
    return means[idx] + stds[idx, None] * eps
