"""Sampler update rules through one shared coefficient-vector paradigm.

Every supported update rule, deterministic or stochastic, is a linear
combination of the current state with denoiser predictions at nearby
nodes:

    ODE:  x' = (s1/s0) x + (1 - s1/s0) * sum_j c_j D(x_j)
    SDE:  x' = (s1^2/s0^2) x + (1 - s1^2/s0^2) * sum_j c_j D(x_j)
                 + (s1/s0) sqrt(s0^2 - s1^2) eps

with s0 the current and s1 the next noise level and sum_j c_j = 1. The
node set j ranges over the previous step (history), the current step, and
future nodes reached through an Euler baseline estimate. Each named
sampler is just a choice of the sparse weight vector c.

The terminal transition to sigma = 0 and cold starts of multistep rules
fall back to the plain one-node vector {i: 1}, which makes those steps
exactly Euler (ODE) or the noise-free contraction (SDE).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from samplersched.schedule import FractionalNode, sigma_interpolate

Denoiser = Callable[[np.ndarray, float], np.ndarray]


class SamplerKind(enum.Enum):
    """The nine supported update rules; values are the canonical names."""

    EULER = "euler"
    HEUN = "heun"
    DPM2 = "dpm2"
    DPMPP_2M = "dpmpp2m"
    EULER_A = "euler_a"
    DPM2_A = "dpm2_a"
    DPMPP_SDE = "dpmpp_sde"
    DPMPP_2S_A = "dpmpp_2s_a"
    DPMPP_2M_SDE = "dpmpp_2m_sde"

    @property
    def is_sde(self) -> bool:
        return self in _SDE_KINDS

    @property
    def is_multistep(self) -> bool:
        """True for rules correcting with the previous step's prediction."""
        return self in (SamplerKind.DPMPP_2M, SamplerKind.DPMPP_2M_SDE)

    @classmethod
    def from_name(cls, name: str) -> "SamplerKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown sampler {name!r}; expected one of: {valid}") from None


ODE_KINDS = (SamplerKind.EULER, SamplerKind.HEUN, SamplerKind.DPM2, SamplerKind.DPMPP_2M)
_SDE_KINDS = (
    SamplerKind.EULER_A,
    SamplerKind.DPM2_A,
    SamplerKind.DPMPP_SDE,
    SamplerKind.DPMPP_2S_A,
    SamplerKind.DPMPP_2M_SDE,
)
SDE_KINDS = _SDE_KINDS

# Kinds whose update rule contains an explicit correction term that a
# scale factor can multiply.
_SCALABLE_CORRECTION = (SamplerKind.DPMPP_SDE, SamplerKind.DPMPP_2M_SDE, SamplerKind.DPM2_A)


@dataclass(frozen=True)
class SampleState:
    """State vector x at step index i with its noise level."""

    x: np.ndarray
    step_index: int
    sigma: float


@dataclass(frozen=True)
class NoiseDraw:
    """Fresh standard-normal draw, shaped like the state it perturbs."""

    eps: np.ndarray


@dataclass(frozen=True)
class CachedPrediction:
    value: np.ndarray
    sigma: float
    # Provenance: "current" = evaluated on the realized state by the step
    # that returned the cache, "history" = carried in from an earlier step,
    # "euler-estimate" = evaluated on a baseline estimate of a future node.
    tag: str


@dataclass(frozen=True)
class PredictionCache:
    """Denoiser outputs stored per node.

    Integer nodes <= the producing step were evaluated on realized states;
    future and fractional nodes on Euler baseline estimates. Each step
    returns a fresh cache holding its own evaluations; estimates are never
    reused by later steps.
    """

    entries: Mapping["int | FractionalNode", CachedPrediction]

    @classmethod
    def empty(cls) -> "PredictionCache":
        return cls({})

    def history_for(self, step_index: int) -> CachedPrediction | None:
        """Prediction stored at the node just before `step_index`, if any."""
        return self.entries.get(step_index - 1)


@dataclass(frozen=True)
class CoeffVector:
    """Sparse node -> weight map with weights summing to 1.

    Weights may be negative or exceed 1; only the sum is constrained.
    Fractional keys with offset 1 are normalized to the next integer node.
    """

    entries: Mapping["int | FractionalNode", float]

    def __post_init__(self) -> None:
        normalized = {}
        for node, w in self.entries.items():
            if isinstance(node, FractionalNode):
                node = node.resolve()
            normalized[node] = float(w)
        object.__setattr__(self, "entries", normalized)
        total = math.fsum(normalized.values())
        limit = 1e-9 * max(1.0, max(abs(w) for w in normalized.values()))
        if abs(total - 1.0) > limit:
            raise ValueError(f"weights must sum to 1, got {total!r}")


def convert_prediction(
    value: np.ndarray, x: np.ndarray, sigma: float, direction: str
) -> np.ndarray:
    """Convert between data prediction D and noise prediction eps.

    "data_to_noise" maps D to (x - D)/sigma; "noise_to_data" maps eps to
    x - sigma*eps. The two are exact inverses of each other.
    """
    if sigma <= 0.0:
        raise ValueError(f"conversion needs sigma > 0, got {sigma!r}")
    value = np.asarray(value, dtype=float)
    x = np.asarray(x, dtype=float)
    if direction == "data_to_noise":
        return (x - value) / sigma
    if direction == "noise_to_data":
        return x - sigma * value
    raise ValueError(f"direction must be 'data_to_noise' or 'noise_to_data', got {direction!r}")


def _check_window(sigma_cur: float, sigma_next: float) -> None:
    if sigma_next < 0.0 or not sigma_cur > sigma_next:
        raise ValueError(
            f"noise window must decrease: sigma_i={sigma_cur!r}, sigma_next={sigma_next!r}"
        )


def coefficient_vector(
    kind: SamplerKind,
    i: int,
    sigma_prev: float | None,
    sigma_cur: float,
    sigma_next: float,
    history_available: bool = False,
) -> CoeffVector:
    """Weight vector c for one step of `kind` over the given sigma window.

    Multistep kinds without history fall back to {i: 1}; so does every
    kind when sigma_next = 0, because several weights divide by the next
    level. For dpm2_a this returns the next-integer-node weighting
    (sigma_i/sigma_next on node i+1); see `sde_step` for how the default
    midpoint-form update relates to it.
    """
    _check_window(sigma_cur, sigma_next)
    euler_vec = CoeffVector({i: 1.0})
    if sigma_next == 0.0:
        return euler_vec

    if kind in (SamplerKind.EULER, SamplerKind.EULER_A):
        return euler_vec
    if kind is SamplerKind.HEUN:
        a = sigma_cur / (2.0 * sigma_next)
        return CoeffVector({i: 1.0 - a, i + 1: a})
    if kind is SamplerKind.DPM2:
        a = math.sqrt(sigma_cur / sigma_next)
        return CoeffVector({i: 1.0 - a, FractionalNode(i, 0.5): a})
    if kind is SamplerKind.DPMPP_SDE:
        return CoeffVector({i: 0.5, i + 1: 0.5})
    if kind is SamplerKind.DPMPP_2S_A:
        return CoeffVector({i + 1: 1.0})
    if kind is SamplerKind.DPM2_A:
        a = sigma_cur / sigma_next
        return CoeffVector({i: 1.0 - a, i + 1: a})

    if kind in (SamplerKind.DPMPP_2M, SamplerKind.DPMPP_2M_SDE):
        if not history_available:
            return euler_vec
        if sigma_prev is None or not sigma_prev > sigma_cur:
            raise ValueError(
                f"multistep history needs sigma_prev > sigma_i, got {sigma_prev!r}"
            )
        # Both multistep rules extrapolate with half the current/previous
        # log-step ratio; the weight stays bounded as steps shrink, which
        # is what makes the correction second-order.
        a = 0.5 * math.log(sigma_cur / sigma_next) / math.log(sigma_prev / sigma_cur)
        return CoeffVector({i: 1.0 + a, i - 1: -a})

    raise ValueError(f"unsupported sampler kind {kind!r}")


def euler_baseline_estimate(
    x_i: np.ndarray, d_i: np.ndarray, sigma_i: float, sigma_target: float
) -> np.ndarray:
    """Provisional state at a lower level via one Euler contraction:
    (sigma_target/sigma_i) x + (1 - sigma_target/sigma_i) D."""
    if sigma_i <= 0.0:
        raise ValueError(f"baseline estimate needs sigma_i > 0, got {sigma_i!r}")
    if sigma_target < 0.0 or sigma_target > sigma_i:
        raise ValueError(
            f"baseline target must satisfy 0 <= sigma_target <= sigma_i, got {sigma_target!r}"
        )
    ratio = sigma_target / sigma_i
    return ratio * np.asarray(x_i, dtype=float) + (1.0 - ratio) * np.asarray(d_i, dtype=float)


def _scale_correction(c: CoeffVector, i: int, scale: float) -> CoeffVector:
    """Multiply every non-current-node weight by `scale`, keeping sum 1."""
    if scale == 1.0:
        return c
    others = {node: w * scale for node, w in c.entries.items() if node != i}
    if not others:
        return c
    current = 1.0 - math.fsum(others.values())
    return CoeffVector({i: current, **others})


def _gather_predictions(
    c: CoeffVector,
    state: SampleState,
    sigma_next: float,
    denoiser: Denoiser,
    d_current: np.ndarray,
    cache: PredictionCache,
):
    """Denoiser outputs for every node in `c`, plus the estimate entries."""
    i = state.step_index
    preds: dict = {}
    estimates: dict = {}
    for node in c.entries:
        if node == i:
            preds[node] = d_current
        elif isinstance(node, int) and node == i - 1:
            entry = cache.entries.get(i - 1)
            if entry is None:
                raise RuntimeError(
                    f"step {i} needs the cached prediction for node {i - 1} but none is stored"
                )
            preds[node] = entry.value
        else:
            if isinstance(node, int) and node == i + 1:
                sigma_node = sigma_next
            elif isinstance(node, FractionalNode) and node.base == i:
                sigma_node = sigma_interpolate(state.sigma, sigma_next, node.frac)
            else:
                raise RuntimeError(f"step {i} cannot evaluate node {node!r}")
            x_hat = euler_baseline_estimate(state.x, d_current, state.sigma, sigma_node)
            d_hat = np.asarray(denoiser(x_hat, sigma_node), dtype=float)
            preds[node] = d_hat
            estimates[node] = CachedPrediction(d_hat, sigma_node, "euler-estimate")
    return preds, estimates


def _combine(c: CoeffVector, preds: dict) -> np.ndarray:
    out = None
    for node, w in c.entries.items():
        term = w * preds[node]
        out = term if out is None else out + term
    return out


def _step_vector(
    kind: SamplerKind,
    state: SampleState,
    sigma_next: float,
    cache: PredictionCache,
    correction_scale: float,
) -> CoeffVector:
    i = state.step_index
    if sigma_next == 0.0:
        return CoeffVector({i: 1.0})
    entry = cache.history_for(i) if kind.is_multistep else None
    c = coefficient_vector(
        kind,
        i,
        entry.sigma if entry is not None else None,
        state.sigma,
        sigma_next,
        history_available=entry is not None,
    )
    return _scale_correction(c, i, correction_scale)


def ode_step(
    kind: SamplerKind,
    state: SampleState,
    sigma_next: float,
    denoiser: Denoiser,
    cache: PredictionCache,
) -> tuple[SampleState, PredictionCache]:
    """One deterministic update from state.sigma down to sigma_next.

    Returns the new state and a cache holding this step's evaluations:
    the realized current-node prediction (the following step's history)
    and any baseline-estimate evaluations, which later steps ignore.
    """
    if kind.is_sde:
        raise ValueError(f"{kind.value} is stochastic; use sde_step")
    _check_window(state.sigma, sigma_next)
    d_current = np.asarray(denoiser(state.x, state.sigma), dtype=float)
    c = _step_vector(kind, state, sigma_next, cache, 1.0)
    preds, estimates = _gather_predictions(c, state, sigma_next, denoiser, d_current, cache)
    ratio = sigma_next / state.sigma
    x_new = ratio * np.asarray(state.x, dtype=float) + (1.0 - ratio) * _combine(c, preds)
    i = state.step_index
    new_cache = PredictionCache(
        {i: CachedPrediction(d_current, state.sigma, "current"), **estimates}
    )
    return SampleState(x_new, i + 1, sigma_next), new_cache


def sde_step(
    kind: SamplerKind,
    state: SampleState,
    sigma_next: float,
    denoiser: Denoiser,
    cache: PredictionCache,
    noise: NoiseDraw,
    correction_scale: float = 1.0,
    dpm2a_next_node_variant: bool = False,
) -> tuple[SampleState, PredictionCache]:
    """One stochastic update injecting fresh noise scaled to the ladder.

    `correction_scale` multiplies the correction weight of kinds that have
    one; scale 2 on dpmpp_sde reproduces dpmpp_2s_a exactly. dpm2_a uses
    its midpoint-form correction by default; two published weightings
    exist for it, and `dpm2a_next_node_variant` switches to the
    next-integer-node one (the vector `coefficient_vector` reports).
    At sigma_next = 0 the noise coefficient vanishes and the step
    contracts straight onto the current prediction.
    """
    if not kind.is_sde:
        raise ValueError(f"{kind.value} is deterministic; use ode_step")
    if correction_scale != 1.0 and kind not in _SCALABLE_CORRECTION:
        raise ValueError(f"{kind.value} has no correction term to scale")
    _check_window(state.sigma, sigma_next)
    x = np.asarray(state.x, dtype=float)
    eps = np.asarray(noise.eps, dtype=float)
    if eps.shape != x.shape:
        raise ValueError(f"noise shape {eps.shape} does not match state shape {x.shape}")

    s0, s1 = state.sigma, sigma_next
    contract = (s1 * s1) / (s0 * s0)
    noise_coef = (s1 / s0) * math.sqrt(s0 * s0 - s1 * s1)
    d_current = np.asarray(denoiser(x, s0), dtype=float)
    i = state.step_index

    if kind is SamplerKind.DPM2_A and not dpm2a_next_node_variant and s1 > 0.0:
        # Midpoint form: correct with the prediction at the geometric-mean
        # level, coefficient (s0^2 - s1^2) / (s0 s1^2).
        sigma_half = sigma_interpolate(s0, s1, 0.5)
        x_hat = euler_baseline_estimate(x, d_current, s0, sigma_half)
        d_half = np.asarray(denoiser(x_hat, sigma_half), dtype=float)
        corr = correction_scale * (s0 * s0 - s1 * s1) / (s0 * s1 * s1)
        x_new = (
            contract * x
            + (1.0 - contract) * d_current
            + corr * (d_half - d_current)
            + noise_coef * eps
        )
        new_cache = PredictionCache(
            {
                i: CachedPrediction(d_current, s0, "current"),
                FractionalNode(i, 0.5): CachedPrediction(d_half, sigma_half, "euler-estimate"),
            }
        )
        return SampleState(x_new, i + 1, s1), new_cache

    c = _step_vector(kind, state, sigma_next, cache, correction_scale)
    preds, estimates = _gather_predictions(c, state, sigma_next, denoiser, d_current, cache)
    x_new = contract * x + (1.0 - contract) * _combine(c, preds) + noise_coef * eps
    new_cache = PredictionCache(
        {i: CachedPrediction(d_current, s0, "current"), **estimates}
    )
    return SampleState(x_new, i + 1, s1), new_cache


def nfe_cost(kind: SamplerKind, is_final_zero_step: bool = False) -> int:
    """Denoiser evaluations one step of `kind` performs.

    Two-evaluation rules degrade to a single evaluation on the terminal
    transition to sigma = 0, where they fall back to Euler.
    """
    single = (
        SamplerKind.EULER,
        SamplerKind.EULER_A,
        SamplerKind.DPMPP_2M,
        SamplerKind.DPMPP_2M_SDE,
    )
    if kind in single:
        return 1
    return 1 if is_final_zero_step else 2
