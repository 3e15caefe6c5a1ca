"""Direct single-step update formulas, written rule by rule.

These spell out each sampler's published iteration verbatim, without going
through the coefficient-vector machinery in `samplers`. They exist to
cross-check that machinery (see the test suite and `selfcheck`); nothing
in the production sampling path calls them.

All functions take the current state x, the levels s0 > s1 > 0, and a
denoiser callable; stochastic rules also take the fresh noise draw eps.
Multistep rules take the realized previous prediction and its level.
"""

from __future__ import annotations

import math

import numpy as np


def euler_update(x, s0, s1, denoiser):
    d0 = denoiser(x, s0)
    return (s1 / s0) * x + (1.0 - s1 / s0) * d0


def heun_update(x, s0, s1, denoiser):
    d0 = denoiser(x, s0)
    x_hat = (s1 / s0) * x + (1.0 - s1 / s0) * d0
    d1 = denoiser(x_hat, s1)
    return (s1 / s0) * x + (1.0 - s1 / s0) * d0 + 0.5 * (s0 / s1 - 1.0) * (d1 - d0)


def dpm2_update(x, s0, s1, denoiser):
    d0 = denoiser(x, s0)
    s_mid = math.sqrt(s0 * s1)
    x_hat = (s_mid / s0) * x + (1.0 - s_mid / s0) * d0
    d_mid = denoiser(x_hat, s_mid)
    return (
        (s1 / s0) * x
        + (1.0 - s1 / s0) * d0
        + ((s0 - s1) / math.sqrt(s0 * s1)) * (d_mid - d0)
    )


def dpmpp2m_update(x, s_prev, s0, s1, denoiser, d_prev):
    d0 = denoiser(x, s0)
    ratio = math.log(s0 / s1) / math.log(s_prev / s0)
    return (
        (s1 / s0) * x
        + (1.0 - s1 / s0) * d0
        + 0.5 * (1.0 - s1 / s0) * ratio * (d0 - d_prev)
    )


def euler_a_update(x, s0, s1, denoiser, eps):
    d0 = denoiser(x, s0)
    contract = s1 ** 2 / s0 ** 2
    return contract * x + (1.0 - contract) * d0 + (s1 / s0) * math.sqrt(s0 ** 2 - s1 ** 2) * eps


def dpmpp_sde_update(x, s0, s1, denoiser, eps):
    d0 = denoiser(x, s0)
    x_hat = (s1 / s0) * x + (1.0 - s1 / s0) * d0
    d1 = denoiser(x_hat, s1)
    contract = s1 ** 2 / s0 ** 2
    return (
        contract * x
        + (1.0 - contract) * d0
        + 0.5 * (1.0 - contract) * (d1 - d0)
        + (s1 / s0) * math.sqrt(s0 ** 2 - s1 ** 2) * eps
    )


def dpmpp_2s_a_update(x, s0, s1, denoiser, eps):
    d0 = denoiser(x, s0)
    x_hat = (s1 / s0) * x + (1.0 - s1 / s0) * d0
    d1 = denoiser(x_hat, s1)
    contract = s1 ** 2 / s0 ** 2
    return contract * x + (1.0 - contract) * d1 + (s1 / s0) * math.sqrt(s0 ** 2 - s1 ** 2) * eps


def dpmpp_2m_sde_update(x, s_prev, s0, s1, denoiser, d_prev, eps):
    d0 = denoiser(x, s0)
    contract = s1 ** 2 / s0 ** 2
    ratio = math.log(s0 / s1) / math.log(s_prev / s0)
    return (
        contract * x
        + (1.0 - contract) * d0
        + 0.5 * (1.0 - contract) * ratio * (d0 - d_prev)
        + (s1 / s0) * math.sqrt(s0 ** 2 - s1 ** 2) * eps
    )


def dpm2_a_update(x, s0, s1, denoiser, eps):
    d0 = denoiser(x, s0)
    s_mid = math.sqrt(s0 * s1)
    x_hat = (s_mid / s0) * x + (1.0 - s_mid / s0) * d0
    d_mid = denoiser(x_hat, s_mid)
    contract = s1 ** 2 / s0 ** 2
    return (
        contract * x
        + (1.0 - contract) * d0
        + ((s0 ** 2 - s1 ** 2) / (s0 * s1 ** 2)) * (d_mid - d0)
        + (s1 / s0) * math.sqrt(s0 ** 2 - s1 ** 2) * eps
    )


def perturbation_identity(x0: np.ndarray, sigma: float, eps: np.ndarray) -> np.ndarray:
    """Forward corruption x0 + sigma * eps (no scaling of the data term)."""
    return np.asarray(x0, dtype=float) + sigma * np.asarray(eps, dtype=float)
