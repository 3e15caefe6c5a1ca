"""Noise schedules: strictly decreasing sigma ladders and their surgery.

A schedule is the exogenous input every sampler consumes: sigma_0 > sigma_1
> ... > sigma_N, optionally ending at exactly 0. Construction uses the
rho-power rule (interpolation in sigma^(1/rho) space); fractional nodes
between two adjacent levels interpolate log-linearly, so k = 1/2 lands on
the geometric mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

DEFAULT_SIGMA_MIN = 0.002
DEFAULT_SIGMA_MAX = 80.0
DEFAULT_RHO = 7.0


@dataclass(frozen=True)
class NoiseSchedule:
    """Ordered noise levels, strictly decreasing, at most the last is 0."""

    sigmas: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if len(self.sigmas) < 2:
            raise ValueError("a noise schedule needs at least 2 levels")
        for k, s in enumerate(self.sigmas):
            if s < 0.0:
                raise ValueError(f"negative noise level {s!r} at position {k}")
            if s == 0.0 and k != len(self.sigmas) - 1:
                raise ValueError("only the final level may be 0")
        for a, b in zip(self.sigmas, self.sigmas[1:]):
            if not a > b:
                raise ValueError(f"levels must strictly decrease, got {a!r} -> {b!r}")

    @property
    def terminal_zero(self) -> bool:
        return self.sigmas[-1] == 0.0

    @property
    def n_steps(self) -> int:
        """Number of transitions (one sampler step each)."""
        return len(self.sigmas) - 1

    @property
    def sigma_max(self) -> float:
        return self.sigmas[0]

    @property
    def sigma_min(self) -> float:
        """Smallest non-zero level."""
        return self.sigmas[-2] if self.terminal_zero else self.sigmas[-1]

    def __len__(self) -> int:
        return len(self.sigmas)

    def __getitem__(self, k: int) -> float:
        return self.sigmas[k]

    def to_csv_row(self) -> str:
        """Full-precision comma-separated levels, for debugging dumps."""
        return ",".join(repr(s) for s in self.sigmas)


@dataclass(frozen=True)
class FractionalNode:
    """Node i + k strictly between step indices i and i + 1 (0 < k <= 1).

    k = 1 denotes the next integer node; `resolve` normalizes that case.
    """

    base: int
    frac: float

    def __post_init__(self) -> None:
        if not 0.0 < self.frac <= 1.0:
            raise ValueError(f"fractional offset must be in (0, 1], got {self.frac!r}")

    def resolve(self) -> "int | FractionalNode":
        return self.base + 1 if self.frac == 1.0 else self


def _rho_levels(n_levels: int, sigma_hi: float, sigma_lo: float, rho: float) -> list[float]:
    """n_levels points from sigma_hi down to sigma_lo, evenly spaced in
    sigma^(1/rho). Endpoints are pinned exactly so chained sub-schedules
    share boundary levels bit-for-bit."""
    if n_levels == 1:
        return [sigma_hi]
    hi_inv = sigma_hi ** (1.0 / rho)
    lo_inv = sigma_lo ** (1.0 / rho)
    levels = [
        (hi_inv + (i / (n_levels - 1)) * (lo_inv - hi_inv)) ** rho
        for i in range(n_levels)
    ]
    levels[0] = sigma_hi
    levels[-1] = sigma_lo
    return levels


def karras_schedule(
    n_steps: int,
    sigma_min: float = DEFAULT_SIGMA_MIN,
    sigma_max: float = DEFAULT_SIGMA_MAX,
    rho: float = DEFAULT_RHO,
    append_zero: bool = False,
) -> NoiseSchedule:
    """Build n_steps descending levels with the rho-power rule.

    Level i is (sigma_max^(1/rho) + (i/(n_steps-1)) * (sigma_min^(1/rho) -
    sigma_max^(1/rho)))^rho; n_steps = 1 gives the single level sigma_max.
    With append_zero a final exact 0 is added, which is what a sampling run
    that denoises all the way to clean data wants.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if sigma_min <= 0.0 or sigma_max <= 0.0:
        raise ValueError("noise levels must be positive")
    if sigma_min >= sigma_max:
        raise ValueError(f"need sigma_min < sigma_max, got {sigma_min} >= {sigma_max}")
    if rho <= 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    levels = _rho_levels(n_steps, sigma_max, sigma_min, rho)
    if append_zero:
        levels.append(0.0)
    return NoiseSchedule(tuple(levels))


def sub_schedule(
    parent: NoiseSchedule,
    segment_steps: Sequence[int],
    *,
    regenerate: bool = True,
    rho: float = DEFAULT_RHO,
) -> list[NoiseSchedule]:
    """Split `parent` into per-segment schedules covering its step range.

    Segment k spans the parent levels from cumulative offset sum(steps[:k])
    to the segment's last index; consecutive segments share their boundary
    level exactly, so chaining is seamless. In slice mode the interior
    levels are taken verbatim from the parent; with `regenerate` they are
    rebuilt with the rho-power rule between the segment endpoints (a
    terminal-zero segment rebuilds its non-zero part down to the parent's
    smallest non-zero level, then keeps the exact 0).

    A single segment covering the whole parent returns it unchanged.
    """
    steps = [int(s) for s in segment_steps]
    if not steps:
        raise ValueError("need at least one segment")
    if any(s < 1 for s in steps):
        raise ValueError(f"segment steps must be positive, got {steps}")
    if sum(steps) != parent.n_steps:
        raise ValueError(
            f"segment steps sum to {sum(steps)} but parent has {parent.n_steps} steps"
        )
    if len(steps) == 1:
        return [parent]

    out: list[NoiseSchedule] = []
    offset = 0
    for s in steps:
        start, end = offset, offset + s
        hi, lo = parent.sigmas[start], parent.sigmas[end]
        if not regenerate:
            levels = list(parent.sigmas[start : end + 1])
        elif lo == 0.0:
            levels = _rho_levels(s, hi, parent.sigmas[-2], rho) + [0.0]
        else:
            levels = _rho_levels(s + 1, hi, lo, rho)
        out.append(NoiseSchedule(tuple(levels)))
        offset = end
    return out


def sigma_interpolate(sigma_i: float, sigma_next: float, k: float) -> float:
    """Noise level of the fractional node i + k: sigma_i^(1-k) * sigma_next^k.

    Log-linear, so k = 1/2 is the geometric mean of the two levels and
    k = 1 returns sigma_next exactly.
    """
    if not 0.0 < k <= 1.0:
        raise ValueError(f"interpolation fraction must be in (0, 1], got {k!r}")
    if sigma_next < 0.0 or not sigma_i > sigma_next:
        raise ValueError(f"need sigma_i > sigma_next >= 0, got {sigma_i!r}, {sigma_next!r}")
    if k == 1.0:
        return sigma_next
    if sigma_next == 0.0:
        raise ValueError("cannot interpolate toward sigma = 0 with k < 1")
    return sigma_i ** (1.0 - k) * sigma_next ** k
