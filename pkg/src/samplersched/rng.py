"""Deterministic splittable random streams.

Every stochastic quantity in this package (initial draws, per-step noise,
metric projections) comes from a labelled stream, so a run is a pure
function of its seed: the same (seed, purpose, index) label always yields
the same value sequence, regardless of what was drawn elsewhere.

The core generator is SplitMix64. Gaussians use the cosine branch of
Box-Muller, one value per pair of 64-bit outputs; the sine branch is
discarded on purpose so the label-to-sequence mapping stays trivial to
reproduce bit-for-bit in another language or a vectorized path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 2.0 ** -53


class Purpose(enum.IntEnum):
    """Stream label component keeping independent uses of randomness apart."""

    INIT_NOISE = 0
    STEP_NOISE = 1
    METRIC_PROJECTION = 2


def _mix(z: int) -> int:
    """SplitMix64 output finalizer on a 64-bit integer."""
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    """Vectorized `_mix` on a uint64 array (wrapping arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def box_muller(u1, u2):
    """Cosine-branch Box-Muller: z = sqrt(-2 ln u1) * cos(2 pi u2).

    Accepts scalars or arrays with u1, u2 in (0, 1]. u1 = 1 maps to exactly
    0.0; u1 is never 0 by construction of `RngStream.uniforms`.
    """
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * np.asarray(u2, dtype=float))


@dataclass
class RngStream:
    """SplitMix64 stream; value-like, never shared between consumers.

    The scalar and vectorized drawing paths produce bit-identical
    sequences: `gaussians(n)` equals n successive `next_gaussian()` calls.
    """

    state: int
    label: tuple[int, Purpose, int] | None = None

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & _MASK64
        return _mix(self.state)

    def _raw_block(self, n: int) -> np.ndarray:
        # Outputs of n successive next_u64 calls; the state walks in
        # GOLDEN increments, so the whole block is one closed form.
        ks = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GOLDEN) + np.uint64(self.state)
        self.state = (self.state + n * GOLDEN) & _MASK64
        return _mix_array(ks)

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles in (0, 1], from the top 53 bits of each output."""
        block = self._raw_block(n)
        return ((block >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53

    def gaussians(self, n: int) -> np.ndarray:
        """n standard normal draws; consumes 2n generator outputs."""
        u = self.uniforms(2 * n)
        return box_muller(u[0::2], u[1::2])

    def next_gaussian(self) -> float:
        return float(self.gaussians(1)[0])


def derive_stream(seed: int, purpose: Purpose, index: int) -> RngStream:
    """Derive the stream for label (seed, purpose, index).

    The initial state is the SplitMix64 finalizer applied to
    seed XOR GOLDEN*(purpose+1) XOR index*GOLDEN, followed by one warm-up
    advance. Distinct labels give independently behaving sequences.
    """
    purpose = Purpose(purpose)
    mixed = (
        (seed & _MASK64)
        ^ ((GOLDEN * (int(purpose) + 1)) & _MASK64)
        ^ (((index & _MASK64) * GOLDEN) & _MASK64)
    )
    stream = RngStream(_mix(mixed), label=(seed, purpose, index))
    stream.next_u64()
    return stream


def next_gaussian(stream: RngStream) -> float:
    """Draw one standard normal value from `stream` (advances it)."""
    return stream.next_gaussian()
