"""Segment-wise sampler scheduling: different update rules on one ladder.

A schedule spec like ``"heun:10+dpmpp2m:20"`` partitions a single sampling
trajectory into segments, each driven by its own sampler. The state x is
carried across segment boundaries untouched (no re-noising); multistep
history is cleared at boundaries by default, since the incoming prediction
was produced under a different rule.

Runs are bit-reproducible: the initial draw comes from the
(seed, INIT_NOISE, 0) stream and the per-step noise of stochastic samplers
from (seed, STEP_NOISE, global_step), so two specs agree on the noise they
see at any shared step index.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field

import numpy as np

from samplersched.rng import Purpose, derive_stream
from samplersched.samplers import (
    NoiseDraw,
    PredictionCache,
    SamplerKind,
    SampleState,
    nfe_cost,
    ode_step,
    sde_step,
)
from samplersched.schedule import (
    DEFAULT_RHO,
    DEFAULT_SIGMA_MAX,
    DEFAULT_SIGMA_MIN,
    NoiseSchedule,
    karras_schedule,
    sub_schedule,
)


@dataclass(frozen=True)
class ScheduleOptions:
    """Knobs shared by every segment of a run.

    ``mode`` picks how per-segment schedules are built: "regenerate"
    rebuilds each segment's interior levels with the rho-power rule between
    the segment endpoints, "slice" takes them verbatim from the global
    ladder. ``append_zero`` adds a final exact-0 level (one extra step that
    contracts onto the last prediction).
    """

    sigma_min: float = DEFAULT_SIGMA_MIN
    sigma_max: float = DEFAULT_SIGMA_MAX
    rho: float = DEFAULT_RHO
    mode: str = "regenerate"
    append_zero: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("regenerate", "slice"):
            raise ValueError(f"mode must be 'regenerate' or 'slice', got {self.mode!r}")
        if not 0.0 < self.sigma_min < self.sigma_max:
            raise ValueError(
                f"need 0 < sigma_min < sigma_max, got {self.sigma_min!r}, {self.sigma_max!r}"
            )


@dataclass(frozen=True)
class SegmentSpec:
    kind: SamplerKind
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError(f"segment steps must be >= 1, got {self.steps}")


@dataclass(frozen=True)
class ScheduleSpec:
    """Ordered segments plus the schedule options governing the run."""

    segments: tuple[SegmentSpec, ...]
    options: ScheduleOptions = field(default_factory=ScheduleOptions)

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("a schedule spec needs at least one segment")

    @property
    def total_steps(self) -> int:
        return sum(seg.steps for seg in self.segments)

    @property
    def text(self) -> str:
        """Canonical spec string, parseable by `parse_schedule_spec`."""
        return "+".join(f"{seg.kind.value}:{seg.steps}" for seg in self.segments)


class SpecParseError(ValueError):
    """Schedule spec text rejected; `offset` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


_SEGMENT_RE = re.compile(r"^(\s*)([A-Za-z0-9_]+)\s*:\s*([+-]?\d+)\s*$")


def parse_schedule_spec(text: str, options: ScheduleOptions | None = None) -> ScheduleSpec:
    """Parse ``name:steps`` segments joined by '+', whitespace-insensitive."""
    if not text.strip():
        raise SpecParseError("empty schedule spec", 0)
    segments = []
    pos = 0
    for part in text.split("+"):
        start = pos
        pos += len(part) + 1
        if not part.strip():
            raise SpecParseError("empty segment", start)
        m = _SEGMENT_RE.match(part)
        if m is None:
            raise SpecParseError(f"expected 'name:steps', got {part.strip()!r}", start)
        name_offset = start + len(m.group(1))
        try:
            kind = SamplerKind.from_name(m.group(2))
        except ValueError as exc:
            raise SpecParseError(str(exc), name_offset) from None
        steps = int(m.group(3))
        if steps < 1:
            raise SpecParseError(
                f"segment steps must be >= 1, got {steps}", start + part.index(m.group(3))
            )
        segments.append(SegmentSpec(kind, steps))
    return ScheduleSpec(tuple(segments), options or ScheduleOptions())


# Named two-segment configurations, each parameterized by a budget unit N.
# The first six put a stochastic sampler early and a deterministic one
# late; all land on a 6N-evaluation budget (without a terminal zero step).
PRESETS: dict[str, tuple[tuple[SamplerKind, int], ...]] = {
    "dpm2a-dpm2": ((SamplerKind.DPM2_A, 1), (SamplerKind.DPM2, 2)),
    "dpm2a-dpmpp2m": ((SamplerKind.DPM2_A, 1), (SamplerKind.DPMPP_2M, 4)),
    "dpmpp2sa-dpm2": ((SamplerKind.DPMPP_2S_A, 1), (SamplerKind.DPM2, 2)),
    "dpmpp2sa-dpmpp2m": ((SamplerKind.DPMPP_2S_A, 1), (SamplerKind.DPMPP_2M, 4)),
    "dpmppsde-dpmpp2m": ((SamplerKind.DPMPP_SDE, 1), (SamplerKind.DPMPP_2M, 4)),
    "dpmppsde-dpm2": ((SamplerKind.DPMPP_SDE, 1), (SamplerKind.DPM2, 2)),
    "heun-euler": ((SamplerKind.HEUN, 1), (SamplerKind.EULER, 4)),
    "heun-dpmpp2m": ((SamplerKind.HEUN, 1), (SamplerKind.DPMPP_2M, 4)),
}

# The stochastic-early / deterministic-late subset.
SDE_EARLY_PRESETS = (
    "dpm2a-dpm2",
    "dpm2a-dpmpp2m",
    "dpmpp2sa-dpm2",
    "dpmpp2sa-dpmpp2m",
    "dpmppsde-dpmpp2m",
    "dpmppsde-dpm2",
)


def preset(name: str, n: int = 1, options: ScheduleOptions | None = None) -> ScheduleSpec:
    """Instantiate a named preset at budget unit `n`."""
    try:
        template = PRESETS[name]
    except KeyError:
        available = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; available: {available}") from None
    if n < 1:
        raise ValueError(f"preset budget unit must be >= 1, got {n}")
    segments = tuple(SegmentSpec(kind, mult * n) for kind, mult in template)
    return ScheduleSpec(segments, options or ScheduleOptions())


def nfe_total(spec: ScheduleSpec) -> int:
    """Denoiser evaluations a run of `spec` performs, including the
    cheaper terminal step when the schedule ends at zero."""
    total = sum(seg.steps * nfe_cost(seg.kind, False) for seg in spec.segments)
    if spec.options.append_zero:
        last = spec.segments[-1].kind
        total += nfe_cost(last, True) - nfe_cost(last, False)
    return total


@dataclass(frozen=True)
class Trajectory:
    """Recorded run: every state, the realized ladder, and the cost."""

    spec: ScheduleSpec
    seed: int
    states: tuple[SampleState, ...]
    sigma_trace: tuple[float, ...]
    nfe: int
    nfe_trace: tuple[int, ...]
    segment_boundaries: tuple[int, ...]

    @property
    def final_x(self) -> np.ndarray:
        return self.states[-1].x

    def segment_of_step(self, step: int) -> int:
        """Index of the segment that produced state `step` (state 0 -> 0)."""
        seg = 0
        for boundary in self.segment_boundaries:
            if step > boundary:
                seg += 1
        return seg

    def to_csv(self) -> str:
        """Dump as CSV rows (step, segment, sigma, nfe_cum, x_0..x_{D-1})."""
        dim = int(np.asarray(self.states[0].x).size)
        out = io.StringIO()
        header = ["step", "segment", "sigma", "nfe_cum"] + [f"x_{d}" for d in range(dim)]
        out.write(",".join(header) + "\n")
        for k, state in enumerate(self.states):
            coords = np.asarray(state.x, dtype=float).reshape(-1)
            row = [str(k), str(self.segment_of_step(k)), repr(self.sigma_trace[k]),
                   str(self.nfe_trace[k])]
            row += [repr(float(v)) for v in coords]
            out.write(",".join(row) + "\n")
        return out.getvalue()


def _global_schedule(spec: ScheduleSpec) -> NoiseSchedule:
    opts = spec.options
    total = spec.total_steps
    if opts.append_zero:
        return karras_schedule(total, opts.sigma_min, opts.sigma_max, opts.rho, append_zero=True)
    return karras_schedule(total + 1, opts.sigma_min, opts.sigma_max, opts.rho, append_zero=False)


def _execute(
    spec: ScheduleSpec,
    denoiser,
    seed: int,
    shape: tuple[int, ...],
    record_states: bool,
    carry_history: bool,
):
    opts = spec.options
    parent = _global_schedule(spec)
    subs = sub_schedule(
        parent,
        [seg.steps for seg in spec.segments],
        regenerate=(opts.mode == "regenerate"),
        rho=opts.rho,
    )

    calls = 0

    def counted(x, sigma):
        nonlocal calls
        calls += 1
        return denoiser(x, sigma)

    n_values = int(np.prod(shape))
    init = derive_stream(seed, Purpose.INIT_NOISE, 0)
    x = parent.sigmas[0] * init.gaussians(n_values).reshape(shape)

    states = [SampleState(x, 0, parent.sigmas[0])]
    sigma_trace = [parent.sigmas[0]]
    nfe_trace = [0]
    boundaries: list[int] = []
    cache = PredictionCache.empty()
    global_step = 0

    for seg_idx, (seg, sub) in enumerate(zip(spec.segments, subs)):
        if seg_idx > 0:
            boundaries.append(global_step)
            if not carry_history:
                cache = PredictionCache.empty()
        for j in range(sub.n_steps):
            sigma_next = sub.sigmas[j + 1]
            state = SampleState(x, global_step, sub.sigmas[j])
            if seg.kind.is_sde:
                eps = (
                    derive_stream(seed, Purpose.STEP_NOISE, global_step)
                    .gaussians(n_values)
                    .reshape(shape)
                )
                new_state, cache = sde_step(
                    seg.kind, state, sigma_next, counted, cache, NoiseDraw(eps)
                )
            else:
                new_state, cache = ode_step(seg.kind, state, sigma_next, counted, cache)
            x = new_state.x
            global_step += 1
            sigma_trace.append(sigma_next)
            nfe_trace.append(calls)
            if record_states:
                states.append(new_state)

    return x, states, sigma_trace, nfe_trace, boundaries, calls


def run_scheduler(
    spec: ScheduleSpec,
    denoiser,
    seed: int,
    dim: int,
    carry_history: bool = False,
) -> Trajectory:
    """Run one full trajectory of `spec` and record it.

    Draws x ~ N(0, sigma_max^2 I) from the seeded init stream, then steps
    each segment with its sampler on its sub-schedule, carrying x (and,
    only when `carry_history` is set, multistep history) across segment
    boundaries. Identical inputs give bit-identical trajectories.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    x, states, sigma_trace, nfe_trace, boundaries, calls = _execute(
        spec, denoiser, seed, (dim,), record_states=True, carry_history=carry_history
    )
    return Trajectory(
        spec=spec,
        seed=seed,
        states=tuple(states),
        sigma_trace=tuple(sigma_trace),
        nfe=calls,
        nfe_trace=tuple(nfe_trace),
        segment_boundaries=tuple(boundaries),
    )


def sample_batch(
    spec: ScheduleSpec,
    denoiser,
    seed: int,
    dim: int,
    n_samples: int,
    carry_history: bool = False,
) -> np.ndarray:
    """Run `n_samples` trajectories of `spec` in one vectorized pass.

    Sample r of the batch sees exactly the draws that positions
    [r*dim, (r+1)*dim) of the same streams would provide, so a batch of 1
    reproduces `run_scheduler` bit-for-bit. Returns the final states,
    shape (n_samples, dim). The denoiser must accept batched input.
    """
    if dim < 1 or n_samples < 1:
        raise ValueError("dim and n_samples must be >= 1")
    x, *_ = _execute(
        spec, denoiser, seed, (n_samples, dim), record_states=False, carry_history=carry_history
    )
    return x
