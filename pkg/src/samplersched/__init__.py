"""Sampler update rules, sampler scheduling, and oracle-based verification.

The package provides:

* ``schedule``: strictly decreasing noise-level ladders and per-segment
  sub-schedules.
* ``samplers``: nine ODE/SDE update rules expressed through a shared
  coefficient-vector paradigm.
* ``scheduler``: chaining of heterogeneous samplers over one trajectory.
* ``oracle``: closed-form denoisers (Gaussian, Gaussian mixture) and exact
  flow endpoints used as ground truth instead of a neural network.
* ``metrics``: desk-scale quality and convergence-order measures.
* ``rng``: deterministic splittable random streams.
* ``cli``: ``run`` / ``sweep`` / ``convergence`` / ``selfcheck`` front end.
"""

from samplersched.rng import Purpose, RngStream, derive_stream, next_gaussian
from samplersched.schedule import (
    DEFAULT_RHO,
    DEFAULT_SIGMA_MAX,
    DEFAULT_SIGMA_MIN,
    FractionalNode,
    NoiseSchedule,
    karras_schedule,
    sigma_interpolate,
    sub_schedule,
)
from samplersched.samplers import (
    CoeffVector,
    NoiseDraw,
    PredictionCache,
    SamplerKind,
    SampleState,
    coefficient_vector,
    convert_prediction,
    euler_baseline_estimate,
    nfe_cost,
    ode_step,
    sde_step,
)
from samplersched.oracle import (
    DenoiserOracle,
    GmmSpec,
    exact_gaussian_ode_endpoint,
    forward_perturb,
    gaussian_denoiser,
    gmm_denoiser,
    sample_gmm,
    score_from_denoiser,
)
from samplersched.scheduler import (
    PRESETS,
    ScheduleOptions,
    ScheduleSpec,
    SegmentSpec,
    SpecParseError,
    Trajectory,
    nfe_total,
    parse_schedule_spec,
    preset,
    run_scheduler,
    sample_batch,
)
from samplersched.metrics import (
    SampleBatch,
    batch_moments,
    fit_convergence_order,
    sliced_w2,
    w2_gaussian,
)

__version__ = "0.1.0"
