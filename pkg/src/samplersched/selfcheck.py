"""Executable property suites backing the `selfcheck` CLI subcommand.

Each check re-derives its expected values independently of the code path
it exercises (direct update formulas, quadrature, finite differences,
fine-grid integration) and returns pass/fail with a short detail string.
The whole battery runs in roughly fifteen seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from samplersched import reference
from samplersched.metrics import SampleBatch, fit_convergence_order, sliced_w2
from samplersched.oracle import (
    DenoiserOracle,
    GmmSpec,
    GmmComponent,
    exact_gaussian_ode_endpoint,
    gaussian_denoiser,
    gmm_denoiser,
    score_from_denoiser,
)
from samplersched.rng import Purpose, RngStream, derive_stream
from samplersched.samplers import (
    CachedPrediction,
    NoiseDraw,
    ODE_KINDS,
    PredictionCache,
    SDE_KINDS,
    SamplerKind,
    SampleState,
    coefficient_vector,
    ode_step,
    sde_step,
)
from samplersched.schedule import karras_schedule
from samplersched.scheduler import (
    PRESETS,
    ScheduleOptions,
    parse_schedule_spec,
    nfe_total,
    preset,
    run_scheduler,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _windows(stream: RngStream, count: int) -> Iterator[tuple[float, float, float]]:
    """Random valid (sigma_prev, sigma_cur, sigma_next) ladders with
    per-gap ratios in [1.05, 8] so weights stay well scaled."""
    for _ in range(count):
        u = stream.uniforms(3)
        s_next = 0.002 * (10.0 / 0.002) ** u[0]
        g1 = 1.05 * (8.0 / 1.05) ** u[1]
        g2 = 1.05 * (8.0 / 1.05) ** u[2]
        yield s_next * g1 * g2, s_next * g1, s_next


def _test_oracle() -> DenoiserOracle:
    spec = GmmSpec(
        (
            GmmComponent(0.35, (1.0, -0.5, 0.25), 0.7),
            GmmComponent(0.65, (-1.2, 0.8, -0.4), 1.1),
        )
    )
    return gmm_denoiser(spec)


def check_rng_known_answer() -> CheckResult:
    s = RngStream(0)
    got = [s.next_u64() for _ in range(3)]
    want = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    from samplersched.rng import box_muller

    bm = float(box_muller(0.5, 0.5))
    bm_want = math.sqrt(-2.0 * math.log(0.5)) * math.cos(math.pi)
    ok = got == want and abs(bm - bm_want) < 1e-12
    return CheckResult("rng_known_answer", ok, f"first outputs {[hex(g) for g in got]}")


def check_rng_moments() -> CheckResult:
    g = derive_stream(1234, Purpose.INIT_NOISE, 0).gaussians(1_000_000)
    mean, std = float(g.mean()), float(g.std(ddof=1))
    ok = abs(mean) <= 0.005 and 0.997 <= std <= 1.003 and bool(np.isfinite(g).all())
    return CheckResult("rng_moments", ok, f"mean={mean:.2e} std={std:.6f}")


def check_coefficient_normalization() -> CheckResult:
    stream = derive_stream(11, Purpose.METRIC_PROJECTION, 0)
    worst = 0.0
    for kind in SamplerKind:
        for s_prev, s_cur, s_next in _windows(stream, 1000):
            c = coefficient_vector(kind, 5, s_prev, s_cur, s_next, history_available=True)
            worst = max(worst, abs(sum(c.entries.values()) - 1.0))
    return CheckResult("coefficient_normalization", worst <= 1e-12, f"max |sum-1| = {worst:.2e}")


def check_generic_matches_direct_ode() -> CheckResult:
    oracle = _test_oracle()
    stream = derive_stream(21, Purpose.METRIC_PROJECTION, 0)
    worst = 0.0
    for kind in ODE_KINDS:
        for s_prev, s_cur, s_next in _windows(stream, 200):
            x = 2.0 * stream.gaussians(3)
            x_prev = 2.0 * stream.gaussians(3)
            d_prev = oracle(x_prev, s_prev)
            cache = PredictionCache({4: CachedPrediction(d_prev, s_prev, "history")})
            state = SampleState(x, 5, s_cur)
            got, _ = ode_step(kind, state, s_next, oracle, cache)
            if kind is SamplerKind.EULER:
                want = reference.euler_update(x, s_cur, s_next, oracle)
            elif kind is SamplerKind.HEUN:
                want = reference.heun_update(x, s_cur, s_next, oracle)
            elif kind is SamplerKind.DPM2:
                want = reference.dpm2_update(x, s_cur, s_next, oracle)
            else:
                want = reference.dpmpp2m_update(x, s_prev, s_cur, s_next, oracle, d_prev)
            rel = np.max(np.abs(got.x - want)) / max(1.0, float(np.max(np.abs(want))))
            worst = max(worst, float(rel))
    return CheckResult("generic_matches_direct_ode", worst <= 1e-9, f"max rel err = {worst:.2e}")


def check_generic_matches_direct_sde() -> CheckResult:
    oracle = _test_oracle()
    stream = derive_stream(22, Purpose.METRIC_PROJECTION, 0)
    worst = 0.0
    for kind in SDE_KINDS:
        for s_prev, s_cur, s_next in _windows(stream, 200):
            x = 2.0 * stream.gaussians(3)
            x_prev = 2.0 * stream.gaussians(3)
            eps = stream.gaussians(3)
            d_prev = oracle(x_prev, s_prev)
            cache = PredictionCache({4: CachedPrediction(d_prev, s_prev, "history")})
            state = SampleState(x, 5, s_cur)
            got, _ = sde_step(kind, state, s_next, oracle, cache, NoiseDraw(eps))
            if kind is SamplerKind.EULER_A:
                want = reference.euler_a_update(x, s_cur, s_next, oracle, eps)
            elif kind is SamplerKind.DPMPP_SDE:
                want = reference.dpmpp_sde_update(x, s_cur, s_next, oracle, eps)
            elif kind is SamplerKind.DPMPP_2S_A:
                want = reference.dpmpp_2s_a_update(x, s_cur, s_next, oracle, eps)
            elif kind is SamplerKind.DPMPP_2M_SDE:
                want = reference.dpmpp_2m_sde_update(x, s_prev, s_cur, s_next, oracle, d_prev, eps)
            else:
                want = reference.dpm2_a_update(x, s_cur, s_next, oracle, eps)
            rel = np.max(np.abs(got.x - want)) / max(1.0, float(np.max(np.abs(want))))
            worst = max(worst, float(rel))
    return CheckResult("generic_matches_direct_sde", worst <= 1e-9, f"max rel err = {worst:.2e}")


def check_correction_scale_degeneracy() -> CheckResult:
    oracle = _test_oracle()
    stream = derive_stream(23, Purpose.METRIC_PROJECTION, 0)
    worst = 0.0
    for _, s_cur, s_next in _windows(stream, 200):
        x = 2.0 * stream.gaussians(3)
        eps = stream.gaussians(3)
        state = SampleState(x, 0, s_cur)
        a, _ = sde_step(
            SamplerKind.DPMPP_SDE, state, s_next, oracle, PredictionCache.empty(),
            NoiseDraw(eps), correction_scale=2.0,
        )
        b, _ = sde_step(
            SamplerKind.DPMPP_2S_A, state, s_next, oracle, PredictionCache.empty(),
            NoiseDraw(eps),
        )
        worst = max(worst, float(np.max(np.abs(a.x - b.x))))
    return CheckResult("correction_scale_degeneracy", worst <= 1e-12, f"max |diff| = {worst:.2e}")


def _perfect_denoiser(x0: np.ndarray) -> Callable[[np.ndarray, float], np.ndarray]:
    def evaluate(x, sigma):
        return np.broadcast_to(x0, np.shape(x)).copy()

    return evaluate


def check_ode_noise_contract() -> CheckResult:
    stream = derive_stream(31, Purpose.METRIC_PROJECTION, 0)
    worst = 0.0
    x0 = np.array([0.4, -1.1, 0.7])
    den = _perfect_denoiser(x0)
    for kind in ODE_KINDS:
        for s_prev, s_cur, s_next in _windows(stream, 100):
            eps = stream.gaussians(3)
            x = x0 + s_cur * eps
            cache = PredictionCache({4: CachedPrediction(x0.copy(), s_prev, "history")})
            got, _ = ode_step(kind, SampleState(x, 5, s_cur), s_next, den, cache)
            want = x0 + s_next * eps
            worst = max(worst, float(np.max(np.abs(got.x - want))))
    return CheckResult("ode_noise_contract", worst <= 1e-12, f"max |diff| = {worst:.2e}")


def check_sde_noise_contract() -> CheckResult:
    n = 100_000
    x0 = np.array(0.6)
    den = _perfect_denoiser(x0)
    s_prev, s_cur, s_next = 6.0, 4.0, 1.5
    worst = 0.0
    for k, kind in enumerate(SDE_KINDS):
        eps_in = derive_stream(41, Purpose.STEP_NOISE, k).gaussians(n)
        eps_new = derive_stream(42, Purpose.STEP_NOISE, k).gaussians(n)
        x = x0 + s_cur * eps_in
        cache = PredictionCache(
            {4: CachedPrediction(np.broadcast_to(x0, (n,)).copy(), s_prev, "history")}
        )
        got, _ = sde_step(kind, SampleState(x, 5, s_cur), s_next, den, cache, NoiseDraw(eps_new))
        std = float(np.std(got.x - x0))
        worst = max(worst, abs(std - s_next) / s_next)
    return CheckResult("sde_noise_contract", worst <= 0.01, f"max rel std dev = {worst:.2e}")


def check_fixed_point_invariance() -> CheckResult:
    identity = lambda x, sigma: np.asarray(x, dtype=float)
    stream = derive_stream(51, Purpose.METRIC_PROJECTION, 0)
    worst = 0.0
    for kind in ODE_KINDS:
        for s_prev, s_cur, s_next in _windows(stream, 100):
            x = 3.0 * stream.gaussians(3)
            cache = PredictionCache({4: CachedPrediction(x.copy(), s_prev, "history")})
            got, _ = ode_step(kind, SampleState(x, 5, s_cur), s_next, identity, cache)
            scale = max(1.0, float(np.max(np.abs(x))))
            worst = max(worst, float(np.max(np.abs(got.x - x))) / scale)
    return CheckResult("fixed_point_invariance", worst <= 1e-12, f"max rel drift = {worst:.2e}")


def _endpoint_error(kind: SamplerKind, n: int, x0, oracle, s_max, s_min, s_data) -> float:
    sched = karras_schedule(n + 1, s_min, s_max)
    x = x0.copy()
    cache = PredictionCache.empty()
    for i in range(sched.n_steps):
        state = SampleState(x, i, sched.sigmas[i])
        state, cache = ode_step(kind, state, sched.sigmas[i + 1], oracle, cache)
        x = state.x
    exact = exact_gaussian_ode_endpoint(x0, s_max, s_min, s_data)
    return float(np.linalg.norm(x - exact) / np.linalg.norm(exact))


def check_convergence_orders() -> CheckResult:
    oracle = gaussian_denoiser(1.0)
    s_max, s_min = 10.0, 0.1
    x0 = s_max * derive_stream(3, Purpose.INIT_NOISE, 0).gaussians(4)
    ns = [8, 16, 32, 64, 128, 256]
    slopes = {}
    for kind in ODE_KINDS:
        errs = [_endpoint_error(kind, n, x0, oracle, s_max, s_min, 1.0) for n in ns]
        slopes[kind.value] = fit_convergence_order(ns, errs)
    ok = (
        0.8 <= slopes["euler"] <= 1.2
        and slopes["heun"] >= 1.7
        and slopes["dpm2"] >= 1.7
        and slopes["dpmpp2m"] >= 1.7
    )
    detail = " ".join(f"{k}={v:.2f}" for k, v in slopes.items())
    return CheckResult("convergence_orders", ok, detail)


def check_scheduler_identities() -> CheckResult:
    oracle = _test_oracle()
    opts = ScheduleOptions(sigma_min=0.05, sigma_max=12.0)

    # One segment is exactly the bare sampler loop, bit for bit.
    spec = parse_schedule_spec("euler_a:6", opts)
    traj = run_scheduler(spec, oracle, seed=9, dim=3)
    sched = karras_schedule(7, 0.05, 12.0)
    x = sched.sigmas[0] * derive_stream(9, Purpose.INIT_NOISE, 0).gaussians(3)
    cache = PredictionCache.empty()
    for i in range(sched.n_steps):
        eps = derive_stream(9, Purpose.STEP_NOISE, i).gaussians(3)
        state, cache = sde_step(
            SamplerKind.EULER_A, SampleState(x, i, sched.sigmas[i]), sched.sigmas[i + 1],
            oracle, cache, NoiseDraw(eps),
        )
        x = state.x
    m1 = bool(np.array_equal(traj.final_x, x))

    # Splitting a memoryless sampler in slice mode changes nothing.
    opts_slice = ScheduleOptions(sigma_min=0.05, sigma_max=12.0, mode="slice")
    whole = run_scheduler(parse_schedule_spec("euler:5", opts_slice), oracle, seed=4, dim=3)
    split = run_scheduler(parse_schedule_spec("euler:2+euler:3", opts_slice), oracle, seed=4, dim=3)
    sliced = bool(np.array_equal(whole.final_x, split.final_x))

    rep = run_scheduler(parse_schedule_spec("euler_a:6", opts), oracle, seed=9, dim=3)
    deterministic = rep.to_csv() == traj.to_csv()

    ok = m1 and sliced and deterministic
    return CheckResult(
        "scheduler_identities", ok, f"m1={m1} slice_split={sliced} deterministic={deterministic}"
    )


def check_nfe_accounting() -> CheckResult:
    oracle = gaussian_denoiser(1.0)
    failures = []
    for name in PRESETS:
        for append_zero in (False, True):
            opts = ScheduleOptions(sigma_min=0.05, sigma_max=12.0, append_zero=append_zero)
            spec = preset(name, 2, opts)
            calls = 0

            def counted(x, s):
                nonlocal calls
                calls += 1
                return oracle(x, s)

            traj = run_scheduler(spec, counted, seed=1, dim=2)
            expected = nfe_total(spec)
            if not (calls == traj.nfe == expected):
                failures.append(f"{name} zero={append_zero}: {calls}/{traj.nfe}/{expected}")
            if not append_zero and expected != 12:
                failures.append(f"{name}: budget {expected} != 12 at unit 2")
    return CheckResult("nfe_accounting", not failures, "; ".join(failures) or "all presets exact")


def check_oracle_consistency() -> CheckResult:
    # Posterior mean against brute-force quadrature (two-mode 1-D mixture).
    spec = GmmSpec((GmmComponent(0.5, (-2.0,), 0.1), GmmComponent(0.5, (2.0,), 0.1)))
    oracle = gmm_denoiser(spec)
    grid = np.linspace(-12.0, 12.0, 400_001)
    weights, means, stds = spec.arrays()

    def quad_posterior_mean(x: float, sigma: float) -> float:
        prior = np.zeros_like(grid)
        for w, m, s in zip(weights, means[:, 0], stds):
            prior += w * np.exp(-0.5 * ((grid - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        like = np.exp(-0.5 * ((x - grid) / sigma) ** 2)
        num = np.trapezoid(grid * prior * like, grid)
        den = np.trapezoid(prior * like, grid)
        return num / den

    quad_err = 0.0
    for x, sigma in ((0.5, 1.0), (-1.3, 0.6), (2.4, 2.5)):
        got = float(oracle(np.array([x]), sigma)[0])
        quad_err = max(quad_err, abs(got - quad_posterior_mean(x, sigma)))

    # Score against central finite differences of the perturbed log density.
    spec2 = GmmSpec((GmmComponent(0.4, (-1.5, 0.5), 0.6), GmmComponent(0.6, (1.0, -0.8), 0.9)))
    oracle2 = gmm_denoiser(spec2)
    w2, mu2, s2 = spec2.arrays()

    def log_density(pt: np.ndarray, sigma: float) -> float:
        var = s2 * s2 + sigma * sigma
        logs = [
            math.log(w)
            - math.log(2 * math.pi * v)
            - float(np.sum((pt - m) ** 2)) / (2 * v)
            for w, m, v in zip(w2, mu2, var)
        ]
        peak = max(logs)
        return peak + math.log(sum(math.exp(l - peak) for l in logs))

    stream = derive_stream(71, Purpose.METRIC_PROJECTION, 0)
    fd_err = 0.0
    for _ in range(20):
        u = stream.uniforms(1)[0]
        sigma = 0.05 * (10.0 / 0.05) ** u
        pt = 2.0 * stream.gaussians(2)
        score = score_from_denoiser(oracle2, pt, sigma)
        h = 1e-4 * math.sqrt(float(np.min(s2 * s2)) + sigma * sigma)
        for d in range(2):
            lo, hi = pt.copy(), pt.copy()
            lo[d] -= h
            hi[d] += h
            fd = (log_density(hi, sigma) - log_density(lo, sigma)) / (2 * h)
            fd_err = max(fd_err, abs(float(score[d]) - fd))

    # Exact flow endpoint against a fine-grid explicit integration.
    x0 = np.array([4.0])
    s_grid = np.linspace(math.sqrt(3.0), 0.0, 100_001)
    factors = 1.0 + np.diff(s_grid) * s_grid[:-1] / (1.0 + s_grid[:-1] ** 2)
    fine = float(x0[0] * np.prod(factors))
    exact = float(exact_gaussian_ode_endpoint(x0, math.sqrt(3.0), 0.0, 1.0)[0])
    euler_err = abs(fine - exact) / abs(exact)

    ok = quad_err <= 1e-6 and fd_err <= 1e-5 and euler_err <= 1e-4
    return CheckResult(
        "oracle_consistency",
        ok,
        f"quad={quad_err:.2e} fd={fd_err:.2e} fine_euler={euler_err:.2e}",
    )


def check_metric_determinism() -> CheckResult:
    stream_a = derive_stream(81, Purpose.INIT_NOISE, 0)
    xs = SampleBatch(stream_a.gaussians(4000).reshape(2000, 2))
    ys = SampleBatch(derive_stream(82, Purpose.INIT_NOISE, 0).gaussians(4000).reshape(2000, 2))
    v1 = sliced_w2(xs, ys, 16, seed=5)
    v2 = sliced_w2(xs, ys, 16, seed=5)
    same_batch = sliced_w2(xs, xs, 16, seed=5)
    ok = v1 == v2 and same_batch == 0.0
    return CheckResult("metric_determinism", ok, f"repeat diff={abs(v1 - v2):.1e} self={same_batch}")


ALL_CHECKS = (
    check_rng_known_answer,
    check_rng_moments,
    check_coefficient_normalization,
    check_generic_matches_direct_ode,
    check_generic_matches_direct_sde,
    check_correction_scale_degeneracy,
    check_ode_noise_contract,
    check_sde_noise_contract,
    check_fixed_point_invariance,
    check_convergence_orders,
    check_scheduler_identities,
    check_nfe_accounting,
    check_oracle_consistency,
    check_metric_determinism,
)


def run_all() -> list[CheckResult]:
    return [check() for check in ALL_CHECKS]
