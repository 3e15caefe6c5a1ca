import math

import numpy as np
import pytest

from samplersched import reference
from samplersched.oracle import gaussian_denoiser
from samplersched.rng import Purpose, derive_stream
from samplersched.samplers import (
    CachedPrediction,
    CoeffVector,
    NoiseDraw,
    ODE_KINDS,
    PredictionCache,
    SDE_KINDS,
    SamplerKind,
    SampleState,
    coefficient_vector,
    convert_prediction,
    euler_baseline_estimate,
    nfe_cost,
    ode_step,
    sde_step,
)
from samplersched.schedule import FractionalNode


def constant_denoiser(value):
    return lambda x, sigma: np.full_like(np.asarray(x, dtype=float), value)


def identity_denoiser(x, sigma):
    return np.asarray(x, dtype=float)


def random_windows(stream, count, lo=0.01, hi=10.0, ratio_hi=8.0):
    for _ in range(count):
        u = stream.uniforms(3)
        s_next = lo * (hi / lo) ** u[0]
        g1 = 1.05 * (ratio_hi / 1.05) ** u[1]
        g2 = 1.05 * (ratio_hi / 1.05) ** u[2]
        yield s_next * g1 * g2, s_next * g1, s_next


class TestSamplerKind:
    def test_canonical_names_round_trip(self):
        names = [
            "euler", "heun", "dpm2", "dpmpp2m",
            "euler_a", "dpm2_a", "dpmpp_sde", "dpmpp_2s_a", "dpmpp_2m_sde",
        ]
        assert [k.value for k in SamplerKind] == names
        for name in names:
            assert SamplerKind.from_name(name).value == name
        assert SamplerKind.from_name("  HEUN ") is SamplerKind.HEUN

    def test_unknown_name_lists_choices(self):
        with pytest.raises(ValueError, match="euler_a"):
            SamplerKind.from_name("plms")

    def test_classes(self):
        assert [k.is_sde for k in ODE_KINDS] == [False] * 4
        assert [k.is_sde for k in SDE_KINDS] == [True] * 5


class TestConvertPrediction:
    def test_data_to_noise_example(self):
        out = convert_prediction(np.array([2.0]), np.array([4.0]), 2.0, "data_to_noise")
        assert out == pytest.approx([1.0])

    def test_zero_noise_recovers_state(self):
        x = np.array([1.5, -2.0])
        out = convert_prediction(np.zeros(2), x, 3.7, "noise_to_data")
        assert np.array_equal(out, x)

    def test_round_trip_identity(self):
        stream = derive_stream(2, Purpose.METRIC_PROJECTION, 0)
        for _ in range(50):
            x = stream.gaussians(5)
            d = stream.gaussians(5)
            sigma = float(stream.uniforms(1)[0] * 9.9 + 0.1)
            eps = convert_prediction(d, x, sigma, "data_to_noise")
            back = convert_prediction(eps, x, sigma, "noise_to_data")
            assert np.max(np.abs(back - d)) <= 1e-12 * max(1.0, float(np.max(np.abs(d))))

    def test_sigma_zero_rejected(self):
        with pytest.raises(ValueError):
            convert_prediction(np.zeros(2), np.zeros(2), 0.0, "data_to_noise")

    def test_unknown_direction_rejected(self):
        with pytest.raises(ValueError):
            convert_prediction(np.zeros(2), np.zeros(2), 1.0, "sideways")


class TestCoefficientVector:
    def test_euler_is_current_node_only(self):
        c = coefficient_vector(SamplerKind.EULER, 3, None, 5.0, 2.0)
        assert c.entries == {3: 1.0}

    def test_heun_window_two_one(self):
        c = coefficient_vector(SamplerKind.HEUN, 3, None, 2.0, 1.0)
        assert c.entries == {3: 0.0, 4: 1.0}

    def test_dpm2_window_four_one(self):
        c = coefficient_vector(SamplerKind.DPM2, 3, None, 4.0, 1.0)
        assert c.entries == {3: -1.0, FractionalNode(3, 0.5): 2.0}

    def test_dpmpp_sde_is_half_half(self):
        c = coefficient_vector(SamplerKind.DPMPP_SDE, 0, None, 3.0, 1.0)
        assert c.entries == {0: 0.5, 1: 0.5}

    def test_dpmpp_2s_a_is_next_node_only(self):
        c = coefficient_vector(SamplerKind.DPMPP_2S_A, 2, None, 3.0, 1.0)
        assert c.entries == {3: 1.0}

    def test_dpm2_a_next_node_weighting(self):
        c = coefficient_vector(SamplerKind.DPM2_A, 0, None, 3.0, 1.5)
        assert c.entries == {0: -1.0, 1: 2.0}

    def test_multistep_without_history_falls_back(self):
        for kind in (SamplerKind.DPMPP_2M, SamplerKind.DPMPP_2M_SDE):
            c = coefficient_vector(kind, 5, None, 2.0, 1.0, history_available=False)
            assert c.entries == {5: 1.0}

    def test_multistep_weights(self):
        s_prev, s_cur, s_next = 4.0, 2.0, 1.0
        a = 0.5 * math.log(s_cur / s_next) / math.log(s_prev / s_cur)
        for kind in (SamplerKind.DPMPP_2M, SamplerKind.DPMPP_2M_SDE):
            c = coefficient_vector(kind, 5, s_prev, s_cur, s_next, history_available=True)
            assert c.entries[5] == pytest.approx(1.0 + a, rel=1e-15)
            assert c.entries[4] == pytest.approx(-a, rel=1e-15)

    def test_zero_next_level_gives_euler_for_every_kind(self):
        for kind in SamplerKind:
            c = coefficient_vector(kind, 7, 4.0, 2.0, 0.0, history_available=True)
            assert c.entries == {7: 1.0}

    def test_normalization_over_random_windows(self):
        stream = derive_stream(3, Purpose.METRIC_PROJECTION, 0)
        for kind in SamplerKind:
            for s_prev, s_cur, s_next in random_windows(stream, 100):
                c = coefficient_vector(kind, 2, s_prev, s_cur, s_next, history_available=True)
                assert abs(sum(c.entries.values()) - 1.0) <= 1e-12

    def test_non_decreasing_window_rejected(self):
        with pytest.raises(ValueError):
            coefficient_vector(SamplerKind.EULER, 0, None, 1.0, 1.0)
        with pytest.raises(ValueError):
            coefficient_vector(
                SamplerKind.DPMPP_2M, 1, 1.0, 2.0, 1.0, history_available=True
            )

    def test_sum_constraint_enforced(self):
        with pytest.raises(ValueError):
            CoeffVector({0: 0.5, 1: 0.6})

    def test_fractional_key_normalization(self):
        c = CoeffVector({FractionalNode(2, 1.0): 1.0})
        assert c.entries == {3: 1.0}


class TestEulerBaselineEstimate:
    def test_halfway_example(self):
        out = euler_baseline_estimate(np.array([4.0]), np.array([2.0]), 4.0, 2.0)
        assert out == pytest.approx([3.0])

    def test_zero_length_step_returns_state(self):
        x = np.array([1.0, 2.0])
        assert np.array_equal(euler_baseline_estimate(x, np.zeros(2), 3.0, 3.0), x)

    def test_full_denoise_returns_prediction(self):
        d = np.array([0.5, -0.5])
        assert np.array_equal(euler_baseline_estimate(np.ones(2), d, 3.0, 0.0), d)

    def test_target_above_current_rejected(self):
        with pytest.raises(ValueError):
            euler_baseline_estimate(np.ones(1), np.ones(1), 2.0, 3.0)


class TestOdeStep:
    def test_euler_example(self):
        state = SampleState(np.array([4.0]), 0, 2.0)
        out, _ = ode_step(SamplerKind.EULER, state, 1.0, constant_denoiser(2.0), PredictionCache.empty())
        assert out.x == pytest.approx([3.0])
        assert out.step_index == 1
        assert out.sigma == 1.0

    def test_heun_worked_example(self):
        # Gaussian oracle with unit data std: D(x, sigma) = x/(1+sigma^2).
        # D(4, 2) = 0.8, baseline at 1 is 2.4, D(2.4, 1) = 1.2, and the
        # correction gives 0.5*4 + 0.5*0.8 + 0.5*(2-1)*(1.2-0.8) = 2.6.
        state = SampleState(np.array([4.0]), 0, 2.0)
        out, _ = ode_step(SamplerKind.HEUN, state, 1.0, gaussian_denoiser(1.0), PredictionCache.empty())
        assert out.x == pytest.approx([2.6], abs=1e-12)

    def test_fixed_point_invariance(self):
        stream = derive_stream(4, Purpose.METRIC_PROJECTION, 0)
        for kind in ODE_KINDS:
            for s_prev, s_cur, s_next in random_windows(stream, 50):
                x = 2.0 * stream.gaussians(3)
                cache = PredictionCache({4: CachedPrediction(x.copy(), s_prev, "history")})
                out, _ = ode_step(kind, SampleState(x, 5, s_cur), s_next, identity_denoiser, cache)
                scale = max(1.0, float(np.max(np.abs(x))))
                assert np.max(np.abs(out.x - x)) <= 1e-12 * scale

    def test_zero_step_returns_prediction(self):
        oracle = gaussian_denoiser(1.0)
        x = np.array([3.0, -1.0])
        for kind in ODE_KINDS:
            out, _ = ode_step(kind, SampleState(x, 2, 0.5), 0.0, oracle, PredictionCache.empty())
            assert np.array_equal(out.x, oracle(x, 0.5))

    def test_multistep_uses_history_and_cold_starts_as_euler(self):
        oracle = gaussian_denoiser(1.0)
        x = np.array([2.0])
        state = SampleState(x, 1, 2.0)
        cold, _ = ode_step(SamplerKind.DPMPP_2M, state, 1.0, oracle, PredictionCache.empty())
        euler, _ = ode_step(SamplerKind.EULER, state, 1.0, oracle, PredictionCache.empty())
        assert np.array_equal(cold.x, euler.x)
        history = PredictionCache({0: CachedPrediction(oracle(np.array([2.5]), 4.0), 4.0, "history")})
        warm, _ = ode_step(SamplerKind.DPMPP_2M, state, 1.0, oracle, history)
        assert not np.array_equal(warm.x, euler.x)

    def test_cache_contents_and_tags(self):
        oracle = gaussian_denoiser(1.0)
        state = SampleState(np.array([4.0]), 3, 2.0)
        _, cache = ode_step(SamplerKind.HEUN, state, 1.0, oracle, PredictionCache.empty())
        assert cache.entries[3].tag == "current"
        assert cache.entries[3].sigma == 2.0
        assert cache.entries[4].tag == "euler-estimate"
        assert cache.entries[4].sigma == 1.0
        _, cache2 = ode_step(SamplerKind.DPM2, state, 1.0, oracle, PredictionCache.empty())
        node = FractionalNode(3, 0.5)
        assert cache2.entries[node].tag == "euler-estimate"
        assert cache2.entries[node].sigma == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_sde_kind_rejected(self):
        state = SampleState(np.array([1.0]), 0, 2.0)
        with pytest.raises(ValueError):
            ode_step(SamplerKind.EULER_A, state, 1.0, identity_denoiser, PredictionCache.empty())

    def test_stale_history_sigma_rejected(self):
        oracle = gaussian_denoiser(1.0)
        bad = PredictionCache({0: CachedPrediction(np.array([1.0]), 1.5, "history")})
        state = SampleState(np.array([1.0]), 1, 2.0)
        with pytest.raises(ValueError):
            ode_step(SamplerKind.DPMPP_2M, state, 1.0, oracle, bad)


class TestSdeStep:
    def test_euler_a_deterministic_part(self):
        state = SampleState(np.array([4.0]), 0, 2.0)
        out, _ = sde_step(
            SamplerKind.EULER_A, state, 1.0, constant_denoiser(2.0),
            PredictionCache.empty(), NoiseDraw(np.array([0.0])),
        )
        assert out.x == pytest.approx([2.5], abs=1e-15)

    def test_euler_a_noise_coefficient(self):
        state = SampleState(np.array([4.0]), 0, 2.0)
        out, _ = sde_step(
            SamplerKind.EULER_A, state, 1.0, constant_denoiser(2.0),
            PredictionCache.empty(), NoiseDraw(np.array([1.0])),
        )
        assert out.x == pytest.approx([2.5 + 0.5 * math.sqrt(3.0)], abs=1e-14)

    def test_zero_next_level_collapses_to_prediction(self):
        oracle = gaussian_denoiser(1.0)
        x = np.array([4.0, -2.0])
        for kind in SDE_KINDS:
            out, _ = sde_step(
                kind, SampleState(x, 0, 0.7), 0.0, oracle,
                PredictionCache.empty(), NoiseDraw(np.full(2, 13.0)),
            )
            assert np.array_equal(out.x, oracle(x, 0.7))

    def test_correction_scale_two_matches_dpmpp_2s_a(self):
        oracle = gaussian_denoiser(1.3)
        stream = derive_stream(5, Purpose.METRIC_PROJECTION, 0)
        for _, s_cur, s_next in random_windows(stream, 100):
            x = 2.0 * stream.gaussians(3)
            eps = stream.gaussians(3)
            state = SampleState(x, 0, s_cur)
            scaled, _ = sde_step(
                SamplerKind.DPMPP_SDE, state, s_next, oracle,
                PredictionCache.empty(), NoiseDraw(eps), correction_scale=2.0,
            )
            direct, _ = sde_step(
                SamplerKind.DPMPP_2S_A, state, s_next, oracle,
                PredictionCache.empty(), NoiseDraw(eps),
            )
            assert np.max(np.abs(scaled.x - direct.x)) <= 1e-12

    def test_correction_scale_rejected_without_correction_term(self):
        state = SampleState(np.array([1.0]), 0, 2.0)
        for kind in (SamplerKind.EULER_A, SamplerKind.DPMPP_2S_A):
            with pytest.raises(ValueError):
                sde_step(
                    kind, state, 1.0, identity_denoiser,
                    PredictionCache.empty(), NoiseDraw(np.array([0.0])),
                    correction_scale=2.0,
                )

    def test_dpm2_a_matches_direct_row(self):
        oracle = gaussian_denoiser(0.9)
        stream = derive_stream(6, Purpose.METRIC_PROJECTION, 0)
        for _, s_cur, s_next in random_windows(stream, 50):
            x = stream.gaussians(2)
            eps = stream.gaussians(2)
            got, _ = sde_step(
                SamplerKind.DPM2_A, SampleState(x, 0, s_cur), s_next, oracle,
                PredictionCache.empty(), NoiseDraw(eps),
            )
            want = reference.dpm2_a_update(x, s_cur, s_next, oracle, eps)
            assert np.max(np.abs(got.x - want)) <= 1e-9 * max(1.0, float(np.max(np.abs(want))))

    def test_dpm2_a_next_node_variant_differs_from_midpoint_form(self):
        oracle = gaussian_denoiser(0.9)
        x = np.array([1.0, -2.0])
        eps = np.zeros(2)
        state = SampleState(x, 0, 3.0)
        mid, _ = sde_step(
            SamplerKind.DPM2_A, state, 1.0, oracle, PredictionCache.empty(), NoiseDraw(eps)
        )
        alt, _ = sde_step(
            SamplerKind.DPM2_A, state, 1.0, oracle, PredictionCache.empty(), NoiseDraw(eps),
            dpm2a_next_node_variant=True,
        )
        assert not np.allclose(mid.x, alt.x)

    def test_ode_kind_rejected(self):
        state = SampleState(np.array([1.0]), 0, 2.0)
        with pytest.raises(ValueError):
            sde_step(
                SamplerKind.HEUN, state, 1.0, identity_denoiser,
                PredictionCache.empty(), NoiseDraw(np.array([0.0])),
            )

    def test_noise_shape_mismatch_rejected(self):
        state = SampleState(np.array([1.0, 2.0]), 0, 2.0)
        with pytest.raises(ValueError):
            sde_step(
                SamplerKind.EULER_A, state, 1.0, identity_denoiser,
                PredictionCache.empty(), NoiseDraw(np.array([0.0])),
            )


class TestGenericAgainstDirectRows:
    """The coefficient-vector step must agree with each rule written out."""

    def test_ode_rows(self):
        oracle = gaussian_denoiser(1.2)
        stream = derive_stream(7, Purpose.METRIC_PROJECTION, 0)
        direct = {
            SamplerKind.EULER: lambda x, sp, s0, s1, dp: reference.euler_update(x, s0, s1, oracle),
            SamplerKind.HEUN: lambda x, sp, s0, s1, dp: reference.heun_update(x, s0, s1, oracle),
            SamplerKind.DPM2: lambda x, sp, s0, s1, dp: reference.dpm2_update(x, s0, s1, oracle),
            SamplerKind.DPMPP_2M: lambda x, sp, s0, s1, dp: reference.dpmpp2m_update(
                x, sp, s0, s1, oracle, dp
            ),
        }
        for kind in ODE_KINDS:
            for s_prev, s_cur, s_next in random_windows(stream, 100):
                x = 2.0 * stream.gaussians(4)
                d_prev = oracle(2.0 * stream.gaussians(4), s_prev)
                cache = PredictionCache({4: CachedPrediction(d_prev, s_prev, "history")})
                got, _ = ode_step(kind, SampleState(x, 5, s_cur), s_next, oracle, cache)
                want = direct[kind](x, s_prev, s_cur, s_next, d_prev)
                assert np.max(np.abs(got.x - want)) <= 1e-9 * max(1.0, float(np.max(np.abs(want))))

    def test_sde_rows_shared_noise(self):
        oracle = gaussian_denoiser(0.8)
        stream = derive_stream(8, Purpose.METRIC_PROJECTION, 0)
        direct = {
            SamplerKind.EULER_A: lambda x, sp, s0, s1, dp, e: reference.euler_a_update(
                x, s0, s1, oracle, e
            ),
            SamplerKind.DPMPP_SDE: lambda x, sp, s0, s1, dp, e: reference.dpmpp_sde_update(
                x, s0, s1, oracle, e
            ),
            SamplerKind.DPMPP_2S_A: lambda x, sp, s0, s1, dp, e: reference.dpmpp_2s_a_update(
                x, s0, s1, oracle, e
            ),
            SamplerKind.DPMPP_2M_SDE: lambda x, sp, s0, s1, dp, e: reference.dpmpp_2m_sde_update(
                x, sp, s0, s1, oracle, dp, e
            ),
        }
        for kind, row in direct.items():
            for s_prev, s_cur, s_next in random_windows(stream, 100):
                x = 2.0 * stream.gaussians(4)
                eps = stream.gaussians(4)
                d_prev = oracle(2.0 * stream.gaussians(4), s_prev)
                cache = PredictionCache({4: CachedPrediction(d_prev, s_prev, "history")})
                got, _ = sde_step(
                    kind, SampleState(x, 5, s_cur), s_next, oracle, cache, NoiseDraw(eps)
                )
                want = row(x, s_prev, s_cur, s_next, d_prev, eps)
                assert np.max(np.abs(got.x - want)) <= 1e-9 * max(1.0, float(np.max(np.abs(want))))


class TestNfeCost:
    @pytest.mark.parametrize(
        "kind,normal,final",
        [
            (SamplerKind.EULER, 1, 1),
            (SamplerKind.EULER_A, 1, 1),
            (SamplerKind.DPMPP_2M, 1, 1),
            (SamplerKind.DPMPP_2M_SDE, 1, 1),
            (SamplerKind.HEUN, 2, 1),
            (SamplerKind.DPM2, 2, 1),
            (SamplerKind.DPM2_A, 2, 1),
            (SamplerKind.DPMPP_SDE, 2, 1),
            (SamplerKind.DPMPP_2S_A, 2, 1),
        ],
    )
    def test_costs(self, kind, normal, final):
        assert nfe_cost(kind, False) == normal
        assert nfe_cost(kind, True) == final

    def test_costs_match_actual_evaluations(self):
        oracle = gaussian_denoiser(1.0)
        for kind in SamplerKind:
            for sigma_next, final in ((1.0, False), (0.0, True)):
                calls = 0

                def counted(x, s):
                    nonlocal calls
                    calls += 1
                    return oracle(x, s)

                state = SampleState(np.array([2.0]), 0, 3.0)
                if kind.is_sde:
                    sde_step(
                        kind, state, sigma_next, counted,
                        PredictionCache.empty(), NoiseDraw(np.array([0.3])),
                    )
                else:
                    ode_step(kind, state, sigma_next, counted, PredictionCache.empty())
                assert calls == nfe_cost(kind, final)
