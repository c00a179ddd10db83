import json
import math

import numpy as np
import pytest

from homloop import (
    DetectionParams,
    FitFailureError,
    GaussianPacket,
    ModeSubset,
    PdcSourceModel,
    ScanGrid,
    Scenario,
    ScenarioValidationError,
    SwitchingPattern,
    compile_pattern,
    count_stream,
    default_delays,
    fit_dip,
    fourfold_visibility,
    inner_product,
    klyshko_budget,
    LoopConfig,
    normalize,
    normalize_visibility,
    run_scan,
    sample_counts,
    visibility_error,
)

SQ2 = 1.0 / math.sqrt(2.0)


def make_scenario(va, vb, name="test", subsets=None, seed=7, **kwargs):
    return Scenario(
        name=name,
        photon_a=normalize(va).padded(8),
        photon_b=normalize(vb).padded(8),
        subsets=subsets or {},
        scan=ScanGrid(rng_seed=seed),
        **kwargs,
    )


class TestKlyshkoBudget:
    def test_stage_list(self):
        stages = [("waveguide", 0.75), ("coupling_in", 0.75), ("loop", 0.80),
                  ("coupling_out", 0.75), ("detector", 0.90)]
        assert klyshko_budget(stages) == pytest.approx(0.30375, abs=1e-12)

    def test_single_stage(self):
        assert klyshko_budget([("x", 1.0)]) == 1.0

    def test_empty_product(self):
        assert klyshko_budget([]) == 1.0

    def test_out_of_range(self):
        with pytest.raises(ScenarioValidationError):
            klyshko_budget([("x", 1.2)])


class TestSampling:
    def test_zero_expected(self):
        assert sample_counts(0.0, count_stream(1, 0)) == 0

    def test_determinism(self):
        a = sample_counts(123.4, count_stream(42, 3, 7))
        b = sample_counts(123.4, count_stream(42, 3, 7))
        assert a == b

    def test_poisson_tail(self):
        misses = sum(
            abs(sample_counts(1e6, count_stream(s, 0)) - 1e6) > 5e3
            for s in range(500)
        )
        assert misses == 0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            sample_counts(-1.0, count_stream(0, 0))


class TestFitDip:
    delays = np.array(default_delays())

    def synth(self, b, v, d0, w):
        return b * (1 - v * np.exp(-((self.delays - d0) ** 2) / (2 * w * w)))

    def test_noiseless_recovery(self):
        truth = (100.0, 0.8, 0.0, 1e-12)
        fit = fit_dip(self.delays, self.synth(*truth))
        for got, want in zip(fit.parameters(), truth):
            assert got == pytest.approx(want, abs=1e-8)
        assert fit.converged
        assert visibility_error(self.delays, self.synth(*truth), fit) < 1e-8

    def test_offcenter_recovery(self):
        truth = (2500.0, 0.42, 0.8e-12, 1.6e-12)
        fit = fit_dip(self.delays, self.synth(*truth))
        for got, want in zip(fit.parameters(), truth):
            assert got == pytest.approx(want, rel=1e-7)

    def test_poisson_coverage(self):
        hits = 0
        for s in range(40):
            counts = count_stream(900 + s, 0).poisson(
                self.synth(2000.0, 0.8, 0.0, 1e-12)
            )
            fit = fit_dip(self.delays, counts.astype(float))
            if abs(fit.visibility - 0.8) <= 2 * fit.sigma_visibility:
                hits += 1
        assert hits >= 34

    def test_flat_data_pins_visibility(self):
        counts = np.full(self.delays.size, 500.0)
        fit = fit_dip(self.delays, counts, fixed_shape=(0.0, 1e-12))
        assert fit.visibility == pytest.approx(0.0, abs=1e-12)
        assert fit.flat

    def test_noisy_flat_data_small_visibility(self):
        counts = count_stream(5, 1).poisson(3000.0, self.delays.size)
        fit = fit_dip(self.delays, counts.astype(float),
                      fixed_shape=(0.0, 1.6e-12))
        assert abs(fit.visibility) < 4 * fit.sigma_visibility

    def test_too_few_points(self):
        with pytest.raises(FitFailureError):
            fit_dip(self.delays[:3], np.ones(3))

    def test_error_scales_with_statistics(self):
        # quadrupled counts halve the relative visibility error
        sigmas = []
        for scale in (1.0, 4.0):
            model = self.synth(2000.0 * scale, 0.8, 0.0, 1.2e-12)
            counts = count_stream(11, int(scale)).poisson(model)
            fit = fit_dip(self.delays, counts.astype(float))
            sigmas.append(fit.sigma_visibility)
        assert sigmas[1] < sigmas[0] * 0.75


class TestNormalizeVisibility:
    def test_quarter(self):
        value, _ = normalize_visibility(0.2, 0.0, 0.8, 0.0)
        assert value == pytest.approx(0.25)

    def test_unity(self):
        value, _ = normalize_visibility(0.66, 0.0, 0.66, 0.0)
        assert value == 1.0

    def test_zero_with_error(self):
        value, err = normalize_visibility(0.0, 0.01, 0.8, 0.05)
        assert value == 0.0
        assert err == pytest.approx(0.01 / 0.8)

    def test_propagation(self):
        _, err = normalize_visibility(0.4, 0.02, 0.8, 0.04)
        want = math.sqrt((0.02 / 0.8) ** 2 + (0.4 * 0.04 / 0.64) ** 2)
        assert err == pytest.approx(want)

    def test_nonpositive_reference(self):
        with pytest.raises(ScenarioValidationError):
            normalize_visibility(0.5, 0.01, 0.0, 0.01)


class TestRunScan:
    def test_parallel_modes_unit_normalized_visibilities(self):
        result = run_scan(make_scenario([1, 1], [1, 1], name="parallel"))
        full = result.traces["full"]
        assert full["global"].normalized_expected[0] == pytest.approx(1.0, abs=1e-9)
        assert full["local"].normalized_expected[0] == pytest.approx(1.0, abs=1e-9)
        assert full["global"].normalized_sampled[0] == pytest.approx(1.0, abs=0.05)
        assert full["local"].normalized_sampled[0] == pytest.approx(1.0, abs=0.05)

    def test_orthogonal_modes_no_global_interference(self):
        result = run_scan(make_scenario([1, 1], [1, -1], name="orthogonal"))
        full = result.traces["full"]
        assert full["global"].normalized_expected[0] == pytest.approx(0.0, abs=1e-9)
        assert abs(full["global"].normalized_sampled[0]) < 0.02
        assert full["local"].normalized_sampled[0] == pytest.approx(1.0, abs=0.05)

    def test_three_bin_submode_structure(self):
        result = run_scan(
            make_scenario(
                [1, 1, 1], [1, -1, 1], name="threebin",
                subsets={"sub12": ModeSubset.of(0, 1), "sub13": ModeSubset.of(0, 2)},
            )
        )
        full = result.traces["full"]
        assert full["global"].normalized_expected[0] == pytest.approx(1 / 9, abs=1e-9)
        assert result.traces["sub12"]["global"].normalized_expected[0] == pytest.approx(
            0.0, abs=1e-9
        )
        assert result.traces["sub13"]["global"].normalized_expected[0] == pytest.approx(
            1.0, abs=1e-9
        )

    def test_reference_tracks_source_visibility(self):
        scenario = make_scenario([1, 1], [1, -1])
        result = run_scan(scenario)
        model_v0 = fourfold_visibility(scenario.source)
        assert result.effective_floor == pytest.approx(model_v0)
        assert result.v0_expected[0] == pytest.approx(model_v0, abs=1e-6)
        assert result.v0_sampled[0] == pytest.approx(model_v0, abs=0.02)

    def test_baseline_is_delay_independent_i0_value(self):
        # far out on the wings (delta >> sigma) the overlap has fully
        # decayed and the baseline takes the distinguishable-photon value
        delays = tuple(np.linspace(-40e-12, 40e-12, 41))
        scenario = Scenario(
            name="wide",
            photon_a=normalize([0.6, -0.8j]).padded(8),
            photon_b=normalize([1, 1j]).padded(8),
            scan=ScanGrid(delays=delays, rng_seed=7),
        )
        result = run_scan(scenario)
        alpha, beta = result.alpha, result.beta
        want = (alpha.norm2() * beta.norm2()) / 2.0
        trace = result.traces["full"]["global"].expected_prob
        assert trace[0] == pytest.approx(want, abs=1e-9)
        assert trace[-1] == pytest.approx(trace[0], abs=1e-9)

    def test_normalized_global_equals_squared_overlap(self):
        rng = np.random.default_rng(23)
        for _ in range(3):
            va = rng.normal(size=3) + 1j * rng.normal(size=3)
            vb = rng.normal(size=3) + 1j * rng.normal(size=3)
            scenario = make_scenario(list(va), list(vb))
            result = run_scan(scenario)
            overlap2 = abs(inner_product(result.alpha, result.beta)) ** 2 / (
                result.alpha.norm2() * result.beta.norm2()
            )
            got = result.traces["full"]["global"].normalized_expected[0]
            assert got == pytest.approx(overlap2, abs=1e-9)

    def test_pattern_photons(self):
        cfg = LoopConfig(window=8)
        pattern_a = compile_pattern(normalize([1, 1]).padded(8), cfg.lossless())
        pattern_b = compile_pattern(normalize([1, -1]).padded(8), cfg.lossless())
        scenario = Scenario(
            name="patterns", photon_a=pattern_a, photon_b=pattern_b,
            scan=ScanGrid(rng_seed=3), loop=cfg,
        )
        result = run_scan(scenario)
        # loop loss shrinks the vectors but cancels from the visibilities
        assert result.alpha.norm2() == pytest.approx(0.8**2, abs=1e-9)
        assert result.traces["full"]["global"].normalized_expected[0] == (
            pytest.approx(0.0, abs=1e-9)
        )
        assert result.traces["full"]["local"].normalized_expected[0] == (
            pytest.approx(1.0, abs=1e-9)
        )

    def test_visibilities_independent_of_count_budget(self):
        base = make_scenario([1, 1, 0], [0, 1, 1])
        richer = Scenario(
            name=base.name, photon_a=base.photon_a, photon_b=base.photon_b,
            subsets=base.subsets,
            scan=ScanGrid(rng_seed=7, trigger_rate=2 * 63e3,
                          integration_time=500.0),
            detection=DetectionParams(detector_efficiency=0.5),
            source=base.source, loop=base.loop,
        )
        a, b = run_scan(base), run_scan(richer)
        va = a.traces["full"]["global"].normalized_expected[0]
        vb = b.traces["full"]["global"].normalized_expected[0]
        assert va == pytest.approx(vb, abs=1e-9)
        assert va == pytest.approx(0.25, abs=1e-9)

    def test_determinism_bit_identical(self):
        scenario = make_scenario([1, 1], [1, -1], seed=99)
        r1, r2 = run_scan(scenario), run_scan(scenario)
        assert r1.summary_json() == r2.summary_json()
        assert r1.subset_csv("full") == r2.subset_csv("full")
        assert np.array_equal(
            r1.traces["full"]["global"].sampled_counts,
            r2.traces["full"]["global"].sampled_counts,
        )

    def test_seed_changes_samples(self):
        r1 = run_scan(make_scenario([1, 1], [1, -1], seed=1))
        r2 = run_scan(make_scenario([1, 1], [1, -1], seed=2))
        assert not np.array_equal(
            r1.traces["full"]["global"].sampled_counts,
            r2.traces["full"]["global"].sampled_counts,
        )

    def test_accidental_background_raises_baseline_only(self):
        base = make_scenario([1, 1], [1, 1])
        noisy = Scenario(
            name=base.name, photon_a=base.photon_a, photon_b=base.photon_b,
            scan=base.scan, source=base.source, loop=base.loop,
            detection=DetectionParams(accidental_rate=0.001),
        )
        r_base, r_noisy = run_scan(base), run_scan(noisy)
        extra = 0.001 * base.scan.integration_time
        assert r_noisy.traces["full"]["global"].expected_counts[0] == pytest.approx(
            r_base.traces["full"]["global"].expected_counts[0] + extra
        )


class TestScenarioValidation:
    def test_problems_aggregated(self):
        scenario = Scenario(
            name="bad",
            photon_a=normalize([1, 1]).padded(8),
            photon_b="not a photon",
            subsets={"oops": ModeSubset.of(12)},
            scan=ScanGrid(delays=(), rng_seed=0),
        )
        with pytest.raises(ScenarioValidationError) as info:
            run_scan(scenario)
        text = "\n".join(info.value.problems)
        assert "photon_b" in text
        assert "oops" in text
        assert "delay list" in text
        assert len(info.value.problems) >= 3

    def test_invalid_pattern_reported(self):
        pattern = SwitchingPattern(
            incouple=((0, "H"),), outcouple=((1, 20, "H"),)
        )
        scenario = Scenario(
            name="badpat", photon_a=pattern,
            photon_b=normalize([1, 0]).padded(8),
        )
        with pytest.raises(ScenarioValidationError) as info:
            run_scan(scenario)
        assert any("photon_a" in p for p in info.value.problems)


class TestScenarioSerialization:
    def test_json_roundtrip_vectors(self):
        scenario = make_scenario(
            [1, 1j], [1, -1], subsets={"s": ModeSubset.of(0, 1)}
        )
        loaded = Scenario.loads(scenario.dumps())
        assert loaded == scenario

    def test_json_roundtrip_pattern(self):
        cfg = LoopConfig(window=8)
        scenario = Scenario(
            name="pat",
            photon_a=compile_pattern(normalize([1, -1]).padded(8), cfg.lossless()),
            photon_b=normalize([1, 1]).padded(8),
            packet_a=GaussianPacket(1.2e-12, 1e10, 1.05),
            source=PdcSourceModel(nbar=0.05, floor_i0=0.8),
            loop=cfg,
        )
        loaded = Scenario.loads(scenario.dumps())
        assert loaded == scenario

    def test_span_points_shorthand(self):
        data = json.loads(make_scenario([1, 0], [0, 1]).dumps())
        data["scan"] = {"span_s": 4e-12, "points": 21, "rng_seed": 5}
        loaded = Scenario.from_json_dict(data)
        assert len(loaded.scan.delays) == 21
        assert loaded.scan.delays[0] == -4e-12
