import json
import math

import numpy as np
import pytest

import oracles
from homloop import (
    BALANCED,
    REFLECT,
    TRANSMIT,
    CoinKind,
    CoinSetting,
    InfeasibleTargetError,
    LoopConfig,
    LoopState,
    PatternValidationError,
    Polarization,
    SwitchingPattern,
    WindowOverflowError,
    coin_from_eom_phase,
    coin_matrix,
    compile_pattern,
    equal_up_to_global_phase,
    jones_eom,
    jones_qwp,
    mode_vector,
    normalize,
    run_loop,
    step,
    validate_pattern,
)
from homloop.cli import packaged_patterns

SQ2 = 1.0 / math.sqrt(2.0)
LOSSLESS = LoopConfig(loop_efficiency=1.0, window=8)


class TestJones:
    def test_qwp_on_h(self):
        out = jones_qwp() @ np.array([1.0, 0.0])
        assert np.allclose(out, [SQ2, -1j * SQ2])

    def test_two_qwps_act_as_hwp(self):
        # verified by squaring the matrix: H goes to V up to a phase
        out = (jones_qwp() @ jones_qwp()) @ np.array([1.0, 0.0])
        assert np.allclose(out, [0.0, -1j], atol=1e-12)

    def test_qwp_unitary_unit_determinant(self):
        m = jones_qwp()
        assert np.allclose(m.conj().T @ m, np.eye(2), atol=1e-12)
        assert abs(np.linalg.det(m)) == pytest.approx(1.0)

    def test_eom_zero_is_identity(self):
        assert np.allclose(jones_eom(0.0), np.eye(2))

    def test_eom_half_pi_antidiagonal(self):
        assert np.allclose(jones_eom(math.pi / 2), [[0, -1j], [-1j, 0]], atol=1e-12)

    def test_eom_quarter_pi_balanced(self):
        assert np.allclose(np.abs(jones_eom(math.pi / 4)), SQ2)

    def test_eom_times_qwp_is_coin_with_shifted_angle(self):
        for phi in (-math.pi / 4, 0.0, math.pi / 4, 0.3):
            combo = jones_eom(phi) @ jones_qwp()
            coin = coin_matrix(coin_from_eom_phase(phi))
            assert np.allclose(combo, coin, atol=1e-12)


class TestCoins:
    def test_transmit_exact_identity(self):
        assert np.array_equal(coin_matrix(TRANSMIT), np.eye(2))

    def test_reflect_swaps_with_phase(self):
        out = coin_matrix(REFLECT) @ np.array([1.0, 0.0])
        assert np.array_equal(out, [0.0, -1.0j])

    def test_custom_quarter_pi_equals_qwp(self):
        assert np.allclose(
            coin_matrix(CoinSetting.custom(math.pi / 4)), jones_qwp()
        )

    def test_custom_snaps_named_kinds(self):
        assert CoinSetting.custom(0.0) == TRANSMIT
        assert CoinSetting.custom(math.pi / 2) == REFLECT
        assert CoinSetting.custom(math.pi / 4) == BALANCED

    def test_custom_range(self):
        with pytest.raises(ValueError):
            CoinSetting.custom(math.pi)
        with pytest.raises(ValueError):
            CoinSetting.custom(-0.1)

    def test_all_coins_unitary(self):
        rng = np.random.default_rng(11)
        for theta in rng.uniform(0.0, math.pi, size=1000):
            m = coin_matrix(CoinSetting.custom(float(theta)))
            assert np.max(np.abs(m.conj().T @ m - np.eye(2))) < 1e-12


class TestStep:
    def test_transmit_shifts_h(self):
        state = LoopState.single(4, 0, Polarization.H)
        out = step(state, {}, LoopConfig(loop_efficiency=1.0, window=4))
        assert out.amplitudes[1, 0] == 1.0
        assert out.roundtrip == 1

    def test_balanced_splits_then_shifts(self):
        state = LoopState.single(4, 0, Polarization.H)
        out = step(state, {0: BALANCED}, LoopConfig(loop_efficiency=1.0, window=4))
        assert out.amplitudes[1, 0] == pytest.approx(SQ2)
        assert out.amplitudes[0, 1] == pytest.approx(-1j * SQ2)

    def test_loss_scales_norm(self):
        rng = np.random.default_rng(2)
        amps = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
        amps[-1, 0] = 0.0  # keep H clear of the window edge
        amps /= np.linalg.norm(amps) * 1.2
        state = LoopState(amps, 0)
        cfg = LoopConfig(loop_efficiency=0.8, window=4)
        out = step(state, {1: BALANCED, 2: REFLECT}, cfg)
        assert out.norm2() == pytest.approx(0.8 * state.norm2(), abs=1e-12)

    def test_lossless_preserves_norm(self):
        rng = np.random.default_rng(9)
        cfg = LoopConfig(loop_efficiency=1.0, window=6)
        for _ in range(100):
            amps = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
            amps[-1, 0] = 0.0
            amps /= np.linalg.norm(amps) * 1.1
            coins = {
                int(b): CoinSetting.custom(float(t))
                for b, t in zip(
                    rng.choice(5, 3, replace=False),  # keep H off the edge
                    rng.uniform(0, math.pi, 3),
                )
            }
            state = LoopState(amps, 0)
            out = step(state, coins, cfg)
            assert out.norm2() == pytest.approx(state.norm2(), abs=1e-12)

    def test_window_overflow(self):
        state = LoopState.single(4, 3, Polarization.H)
        with pytest.raises(WindowOverflowError):
            step(state, {}, LoopConfig(loop_efficiency=1.0, window=4))

    def test_max_roundtrips_enforced(self):
        state = LoopState(np.zeros((4, 2)), 5)
        with pytest.raises(WindowOverflowError):
            step(state, {}, LoopConfig(window=4, max_roundtrips=5))


class TestRunLoop:
    def test_balanced_split_two_bins(self):
        pattern = SwitchingPattern(
            coins={(0, 0): BALANCED},
            incouple=((0, "H"),),
            outcouple=((1, 1, "H"), (1, 0, "V")),
        )
        out = run_loop(None, pattern, LOSSLESS)
        assert np.allclose(out.amplitudes[:2], [-1j * SQ2, SQ2])
        assert out.norm2() == pytest.approx(1.0, abs=1e-12)

    def test_transmit_single_bin(self):
        pattern = SwitchingPattern(
            incouple=((0, "H"),), outcouple=((1, 1, "H"),)
        )
        out = run_loop((0, "H"), pattern, LOSSLESS)
        assert out.amplitudes[1] == pytest.approx(1.0)
        assert out.norm2() == pytest.approx(1.0)

    def test_two_roundtrip_balanced_triangle(self):
        # Balanced coins on every occupied bin level the photon over
        # three bins with weights 1/4, 1/2, 1/4.
        pattern = SwitchingPattern(
            coins={(0, 0): BALANCED, (1, 0): BALANCED, (1, 1): BALANCED},
            incouple=((0, "H"),),
            outcouple=(
                (2, 0, "V"), (2, 1, "V"), (2, 1, "H"), (2, 2, "H"),
            ),
        )
        out = run_loop(None, pattern, LOSSLESS)
        assert np.allclose(np.abs(out.amplitudes[:3]) ** 2, [0.25, 0.5, 0.25])
        oracle = oracles.dense_loop_oracle((0, "H"), pattern, LOSSLESS)
        assert np.max(np.abs(out.amplitudes - oracle)) < 1e-10

    def test_invalid_pattern_rejected(self):
        pattern = SwitchingPattern(
            incouple=((0, "H"),), outcouple=((1, 9, "H"),)
        )
        with pytest.raises(PatternValidationError):
            run_loop(None, pattern, LOSSLESS)

    def test_matches_dense_oracle_on_shipped_patterns(self):
        for name, pattern in packaged_patterns().items():
            for cfg in (LOSSLESS, LoopConfig(window=8)):
                got = run_loop(None, pattern, cfg)
                want = oracles.dense_loop_oracle(
                    pattern.incouple[0], pattern, cfg
                )
                assert np.max(np.abs(got.amplitudes - want)) < 1e-10, name

    def test_matches_dense_oracle_on_random_compiled(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            n = int(rng.integers(2, 6))
            vec = rng.normal(size=n) + 1j * rng.normal(size=n)
            target = normalize(vec).padded(8)
            pattern = compile_pattern(target, LOSSLESS)
            cfg = LoopConfig(window=8, loop_efficiency=0.8)
            got = run_loop(None, pattern, cfg)
            want = oracles.dense_loop_oracle((int(np.flatnonzero(
                np.abs(target.amplitudes) > 1e-12)[0]), "H"), pattern, cfg)
            assert np.max(np.abs(got.amplitudes - want)) < 1e-10


class TestCompile:
    def test_single_bin_zero_roundtrips(self):
        pattern = compile_pattern(mode_vector([1, 0, 0]).padded(8), LOSSLESS)
        assert pattern.depth() == 0
        assert pattern.coins == {}
        assert pattern.outcouple == ((0, 0, Polarization.H),)

    def test_native_two_bin_single_balanced_coin(self):
        target = mode_vector([-1j * SQ2, SQ2]).padded(8)
        pattern = compile_pattern(target, LOSSLESS)
        assert pattern.coins == {(0, 0): BALANCED}
        assert pattern.depth() == 1
        out = run_loop(None, pattern, LOSSLESS)
        assert np.allclose(out.amplitudes, target.amplitudes)

    def test_uniform_three_bin_roundtrip(self):
        target = normalize([1, 1, 1]).padded(8)
        pattern = compile_pattern(target, LOSSLESS)
        out = run_loop(None, pattern, LOSSLESS)
        assert equal_up_to_global_phase(out, target, 1e-9)
        assert out.norm2() == pytest.approx(1.0, abs=1e-9)

    def test_offset_support(self):
        target = normalize([0, 0, 1, -2, 0.5]).padded(8)
        pattern = compile_pattern(target, LOSSLESS)
        out = run_loop(None, pattern, LOSSLESS)
        assert equal_up_to_global_phase(out, target, 1e-9)

    def test_depth_bound(self):
        cfg = LoopConfig(loop_efficiency=1.0, window=8, max_roundtrips=1)
        with pytest.raises(InfeasibleTargetError) as info:
            compile_pattern(normalize([1, 1, 1]).padded(8), cfg)
        assert info.value.required_roundtrips == 3

    def test_unnormalized_rejected(self):
        with pytest.raises(InfeasibleTargetError):
            compile_pattern(mode_vector([0.5, 0.5]).padded(8), LOSSLESS)

    def test_roundtrip_random_batch(self):
        rng = np.random.default_rng(33)
        for trial in range(60):
            n = int(rng.integers(2, 6))
            if trial % 2:
                vec = rng.normal(size=n).astype(complex)
            else:
                vec = rng.normal(size=n) + 1j * rng.normal(size=n)
            target = normalize(vec).padded(8)
            pattern = compile_pattern(target, LOSSLESS)
            assert validate_pattern(pattern, LOSSLESS) == []
            out = run_loop(None, pattern, LOSSLESS)
            assert equal_up_to_global_phase(out, target, 1e-9)


class TestValidatePattern:
    def test_shipped_patterns_valid(self):
        for name, pattern in packaged_patterns().items():
            assert validate_pattern(pattern, LOSSLESS) == [], name

    def test_duplicate_extraction(self):
        pattern = SwitchingPattern(
            incouple=((0, "H"),),
            outcouple=((1, 0, "V"), (1, 0, "V")),
        )
        diags = validate_pattern(pattern, LOSSLESS)
        assert any("duplicate extraction" in d for d in diags)

    def test_bin_out_of_window(self):
        pattern = SwitchingPattern(
            incouple=((0, "H"),), outcouple=((0, 8, "H"),)
        )
        diags = validate_pattern(pattern, LOSSLESS)
        assert any("out of window" in d for d in diags)

    def test_roundtrip_beyond_maximum(self):
        cfg = LoopConfig(window=8, max_roundtrips=2)
        pattern = SwitchingPattern(
            coins={(5, 0): BALANCED}, incouple=((0, "H"),),
            outcouple=((6, 0, "V"),),
        )
        diags = validate_pattern(pattern, cfg)
        assert len(diags) == 2

    def test_slow_eom_flags_adjacent_changes(self):
        cfg = LoopConfig(window=8, eom_switch_time=200e-9)
        pattern = SwitchingPattern(
            coins={(0, 0): BALANCED, (0, 1): REFLECT},
            incouple=((0, "H"),), outcouple=((1, 1, "H"),),
        )
        diags = validate_pattern(pattern, cfg)
        assert any("EOM switching time" in d for d in diags)
        assert validate_pattern(pattern, LoopConfig(window=8)) == []

    def test_strict_settings(self):
        pattern = SwitchingPattern(
            coins={(0, 0): CoinSetting.custom(0.3)},
            incouple=((0, "H"),), outcouple=((1, 1, "H"),),
        )
        assert validate_pattern(pattern, LOSSLESS) == []
        diags = validate_pattern(pattern, LOSSLESS, strict_settings=True)
        assert any("hardware settings" in d for d in diags)


class TestPatternSerialization:
    def test_json_roundtrip(self):
        pattern = compile_pattern(normalize([1, 1j, -1]).padded(8), LOSSLESS)
        loaded = SwitchingPattern.loads(pattern.dumps())
        assert loaded == pattern

    def test_schema_shape(self):
        pattern = SwitchingPattern(
            coins={(0, 1): BALANCED, (1, 2): CoinSetting.custom(0.3)},
            incouple=((1, "H"),),
            outcouple=((2, 2, "V"),),
        )
        data = json.loads(pattern.dumps())
        kinds = {json.dumps(e["kind"], sort_keys=True) for e in data["coins"]}
        assert '"balanced"' in kinds
        assert '{"custom": 0.3}' in kinds
        assert data["incouple"] == [{"bin": 1, "pol": "H"}]
        assert data["outcouple"] == [{"roundtrip": 2, "bin": 2, "pol": "V"}]


class TestLoopConfig:
    def test_interlacing_guard(self):
        with pytest.raises(ValueError):
            LoopConfig(window=30)  # 30 * 105 ns > 2.3 us

    def test_efficiency_range(self):
        with pytest.raises(ValueError):
            LoopConfig(loop_efficiency=0.0)
