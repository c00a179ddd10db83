"""End-to-end delay-scan scenarios: expected coincidences, shot-noise
sampling, dip fitting, and reference-normalized visibilities.

A scenario fixes the two photons' time-bin structures (explicit vectors
or switching patterns), the wavepacket and source parameters, the named
bin subsets, and the scan grid.  For every translation-stage delay the
indistinguishability I(delta) is formed from the Gaussian overlap times
the source-quality floor; local and global coincidence probabilities
follow from the correlation matrix; counts are Poisson samples of
probability x trigger rate x integration time x efficiency budget.

Every scan carries a companion reference trace (both photons in a single
bin, otherwise identical parameters).  Its fitted dip visibility is the
reference V0 by which all scenario visibilities are normalized, so
source imperfections cancel and the normalized global visibility tracks
the squared overlap of the synthesized mode structures alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    FitFailureError,
    HomloopError,
    ScenarioValidationError,
)
from .interference import (
    g11_matrix,
    global_correlation,
    local_correlation,
)
from .modes import ModeSubset, ModeVector, mode_vector
from .network import LoopConfig, SwitchingPattern, run_loop, validate_pattern
from .source import PdcSourceModel, fourfold_visibility, pair_distribution
from .wavepacket import GaussianPacket, indistinguishability

DEFAULT_TRIGGER_RATE = 63e3
DEFAULT_INTEGRATION_TIME = 2000.0
#: Signal-arm transmissions from source to detector, detector excluded.
DEFAULT_KLYSHKO_STAGES = (
    ("waveguide", 0.75),
    ("coupling_in", 0.75),
    ("loop", 0.80),
    ("coupling_out", 0.75),
)


def klyshko_budget(stages: Sequence) -> float:
    """Product of stage efficiencies (empty list gives 1)."""
    budget = 1.0
    for name, eff in stages:
        eff = float(eff)
        if not 0.0 < eff <= 1.0:
            raise ScenarioValidationError(
                [f"stage {name!r}: efficiency {eff} outside (0, 1]"]
            )
        budget *= eff
    return budget


def default_delays(span: float = 6e-12, points: int = 41) -> tuple:
    """Symmetric delay grid covering the dip; 41 points over +/-6 ps."""
    return tuple(np.linspace(-span, span, points))


@dataclass(frozen=True)
class DetectionParams:
    detector_efficiency: float = 0.90
    klyshko_stages: tuple = DEFAULT_KLYSHKO_STAGES
    accidental_rate: float = 0.0

    def signal_budget(self) -> float:
        return klyshko_budget(self.klyshko_stages) * self.detector_efficiency


@dataclass(frozen=True)
class ScanGrid:
    delays: tuple = field(default_factory=default_delays)
    trigger_rate: float = DEFAULT_TRIGGER_RATE
    integration_time: float = DEFAULT_INTEGRATION_TIME
    rng_seed: int = 0


@dataclass(frozen=True)
class Scenario:
    """Complete description of one two-photon interference experiment."""

    name: str
    photon_a: object  # ModeVector or SwitchingPattern
    photon_b: object
    packet_a: GaussianPacket = GaussianPacket()
    packet_b: GaussianPacket = GaussianPacket()
    source: PdcSourceModel = PdcSourceModel(nbar=0.1)
    subsets: Mapping = field(default_factory=dict)
    scan: ScanGrid = ScanGrid()
    detection: DetectionParams = DetectionParams()
    loop: LoopConfig = LoopConfig()

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, scan=replace(self.scan, rng_seed=int(seed)))

    # -- JSON ---------------------------------------------------------------

    def to_json_dict(self) -> dict:
        def photon(p):
            if isinstance(p, SwitchingPattern):
                return {"pattern": p.to_json_dict()}
            return {"mode_vector": [[z.real, z.imag] for z in p.amplitudes]}

        def packet(p: GaussianPacket) -> dict:
            return {
                "sigma_t_s": p.sigma_t,
                "detuning_hz": p.detuning,
                "broadening_per_roundtrip": p.broadening_per_roundtrip,
            }

        return {
            "name": self.name,
            "photon_a": photon(self.photon_a),
            "photon_b": photon(self.photon_b),
            "wavepacket": {
                "packet_a": packet(self.packet_a),
                "packet_b": packet(self.packet_b),
            },
            "source": {
                "nbar": self.source.nbar,
                "floor_i0": self.source.floor_i0,
                "herald_efficiency": self.source.herald_efficiency,
                "n_max": self.source.n_max,
            },
            "subsets": {name: sorted(s.bins) for name, s in self.subsets.items()},
            "scan": {
                "delays_s": list(self.scan.delays),
                "trigger_rate_hz": self.scan.trigger_rate,
                "integration_time_s": self.scan.integration_time,
                "rng_seed": self.scan.rng_seed,
            },
            "detection": {
                "detector_efficiency": self.detection.detector_efficiency,
                "klyshko_stages": [list(s) for s in self.detection.klyshko_stages],
                "accidental_rate_hz": self.detection.accidental_rate,
            },
            "loop": {
                "window": self.loop.window,
                "max_roundtrips": self.loop.max_roundtrips,
                "bin_spacing_s": self.loop.bin_spacing,
                "roundtrip_time_s": self.loop.roundtrip_time,
                "loop_efficiency": self.loop.loop_efficiency,
                "eom_switch_time_s": self.loop.eom_switch_time,
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Scenario":
        def photon(entry):
            if "pattern" in entry:
                return SwitchingPattern.from_json_dict(entry["pattern"])
            return mode_vector([complex(re, im) for re, im in entry["mode_vector"]])

        def packet(entry) -> GaussianPacket:
            return GaussianPacket(
                sigma_t=float(entry.get("sigma_t_s", GaussianPacket().sigma_t)),
                detuning=float(entry.get("detuning_hz", 0.0)),
                broadening_per_roundtrip=float(
                    entry.get("broadening_per_roundtrip", 1.0)
                ),
            )

        wp = data.get("wavepacket", {})
        src = data.get("source", {})
        scan = data.get("scan", {})
        det = data.get("detection", {})
        loop = data.get("loop", {})
        return cls(
            name=data.get("name", "scenario"),
            photon_a=photon(data["photon_a"]),
            photon_b=photon(data["photon_b"]),
            packet_a=packet(wp.get("packet_a", {})),
            packet_b=packet(wp.get("packet_b", {})),
            source=PdcSourceModel(
                nbar=float(src.get("nbar", 0.1)),
                floor_i0=float(src.get("floor_i0", 0.83)),
                herald_efficiency=float(src.get("herald_efficiency", 0.30)),
                n_max=int(src.get("n_max", 3)),
            ),
            subsets={
                name: ModeSubset(frozenset(bins))
                for name, bins in data.get("subsets", {}).items()
            },
            scan=ScanGrid(
                delays=tuple(float(d) for d in scan["delays_s"])
                if "delays_s" in scan
                else default_delays(
                    float(scan.get("span_s", 6e-12)), int(scan.get("points", 41))
                ),
                trigger_rate=float(scan.get("trigger_rate_hz", DEFAULT_TRIGGER_RATE)),
                integration_time=float(
                    scan.get("integration_time_s", DEFAULT_INTEGRATION_TIME)
                ),
                rng_seed=int(scan.get("rng_seed", 0)),
            ),
            detection=DetectionParams(
                detector_efficiency=float(det.get("detector_efficiency", 0.90)),
                klyshko_stages=tuple(
                    (str(n), float(e))
                    for n, e in det.get("klyshko_stages", DEFAULT_KLYSHKO_STAGES)
                ),
                accidental_rate=float(det.get("accidental_rate_hz", 0.0)),
            ),
            loop=LoopConfig(
                bin_spacing=float(loop.get("bin_spacing_s", 105e-9)),
                roundtrip_time=float(loop.get("roundtrip_time_s", 2.3e-6)),
                loop_efficiency=float(loop.get("loop_efficiency", 0.80)),
                window=int(loop.get("window", LoopConfig().window)),
                max_roundtrips=int(loop.get("max_roundtrips", 20)),
                eom_switch_time=float(loop.get("eom_switch_time_s", 10e-9)),
            ),
        )

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        return cls.from_json_dict(json.loads(text))

    def dumps(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, **kwargs)


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------

def count_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent reproducible RNG stream for one (trace, point) cell."""
    return np.random.default_rng((int(seed), *[int(k) for k in key]))


def sample_counts(expected: float, stream: np.random.Generator) -> int:
    """Poisson draw of a coincidence count."""
    if expected < 0.0:
        raise ValueError("expected count must be non-negative")
    if expected == 0.0:
        return 0
    return int(stream.poisson(expected))


def herald_probability(model: PdcSourceModel) -> float:
    """Per-trigger probability that one source's herald detector fires."""
    p = pair_distribution(model.nbar, model.n_max)
    eta = model.herald_efficiency
    return float(
        sum(p[n] * (1.0 - (1.0 - eta) ** n) for n in range(1, model.n_max + 1))
    )


def count_scale(scenario: Scenario) -> float:
    """Counts per unit coincidence probability for one scan point."""
    h = herald_probability(scenario.source)
    budget = scenario.detection.signal_budget()
    return (
        scenario.scan.trigger_rate
        * scenario.scan.integration_time
        * h * h * budget * budget
    )


# ---------------------------------------------------------------------------
# Dip fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DipFit:
    """Weighted least-squares fit of C(d) = B (1 - V exp(-(d-d0)^2/2w^2))."""

    baseline: float
    visibility: float
    center: float
    width: float
    covariance: np.ndarray
    chi2: float
    ndof: int
    converged: bool
    flat: bool = False

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)

    @property
    def sigma_visibility(self) -> float:
        scale = self.chi2 / self.ndof if self.ndof > 0 else 0.0
        var = max(self.covariance[1, 1], 0.0) * max(scale, 0.0)
        return math.sqrt(var)

    def parameters(self) -> tuple:
        return (self.baseline, self.visibility, self.center, self.width)


def _dip_model(params, delays):
    b, v, d0, w = params
    e = np.exp(-((delays - d0) ** 2) / (2.0 * w * w))
    return b * (1.0 - v * e), e


def _linear_dip(delays, counts, weights, d0, w):
    """Exact LSQ for (B, B*V) at fixed dip position and width."""
    e = np.exp(-((delays - d0) ** 2) / (2.0 * w * w))
    design = np.stack([np.ones_like(delays), -e], axis=1)
    wd = design * weights[:, None]
    lhs = design.T @ wd
    rhs = wd.T @ counts
    try:
        sol = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        return None
    model = design @ sol
    chi2 = float(np.sum(weights * (model - counts) ** 2))
    return sol[0], sol[1], chi2


def fit_dip(delays, counts, errors=None, fixed_shape=None) -> DipFit:
    """Fit the Gaussian dip model to a coincidence trace.

    A coarse grid over (center, width) seeds a damped Gauss-Newton
    refinement of all four parameters; convergence at relative step
    below 1e-10 or 200 iterations.  ``fixed_shape=(d0, w)`` restricts the
    fit to the two linear parameters, used for traces without a
    detectable dip.  Flat data is reported with the visibility pinned to
    zero and ``flat=True``.
    """
    delays = np.asarray(delays, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if delays.size < 5:
        raise FitFailureError("need at least 5 scan points to fit a dip")
    if np.any(counts < 0):
        raise FitFailureError("counts must be non-negative")
    if errors is None:
        errors = np.sqrt(np.maximum(counts, 1.0))
    errors = np.asarray(errors, dtype=float)
    weights = 1.0 / np.maximum(errors, 1e-300) ** 2
    span = float(delays[-1] - delays[0])

    if fixed_shape is not None:
        d0, w = fixed_shape
        lin = _linear_dip(delays, counts, weights, d0, w)
        if lin is None:
            raise FitFailureError("degenerate design matrix in fixed-shape fit")
        b, a, chi2 = lin
        v = a / b if b > 0 else 0.0
        cov = _linear_covariance(delays, weights, b, d0, w)
        return DipFit(b, v, d0, w, cov, chi2, delays.size - 2, True,
                      flat=abs(v) < 1e-12)

    best = None
    for d0 in delays:
        for w in np.geomspace(span / 20.0, span, 12):
            lin = _linear_dip(delays, counts, weights, d0, w)
            if lin is None:
                continue
            b, a, chi2 = lin
            if b <= 0:
                continue
            if best is None or chi2 < best[0]:
                best = (chi2, b, a, d0, w)
    if best is None:
        raise FitFailureError("coarse grid found no valid dip seed")
    _, b, a, d0, w = best
    params = np.array([b, a / b if b else 0.0, d0, w])

    params, cov, chi2, converged = _gauss_newton(params, delays, counts, weights)
    return DipFit(
        params[0], params[1], params[2], abs(params[3]), cov, chi2,
        delays.size - 4, converged,
    )


def _gauss_newton(params, delays, counts, weights, max_iter=200):
    sigma = 1.0 / np.sqrt(weights)
    lam = 1e-3
    model, e = _dip_model(params, delays)
    chi2 = float(np.sum(weights * (model - counts) ** 2))
    converged = False
    for _ in range(max_iter):
        b, v, d0, w = params
        resid = (model - counts) / sigma
        jac = np.empty((delays.size, 4))
        jac[:, 0] = (1.0 - v * e) / sigma
        jac[:, 1] = -b * e / sigma
        jac[:, 2] = -b * v * e * (delays - d0) / (w * w) / sigma
        jac[:, 3] = -b * v * e * (delays - d0) ** 2 / w**3 / sigma
        hess = jac.T @ jac
        grad = jac.T @ resid
        stepped = False
        for _ in range(25):
            try:
                delta = np.linalg.solve(
                    hess + lam * np.diag(np.maximum(np.diag(hess), 1e-300)),
                    -grad,
                )
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + delta
            trial[3] = abs(trial[3]) if trial[3] != 0 else w
            t_model, t_e = _dip_model(trial, delays)
            t_chi2 = float(np.sum(weights * (t_model - counts) ** 2))
            if t_chi2 <= chi2 * (1.0 + 1e-14):
                rel = float(
                    np.max(np.abs(delta) / np.maximum(np.abs(params), 1e-300))
                )
                params, model, e, chi2 = trial, t_model, t_e, t_chi2
                lam = max(lam / 10.0, 1e-12)
                stepped = True
                if rel < 1e-10:
                    converged = True
                break
            lam *= 10.0
        if converged or not stepped:
            converged = converged or not stepped
            break
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jac.T @ jac)
    return params, cov, chi2, converged


def _linear_covariance(delays, weights, b, d0, w):
    """4x4 covariance with the shape rows zeroed (shape held fixed)."""
    e = np.exp(-((delays - d0) ** 2) / (2.0 * w * w))
    sigma = 1.0 / np.sqrt(weights)
    jac = np.stack([np.ones_like(delays) / sigma, -b * e / sigma], axis=1)
    try:
        cov2 = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov2 = np.linalg.pinv(jac.T @ jac)
    cov = np.zeros((4, 4))
    cov[:2, :2] = cov2
    return cov


def visibility_error(delays, counts, fit: DipFit) -> float:
    """Error on the fitted visibility from the scatter of the data about
    the fit (covariance scaled to unit reduced residual)."""
    if not fit.converged:
        raise FitFailureError("cannot assign an error to a non-converged fit")
    return fit.sigma_visibility


def normalize_visibility(v: float, sigma_v: float, v0: float,
                         sigma_v0: float) -> tuple:
    """Reference-normalized visibility with first-order error propagation."""
    if v0 <= 0.0:
        raise ScenarioValidationError(["reference visibility must be positive"])
    value = v / v0
    err = math.sqrt((sigma_v / v0) ** 2 + (v * sigma_v0 / (v0 * v0)) ** 2)
    return value, err


# ---------------------------------------------------------------------------
# Scan runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceResult:
    subset: str
    mode: str
    expected_prob: np.ndarray
    expected_counts: np.ndarray
    sampled_counts: np.ndarray
    errors: np.ndarray
    fit_expected: DipFit
    fit_sampled: DipFit
    normalized_expected: tuple
    normalized_sampled: tuple


@dataclass(frozen=True)
class ScanResult:
    scenario: Scenario
    delays: np.ndarray
    alpha: ModeVector
    beta: ModeVector
    effective_floor: float
    reference: TraceResult
    v0_expected: tuple
    v0_sampled: tuple
    traces: dict

    def summary_dict(self) -> dict:
        def fit_block(trace: TraceResult) -> dict:
            return {
                "visibility": float(trace.fit_sampled.visibility),
                "visibility_error": float(trace.fit_sampled.sigma_visibility),
                "normalized": float(trace.normalized_sampled[0]),
                "normalized_error": float(trace.normalized_sampled[1]),
                "expected_visibility": float(trace.fit_expected.visibility),
                "expected_normalized": float(trace.normalized_expected[0]),
                "baseline_counts": float(trace.fit_sampled.baseline),
                "flat": bool(trace.fit_sampled.flat),
            }

        subsets = {}
        for name, pair in sorted(self.traces.items()):
            subsets[name] = {mode: fit_block(t) for mode, t in sorted(pair.items())}
        return {
            "scenario": self.scenario.name,
            "seed": int(self.scenario.scan.rng_seed),
            "effective_floor": float(self.effective_floor),
            "v0": {
                "value": float(self.v0_sampled[0]),
                "error": float(self.v0_sampled[1]),
                "expected": float(self.v0_expected[0]),
            },
            "subsets": subsets,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary_dict(), sort_keys=True, indent=2) + "\n"

    def subset_csv(self, name: str) -> str:
        local = self.traces[name]["local"]
        glob = self.traces[name]["global"]
        lines = [
            "delay_s,expected_local,expected_global,counts_local,"
            "counts_global,err_local,err_global"
        ]
        for i, d in enumerate(self.delays):
            lines.append(
                ",".join(
                    [
                        repr(float(d)),
                        repr(float(local.expected_counts[i])),
                        repr(float(glob.expected_counts[i])),
                        str(int(local.sampled_counts[i])),
                        str(int(glob.sampled_counts[i])),
                        repr(float(local.errors[i])),
                        repr(float(glob.errors[i])),
                    ]
                )
            )
        return "\n".join(lines) + "\n"


def validate_scenario(scenario: Scenario) -> list:
    problems = []
    for tag, photon in (("photon_a", scenario.photon_a),
                        ("photon_b", scenario.photon_b)):
        if isinstance(photon, SwitchingPattern):
            for diag in validate_pattern(photon, scenario.loop):
                problems.append(f"{tag}: {diag}")
            if not photon.incouple:
                problems.append(f"{tag}: pattern has no in-coupling event")
            if not photon.outcouple:
                problems.append(f"{tag}: pattern never out-couples")
        elif isinstance(photon, ModeVector):
            if photon.window > scenario.loop.window:
                problems.append(
                    f"{tag}: vector window {photon.window} exceeds loop "
                    f"window {scenario.loop.window}"
                )
        else:
            problems.append(f"{tag}: neither a mode vector nor a pattern")
    for name, subset in scenario.subsets.items():
        out = [b for b in subset.bins if b >= scenario.loop.window]
        if out:
            problems.append(f"subset {name!r}: bins {sorted(out)} out of window")
    if len(scenario.scan.delays) == 0:
        problems.append("scan: delay list is empty")
    elif list(scenario.scan.delays) != sorted(scenario.scan.delays):
        problems.append("scan: delays must be sorted")
    if scenario.scan.integration_time <= 0:
        problems.append("scan: integration time must be positive")
    if not 0.0 < scenario.detection.detector_efficiency <= 1.0:
        problems.append("detection: detector efficiency outside (0, 1]")
    return problems


def _resolve_photon(photon, loop: LoopConfig, label: str):
    """Returns (mode vector over the loop window, roundtrips seen)."""
    if isinstance(photon, SwitchingPattern):
        vec = run_loop(None, photon, loop, label=label)
        return vec, photon.depth()
    return photon.padded(loop.window), 0


def _fit_with_fallback(delays, counts, errors, reference_fit: Optional[DipFit]):
    """Free 4-parameter fit, falling back to the reference dip shape when
    the trace carries no identifiable dip."""
    span = delays[-1] - delays[0]
    try:
        fit = fit_dip(delays, counts, errors)
    except (FitFailureError, HomloopError):
        fit = None
    if fit is not None and reference_fit is not None:
        shape_ok = (
            fit.converged
            and delays[0] <= fit.center <= delays[-1]
            and span / 50.0 <= fit.width <= 2.0 * span
            and abs(fit.visibility) >= 2.0 * fit.sigma_visibility
        )
        if not shape_ok:
            fit = None
    if fit is None:
        if reference_fit is None:
            raise FitFailureError("reference trace itself failed to fit")
        fit = fit_dip(
            delays, counts, errors,
            fixed_shape=(reference_fit.center, reference_fit.width),
        )
    return fit


def run_scan(scenario: Scenario) -> ScanResult:
    """Run the full pipeline for one scenario; deterministic per seed."""
    problems = validate_scenario(scenario)
    if problems:
        raise ScenarioValidationError(problems)

    loop = scenario.loop
    alpha, depth_a = _resolve_photon(scenario.photon_a, loop, "alpha")
    beta, depth_b = _resolve_photon(scenario.photon_b, loop, "beta")
    packet_a = scenario.packet_a.broadened(depth_a)
    packet_b = scenario.packet_b.broadened(depth_b)

    # The source visibility (multiphoton terms included) caps I(0).
    floor = fourfold_visibility(scenario.source)
    delays = np.asarray(scenario.scan.delays, dtype=float)
    scale = count_scale(scenario)
    background = scenario.detection.accidental_rate * scenario.scan.integration_time
    seed = scenario.scan.rng_seed

    subsets = {"full": ModeSubset.full(loop.window)}
    subsets.update(scenario.subsets)

    indist = np.array(
        [
            float(indistinguishability(packet_a, packet_b, d, floor))
            for d in delays
        ]
    )

    def expected_probs(vec_a, vec_b, subset):
        loc = np.empty(delays.size)
        glo = np.empty(delays.size)
        for i, ival in enumerate(indist):
            m = g11_matrix(vec_a, vec_b, ival)
            loc[i] = local_correlation(m, subset)
            glo[i] = global_correlation(m, subset)
        return loc, glo

    def build_trace(name, mode, probs, trace_id, ref_fits, v0_exp, v0_smp):
        ref_exp, ref_smp = ref_fits
        expected = probs * scale + background
        sampled = np.array(
            [
                sample_counts(expected[i], count_stream(seed, trace_id, i))
                for i in range(delays.size)
            ],
            dtype=np.int64,
        )
        errors = np.sqrt(np.maximum(sampled, 1.0))
        fit_exp = _fit_with_fallback(
            delays, expected, np.sqrt(np.maximum(expected, 1.0)), ref_exp
        )
        fit_smp = _fit_with_fallback(delays, sampled.astype(float), errors,
                                     ref_smp)
        norm_exp = (
            normalize_visibility(fit_exp.visibility, fit_exp.sigma_visibility,
                                 *v0_exp)
            if v0_exp is not None
            else (fit_exp.visibility, fit_exp.sigma_visibility)
        )
        norm_smp = (
            normalize_visibility(fit_smp.visibility, fit_smp.sigma_visibility,
                                 *v0_smp)
            if v0_smp is not None
            else (fit_smp.visibility, fit_smp.sigma_visibility)
        )
        return TraceResult(
            subset=name, mode=mode, expected_prob=probs,
            expected_counts=expected, sampled_counts=sampled, errors=errors,
            fit_expected=fit_exp, fit_sampled=fit_smp,
            normalized_expected=norm_exp, normalized_sampled=norm_smp,
        )

    # Reference: both photons parked in a single bin, same source/packets.
    ref_vec = mode_vector([1.0] + [0.0] * (loop.window - 1), "reference")
    ref_subset = ModeSubset.of(0)
    ref_local, _ = expected_probs(ref_vec, ref_vec, ref_subset)
    reference = build_trace("reference", "local", ref_local, 0,
                            (None, None), None, None)
    v0_expected = (
        reference.fit_expected.visibility,
        reference.fit_expected.sigma_visibility,
    )
    v0_sampled = (
        reference.fit_sampled.visibility,
        reference.fit_sampled.sigma_visibility,
    )

    ref_fits = (reference.fit_expected, reference.fit_sampled)
    traces = {}
    trace_id = 1
    for name, subset in subsets.items():
        loc, glo = expected_probs(alpha, beta, subset)
        traces[name] = {
            "local": build_trace(
                name, "local", loc, trace_id, ref_fits, v0_expected, v0_sampled,
            ),
            "global": build_trace(
                name, "global", glo, trace_id + 1, ref_fits,
                v0_expected, v0_sampled,
            ),
        }
        trace_id += 2

    return ScanResult(
        scenario=scenario, delays=delays, alpha=alpha, beta=beta,
        effective_floor=floor, reference=reference,
        v0_expected=v0_expected, v0_sampled=v0_sampled, traces=traces,
    )
