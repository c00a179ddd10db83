"""Command-line frontend.

Subcommands::

    compile       target vector -> switching pattern
    validate      switching pattern -> diagnostics
    scan          scenario JSON -> per-subset CSV + summary JSON
    source-curve  visibility vs mean photon number -> CSV
    fit           coincidence CSV -> dip parameters
    demo          named built-in scenario (fig2a, fig2b, fig2cd, fig2eh)

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
failure (non-convergent fit, infeasible synthesis target).  Diagnostics
go to stderr; data goes to stdout or to files selected by ``--out``.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    FitFailureError,
    HomloopError,
    InfeasibleTargetError,
    PatternValidationError,
    ScenarioValidationError,
)
from .experiment import Scenario, fit_dip, run_scan
from .modes import ModeVector, mode_vector, normalize
from .network import LoopConfig, SwitchingPattern, compile_pattern, validate_pattern
from .source import calibrate_floor, visibility_curve

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3

DEMO_NAMES = ("fig2a", "fig2b", "fig2cd", "fig2eh")


def _err(message: str) -> None:
    print(f"homloop: {message}", file=sys.stderr)


def parse_target(text: str) -> ModeVector:
    """Parse a target vector like ``[1,1,1]/sqrt3`` or ``[[0,-1],[1,0]]/2``.

    Entries are real numbers or ``[re, im]`` pairs; an optional divisor
    suffix is either a number or ``sqrtN``.
    """
    text = text.strip()
    match = re.fullmatch(r"(\[.*\])\s*(?:/\s*(sqrt)?\s*([0-9.eE+-]+))?", text)
    if match is None:
        raise ValueError(f"cannot parse target vector {text!r}")
    body, sqrt_tag, divisor = match.groups()
    entries = json.loads(body)
    amplitudes = []
    for entry in entries:
        if isinstance(entry, (int, float)):
            amplitudes.append(complex(entry))
        elif isinstance(entry, (list, tuple)) and len(entry) == 2:
            amplitudes.append(complex(float(entry[0]), float(entry[1])))
        else:
            raise ValueError(f"bad amplitude entry {entry!r}")
    if divisor is not None:
        d = float(divisor)
        if sqrt_tag:
            d = math.sqrt(d)
        amplitudes = [z / d for z in amplitudes]
    return mode_vector(amplitudes)


def _write_or_print(text: str, out: str | None, quiet: bool) -> None:
    if out:
        Path(out).write_text(text)
        if not quiet:
            _err(f"wrote {out}")
    else:
        sys.stdout.write(text)


def _load_json(path: str) -> dict:
    with open(path) as handle:
        return json.load(handle)


def demo_scenario(name: str) -> Scenario:
    """Load one of the packaged reference scenarios."""
    if name not in DEMO_NAMES:
        raise ScenarioValidationError(
            [f"unknown demo {name!r}; choose from {', '.join(DEMO_NAMES)}"]
        )
    data = resources.files("homloop.data.scenarios").joinpath(f"{name}.json")
    return Scenario.loads(data.read_text())


def packaged_patterns() -> dict:
    """All switching patterns shipped with the package, by name."""
    out = {}
    for item in resources.files("homloop.data.patterns").iterdir():
        if item.name.endswith(".json"):
            out[item.name[:-5]] = SwitchingPattern.loads(item.read_text())
    return out


def _loop_from_args(args) -> LoopConfig:
    kwargs = {}
    if getattr(args, "window", None) is not None:
        kwargs["window"] = args.window
    if getattr(args, "max_roundtrips", None) is not None:
        kwargs["max_roundtrips"] = args.max_roundtrips
    return LoopConfig(**kwargs)


def _emit_scan(result, out_dir: str | None, fmt: str, quiet: bool) -> None:
    name = result.scenario.name
    if out_dir:
        directory = Path(out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        if fmt in ("csv", "both"):
            for subset in result.traces:
                path = directory / f"{name}_{subset}.csv"
                path.write_text(result.subset_csv(subset))
                if not quiet:
                    _err(f"wrote {path}")
        summary = directory / f"{name}_summary.json"
        summary.write_text(result.summary_json())
        if not quiet:
            _err(f"wrote {summary}")
    else:
        sys.stdout.write(result.summary_json())


def cmd_compile(args) -> int:
    try:
        target = normalize(parse_target(args.target))
    except (ValueError, HomloopError) as exc:
        _err(f"bad --target: {exc}")
        return EXIT_VALIDATION
    cfg = _loop_from_args(args).lossless()
    try:
        pattern = compile_pattern(target.padded(cfg.window), cfg)
    except InfeasibleTargetError as exc:
        extra = (
            f" (requires {exc.required_roundtrips} roundtrips)"
            if exc.required_roundtrips
            else ""
        )
        _err(f"infeasible target{extra}: {exc}")
        return EXIT_NUMERICAL
    _write_or_print(pattern.dumps(indent=2) + "\n", args.out, args.quiet)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        pattern = SwitchingPattern.loads(Path(args.pattern).read_text())
    except OSError as exc:
        _err(f"cannot read pattern: {exc}")
        return EXIT_IO
    except (KeyError, ValueError) as exc:
        _err(f"malformed pattern file: {exc}")
        return EXIT_VALIDATION
    diags = validate_pattern(pattern, _loop_from_args(args),
                             strict_settings=args.strict)
    if diags:
        for diag in diags:
            _err(diag)
        return EXIT_VALIDATION
    if not args.quiet:
        _err("pattern is valid")
    return EXIT_OK


def cmd_scan(args) -> int:
    try:
        scenario = Scenario.from_json_dict(_load_json(args.scenario))
    except OSError as exc:
        _err(f"cannot read scenario: {exc}")
        return EXIT_IO
    except (KeyError, ValueError, HomloopError) as exc:
        _err(f"malformed scenario: {exc}")
        return EXIT_VALIDATION
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    return _run_and_emit(scenario, args)


def _run_and_emit(scenario: Scenario, args) -> int:
    try:
        result = run_scan(scenario)
    except ScenarioValidationError as exc:
        for problem in exc.problems:
            _err(problem)
        return EXIT_VALIDATION
    except (FitFailureError, PatternValidationError) as exc:
        _err(str(exc))
        return EXIT_NUMERICAL
    try:
        _emit_scan(result, args.out, args.format, args.quiet)
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_IO
    return EXIT_OK


def cmd_source_curve(args) -> int:
    try:
        if args.anchor_v is not None:
            floor = float(
                calibrate_floor(args.anchor_v, args.anchor_nbar,
                                args.herald_efficiency, args.n_max)
            )
        else:
            floor = args.floor
        nbars = np.geomspace(args.nbar_min, args.nbar_max, args.points)
        rows = visibility_curve(nbars, floor, args.herald_efficiency, args.n_max)
    except HomloopError as exc:
        _err(str(exc))
        return EXIT_NUMERICAL
    lines = ["nbar,visibility"]
    lines += [f"{repr(nbar)},{repr(v)}" for nbar, v in rows]
    _write_or_print("\n".join(lines) + "\n", args.out, args.quiet)
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        raw = np.genfromtxt(args.data, delimiter=",", names=True)
    except OSError as exc:
        _err(f"cannot read data: {exc}")
        return EXIT_IO
    names = raw.dtype.names or ()
    if "delay_s" not in names:
        _err("data file needs a delay_s column")
        return EXIT_VALIDATION
    count_col = next(
        (c for c in ("counts", "counts_global", "counts_local") if c in names),
        None,
    )
    if count_col is None:
        _err("data file needs a counts, counts_global or counts_local column")
        return EXIT_VALIDATION
    errors = raw["err"] if "err" in names else None
    try:
        fit = fit_dip(raw["delay_s"], raw[count_col], errors)
        if not fit.converged:
            raise FitFailureError("dip fit did not converge")
    except FitFailureError as exc:
        _err(str(exc))
        return EXIT_NUMERICAL
    payload = {
        "baseline": float(fit.baseline),
        "visibility": float(fit.visibility),
        "visibility_error": float(fit.sigma_visibility),
        "center_s": float(fit.center),
        "width_s": float(fit.width),
        "chi2": float(fit.chi2),
        "ndof": int(fit.ndof),
        "column": count_col,
    }
    _write_or_print(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    args.out, args.quiet)
    return EXIT_OK


def cmd_demo(args) -> int:
    try:
        scenario = demo_scenario(args.name)
    except ScenarioValidationError as exc:
        for problem in exc.problems:
            _err(problem)
        return EXIT_VALIDATION
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    return _run_and_emit(scenario, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homloop",
        description="Two-photon interference in time-multiplexed loop networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=False):
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--quiet", action="store_true",
                       help="suppress progress messages")
        if fmt:
            p.add_argument("--format", choices=("csv", "json", "both"),
                           default="both", help="scan output format")

    p = sub.add_parser("compile", help="synthesize a switching pattern")
    p.add_argument("--target", required=True,
                   help='target vector, e.g. "[1,1,1]/sqrt3"')
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--max-roundtrips", type=int, default=None,
                   dest="max_roundtrips")
    common(p)

    p = sub.add_parser("validate", help="check a switching pattern")
    p.add_argument("--pattern", required=True, help="pattern JSON file")
    p.add_argument("--strict", action="store_true",
                   help="restrict coins to the three hardware settings")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--max-roundtrips", type=int, default=None,
                   dest="max_roundtrips")
    common(p)

    p = sub.add_parser("scan", help="run a scenario file")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=int, default=None)
    common(p, fmt=True)

    p = sub.add_parser("source-curve", help="visibility vs mean photon number")
    p.add_argument("--nbar-min", type=float, default=1e-4)
    p.add_argument("--nbar-max", type=float, default=0.3)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--floor", type=float, default=0.83,
                   help="zero-delay indistinguishability ceiling")
    p.add_argument("--anchor-nbar", type=float, default=0.0165,
                   help="calibration anchor mean photon number")
    p.add_argument("--anchor-v", type=float, default=None,
                   help="calibrate the floor to this visibility at the anchor")
    p.add_argument("--herald-efficiency", type=float, default=0.30)
    p.add_argument("--n-max", type=int, default=3)
    common(p)

    p = sub.add_parser("fit", help="fit a dip to CSV data")
    p.add_argument("--data", required=True,
                   help="CSV with delay_s and counts columns")
    common(p)

    p = sub.add_parser("demo", help="run a packaged reference scenario")
    p.add_argument("name", choices=DEMO_NAMES)
    p.add_argument("--seed", type=int, default=None)
    common(p, fmt=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "compile": cmd_compile,
        "validate": cmd_validate,
        "scan": cmd_scan,
        "source-curve": cmd_source_curve,
        "fit": cmd_fit,
        "demo": cmd_demo,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
