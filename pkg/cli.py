#!/usr/bin/env python3
"""
Command-line entry point.

    python cli.py theory    [--grid 0:pi/4:101] [--out theory.csv]
    python cli.py sweep     [--states plus,minus] [--angles 100] [--shots 100] [--out sweep.csv]
    python cli.py analyze   sweep.csv [--reps 10000] [--unpaired] [--out report.json]
    python cli.py protocol  [--rounds 20000] [--eve-theta pi/8] [--out protocol.json]
    python cli.py optimize  --eta-a 0.6 [--verify] [--frontier 9]

CSV and JSON go to ``--out`` (with a ``.manifest.json`` beside it) or to
stdout. Logs go to stderr and the log file.

Exit codes: 0 ok, 1 usage or configuration error, 2 malformed input
data, 3 analysis failure.
"""

import argparse
import csv
import io
import json
import math
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

import bb84
import experiment
import optimizer
import stats
from cloner import QUARTER_PI, theoretical_fidelities
from noise import DEFAULT_P1, DEFAULT_P2, NoiseModel
from utils.config_loader import load_config
from utils.errors import (
    EXIT_ANALYSIS, EXIT_OK, EXIT_USAGE,
    CloneLabError, ConfigError, DataError,
)
from utils.logger import (
    get_logger, log_error_with_context, log_function_end, log_processing_step,
    log_validation_result, logger as root_logger,
)
from utils.manifest import RunManifest

logger = get_logger("cli")

SCHEMA_VERSION = 1
DEFAULT_GRID = "0:pi/4:101"
THEORY_HEADER = ("theta", "F_A", "F_B", "e_B", "e_E", "I_AB", "I_AE", "S", "S_raw")
CURVES_HEADER = ("state", "theta", "fit_a", "fit_b")

_PI_LITERAL = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_angle(text: str) -> float:
    """Radians, or a multiple of pi such as 'pi/8', '3pi/16', '0.5*pi'"""
    match = _PI_LITERAL.match(text)
    if match:
        factor_text, divisor_text = match.groups()
        if factor_text in ("", "+"):
            factor = 1.0
        elif factor_text == "-":
            factor = -1.0
        else:
            factor = float(factor_text)
        divisor = float(divisor_text) if divisor_text else 1.0
        if divisor == 0:
            raise argparse.ArgumentTypeError(f"division by zero in angle {text!r}")
        return factor * math.pi / divisor
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r} (use radians or e.g. 'pi/8')") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"angle must be finite, got {text!r}")
    return value


def parse_grid(text: str) -> np.ndarray:
    """'start:stop:count' with both ends included"""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must look like start:stop:count, got {text!r}")
    start, stop = parse_angle(parts[0]), parse_angle(parts[1])
    try:
        count = int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid count must be an integer, got {parts[2]!r}") from None
    if count < 1:
        raise argparse.ArgumentTypeError(f"grid count must be >= 1, got {count}")
    if not 0.0 <= start <= stop <= QUARTER_PI:
        raise argparse.ArgumentTypeError(f"grid must satisfy 0 <= start <= stop <= pi/4, got {text!r}")
    return np.linspace(start, stop, count)


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a probability: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"probability must lie in [0, 1], got {value}")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _positive_int(text: str) -> int:
    value = _non_negative_int(text)
    if value == 0:
        raise argparse.ArgumentTypeError("must be positive, got 0")
    return value


def build_parser() -> CliParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file (overrides config/defaults.json)")
    common.add_argument("--seed", type=_non_negative_int, help="Master seed (overrides CLONELAB_SEED)")
    common.add_argument("--out", help="Output file; a .manifest.json is written beside it")
    common.add_argument("--workers", type=_positive_int, help="Worker processes for sweeps and resampling")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Console log level (default WARNING)")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--hardware-noise", action="store_true",
                       help=f"Use the quoted gate error rates (p1={DEFAULT_P1}, p2={DEFAULT_P2})")
    noise.add_argument("--noise-p1", type=_probability, help="Error probability per single-qubit gate")
    noise.add_argument("--noise-p2", type=_probability, help="Error probability per two-qubit gate / link")
    noise.add_argument("--noise-readout", type=_probability, help="Readout flip probability")

    parser = CliParser(
        description="Phase-covariant cloning attacks on equatorial BB84: simulation and analysis",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", parser_class=CliParser)
    sub.required = True

    theory = sub.add_parser("theory", parents=[common], help="Theory table of fidelities, error rates and key rate")
    theory.add_argument("--grid", type=parse_grid, default=parse_grid(DEFAULT_GRID),
                        help=f"Cloning angles as start:stop:count (default {DEFAULT_GRID})")

    sweep = sub.add_parser("sweep", parents=[common, noise], help="Run the cloning-angle sweep")
    sweep.add_argument("--states", help="Comma-separated subset of plus,minus,plus_i,minus_i")
    sweep.add_argument("--angles", type=_positive_int, help="Cloning angles per state")
    sweep.add_argument("--shots", type=_positive_int, help="Shots per angle")
    sweep.add_argument("--theta-min", type=parse_angle, help="Lower end of the angle range")
    sweep.add_argument("--theta-max", type=parse_angle, help="Upper end of the angle range")

    analyze = sub.add_parser("analyze", parents=[common], help="Fit, intersect and bootstrap a sweep CSV")
    analyze.add_argument("csv", help="Experiment CSV written by 'sweep'")
    analyze.add_argument("--reps", type=_positive_int, help="Monte-Carlo and bootstrap replicates")
    analyze.add_argument("--unpaired", action="store_true", default=None,
                         help="Resample the two fidelity series independently")
    analyze.add_argument("--plot-out", help="CSV of fitted-curve samples (default: beside --out)")

    protocol = sub.add_parser("protocol", parents=[common, noise], help="Run BB84 with an optional cloning attack")
    protocol.add_argument("--rounds", type=_positive_int, help="Qubits sent by Alice")
    protocol.add_argument("--eve-theta", type=parse_angle, help="Eve's cloning angle (omit for no eavesdropper)")
    protocol.add_argument("--shard-rounds", type=_positive_int, help="Rounds per independently seeded shard")

    optimize = sub.add_parser("optimize", parents=[common], help="Optimal asymmetric cloner for a given eta_A")
    optimize.add_argument("--eta-a", type=float, help="Bob's shrinking factor in (0, 1)")
    optimize.add_argument("--verify", action="store_true", help="Cross-check against SLSQP and a grid search")
    optimize.add_argument("--frontier", type=_positive_int, help="Also list the optimal frontier on this many angles")

    return parser


def resolve_config(args: argparse.Namespace) -> Dict[str, Any]:
    """Defaults < environment < --config file < flags"""
    config = load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.workers is not None:
        config["sweep"]["workers"] = args.workers

    if getattr(args, "hardware_noise", False):
        config["noise"]["p1"], config["noise"]["p2"] = DEFAULT_P1, DEFAULT_P2
    for flag, key in (("noise_p1", "p1"), ("noise_p2", "p2"), ("noise_readout", "p_readout")):
        if getattr(args, flag, None) is not None:
            config["noise"][key] = getattr(args, flag)

    if getattr(args, "states", None):
        config["states"] = [s.strip() for s in args.states.split(",") if s.strip()]
    for flag, key in (("angles", "n_angles"), ("shots", "shots"), ("theta_min", "theta_min"), ("theta_max", "theta_max")):
        if getattr(args, flag, None) is not None:
            config[key] = getattr(args, flag)

    if getattr(args, "reps", None) is not None:
        config["analysis"]["reps"] = args.reps
    if getattr(args, "unpaired", None):
        config["analysis"]["unpaired"] = True
    if getattr(args, "rounds", None) is not None:
        config["protocol"]["rounds"] = args.rounds
    if getattr(args, "shard_rounds", None) is not None:
        config["protocol"]["shard_rounds"] = args.shard_rounds
    return config


def _noise_from(config: Dict[str, Any]) -> NoiseModel:
    noise = config["noise"]
    return NoiseModel(float(noise["p1"]), float(noise["p2"]), float(noise["p_readout"]))


def _json_safe(value: Any) -> Any:
    """Plain JSON types only; non-finite floats become null"""
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def render_json(payload: Dict[str, Any]) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(payload)
    return json.dumps(_json_safe(body), indent=2, sort_keys=True, allow_nan=False) + "\n"


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buffer.getvalue()


def _emit(text: str, out: Optional[str], manifest: RunManifest):
    if not out:
        sys.stdout.write(text)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    manifest.write_beside(out)
    logger.info(f"Wrote {out}")


def cmd_theory(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    rows = []
    for theta in args.grid:
        theta = float(theta)
        f_a, f_b = theoretical_fidelities(theta)
        e_b, e_e, i_ab, i_ae = bb84.theory_curves(theta)
        rates = bb84.rate_report(e_b)
        rows.append((theta, f_a, f_b, e_b, e_e, i_ab, i_ae, rates.S, rates.S_raw))
    manifest = RunManifest("theory", {"grid": [float(t) for t in args.grid]}, config["seed"])
    _emit(render_csv(THEORY_HEADER, rows), args.out, manifest)
    return EXIT_OK


def sweep_config_from(config: Dict[str, Any]) -> experiment.SweepConfig:
    return experiment.SweepConfig(
        states=tuple(config["states"]),
        n_angles=int(config["n_angles"]),
        shots=int(config["shots"]),
        theta_min=float(config["theta_min"]),
        theta_max=float(config["theta_max"]),
        noise=_noise_from(config),
        seed=int(config["seed"]),
        workers=int(config["sweep"]["workers"]),
    )


def cmd_sweep(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    cfg = sweep_config_from(config)
    manifest = RunManifest("sweep", config, cfg.seed)
    records = experiment.run_sweep(cfg)
    out = args.out or "sweep.csv"
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    experiment.write_csv(records, out)
    manifest.write_beside(out)
    log_function_end("cmd_sweep", "cli", f"{len(records)} records -> {out}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    reps = int(config["analysis"]["reps"])
    if reps < stats.MIN_MC_REPS:
        raise ConfigError(f"--reps must be >= {stats.MIN_MC_REPS}, got {reps}")
    paired = not config["analysis"]["unpaired"]
    seed = int(config["seed"])

    records = experiment.read_csv(args.csv)
    if not records:
        raise DataError("experiment file has no records", args.csv, 1)
    grouped = experiment.group_by_state(records)
    log_processing_step("analyze", "cli", f"{len(records)} records across {len(grouped)} states")

    manifest = RunManifest("analyze", {**config, "input": str(args.csv)}, seed)
    report, analyses, result = stats.analyze(grouped, reps, seed, paired, int(config["sweep"]["workers"]))
    report.update({"input": Path(args.csv).name, "reps": reps, "paired": paired, "seed": seed})
    _emit(render_json(report), args.out, manifest)

    plot_out = args.plot_out or (str(Path(args.out).with_suffix(".curves.csv")) if args.out else None)
    if plot_out and analyses:
        fits = {state: (a.fit_A, a.fit_B) for state, a in analyses.items()}
        curves = RunManifest("analyze", {**config, "input": str(args.csv)}, seed)
        _emit(render_csv(CURVES_HEADER, stats.fitted_curve_samples(fits)), plot_out, curves)

    for warning in result.warnings:
        logger.warning(warning)
    if not analyses:
        logger.error("No state produced an estimate")
        return EXIT_ANALYSIS
    return EXIT_OK


def cmd_protocol(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    noise = _noise_from(config)
    seed = int(config["seed"])
    rounds = int(config["protocol"]["rounds"])
    eve_theta = args.eve_theta
    manifest = RunManifest("protocol", {**config, "eve_theta": eve_theta}, seed)

    result = bb84.run_protocol_sharded(rounds, eve_theta, noise, seed, int(config["protocol"]["shard_rounds"]))
    # heavy noise can push the estimate past 1/2, where the rate formulas stop
    e_b = min(result.e_B_hat, 0.5)
    rates = bb84.rate_report(e_b)
    payload: Dict[str, Any] = {
        "seed": seed,
        "eve_theta": eve_theta,
        "noise": noise.to_dict(),
        "protocol": result.to_dict(),
        "rates": rates.to_dict(),
        "empirical": {
            "I_AB": bb84.mutual_info(e_b),
            "I_AE": bb84.mutual_info(min(result.e_E_hat, 0.5)),
        },
        "critical_qber": bb84.critical_qber(),
    }
    if eve_theta is not None:
        e_b_theory, e_e_theory, i_ab, i_ae = bb84.theory_curves(eve_theta)
        payload["theory"] = {"e_B": e_b_theory, "e_E": e_e_theory, "I_AB": i_ab, "I_AE": i_ae}
    _emit(render_json(payload), args.out, manifest)
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    if args.eta_a is None and args.frontier is None:
        raise ConfigError("optimize needs --eta-a and/or --frontier")
    payload: Dict[str, Any] = {}
    if args.eta_a is not None:
        solution = optimizer.optimal_coefficients(args.eta_a)
        payload.update({"eta_A": args.eta_a, "solution": solution.to_dict()})
        if args.verify:
            numeric = optimizer.solve_numerically(args.eta_a)
            grid = optimizer.grid_search_eta_b(args.eta_a)
            stationary = optimizer.is_stationary(solution, args.eta_a)
            agrees = abs(numeric.eta_B - solution.eta_B) < 1e-6 and abs(grid - solution.eta_B) < 5e-3
            log_validation_result("optimizer", f"eta_A={args.eta_a}", stationary and agrees,
                                  f"slsqp={numeric.eta_B:.8f} grid={grid:.8f}", "cli")
            payload["verification"] = {
                "stationary": stationary,
                "residuals": optimizer.lagrange_residuals(solution, args.eta_a),
                "slsqp": numeric.to_dict(),
                "grid_search_eta_B": grid,
                "agrees": agrees,
            }
    if args.frontier is not None:
        payload["frontier"] = [{"eta_A": a, "eta_B": b} for a, b in optimizer.frontier_by_angle(args.frontier)]
    manifest = RunManifest("optimize", {"eta_a": args.eta_a, "frontier": args.frontier}, config["seed"])
    _emit(render_json(payload), args.out, manifest)
    return EXIT_OK


COMMANDS = {
    "theory": cmd_theory,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "protocol": cmd_protocol,
    "optimize": cmd_optimize,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        root_logger.set_console_level(args.log_level)

    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except CloneLabError as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(json.dumps(_json_safe(e.to_dict())) + "\n")
        return e.exit_code
    except Exception as e:
        log_error_with_context(e, f"cli {args.command}", "cli")
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
