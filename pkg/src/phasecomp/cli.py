"""Command-line front-end: ``phasecomp <subcommand> [--config PATH] ...``.

Subcommands map to the experiments: ``source-scan`` (joint angular
distribution), ``ghost`` (phase imaging), ``visibility``, ``tomo``, ``chsh``,
``qkd`` and ``calibrate``. CSV outputs start with ``#`` comment lines that
embed the resolved configuration and seed; JSON outputs carry them under
``config`` and ``seed``. Either kind of file can be passed back as
``--config`` to reproduce the run.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .calibrate import calibrate
from .config import ConfigError, ExperimentConfig, load_config
from .errors import NumericalError, PhasecompError
from .imaging import coincidence_record_rows, default_idler_grid, ghost_scan, reconstruct_phase
from .measurement import (ALPHA, BETA, coincidence_probability, slit_grid, scan_2d,
                          simulate_counts, substream, visibility)
from .optics import MASK_MODES, PhaseLayout
from .qkd import round_row, run_session
from .state import (chsh, chsh_optimal, concurrence, epsilon, fidelity, TwoQubitState,
                    werner_dephased)
from .tomography import mle_reconstruct, simulate_tomography

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------- output


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(command: str, cfg: ExperimentConfig, rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# phasecomp {command}\n")
    buf.write(f"# seed: {cfg.seed}\n")
    buf.write("# config: " + json.dumps(_clean(cfg.to_dict()), sort_keys=True) + "\n")
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(rows[0]))
        for row in rows:
            writer.writerow([_cell(v) for v in row.values()])
    return buf.getvalue()


def render_json(command: str, cfg: ExperimentConfig, result: dict) -> str:
    doc = {"command": command, "seed": cfg.seed, "config": cfg.to_dict(), "result": result}
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


# ---------------------------------------------------------------- commands


def cmd_source_scan(cfg: ExperimentConfig, args) -> str:
    """Coincidences on the 9 x 9 slit grid at HH polarizers."""
    sc = cfg.scan
    det = cfg.detection_config(signal_aperture=sc.aperture, idler_aperture=sc.aperture,
                               signal_polarizer=0.0, idler_polarizer=0.0,
                               acquisition_time=sc.acquisition_time)
    grid = slit_grid(sc.aperture)
    phase = PhaseLayout(cfg.source)
    points = scan_2d(cfg.source, phase, det, grid, grid, workers=cfg.workers)
    rows = []
    for x, y, rec in points:
        p = coincidence_probability(cfg.source, phase,
                                    det.with_(signal_center=x, idler_center=y))
        rows.append({"signal_mrad": x, "idler_mrad": y, "raw": rec.raw,
                     "accidentals": rec.accidentals, "net": rec.net,
                     "duration_s": rec.duration,
                     "expected_net": p * det.pair_rate * det.acquisition_time})
    return render_csv("source-scan", cfg, rows)


def cmd_ghost(cfg: ExperimentConfig, args) -> str:
    g = cfg.ghost
    mode = args.mode or "single"
    phi_s = None if mode == "none" else cfg.masks_for("single")[0]
    det = cfg.detection_config(signal_aperture=g.signal_aperture, idler_aperture=g.idler_aperture,
                               signal_polarizer=ALPHA, idler_polarizer=BETA,
                               acquisition_time=g.acquisition_time)
    grid = default_idler_grid(g.grid_step, g.grid_halfwidth)
    result = ghost_scan(cfg.source, phi_s, det, grid, direct_time=g.direct_time,
                        workers=cfg.workers)
    recon = reconstruct_phase(result)
    return render_csv("ghost", cfg, list(coincidence_record_rows(result, recon)))


def _mode(args) -> str:
    return args.mode or "compensated"


def cmd_visibility(cfg: ExperimentConfig, args) -> str:
    mode = _mode(args)
    phi_s, phi_i = cfg.masks_for(mode)
    phase = PhaseLayout(cfg.source, phi_s, phi_i)
    det = cfg.detection_config(acquisition_time=cfg.visibility.acquisition_time)
    c_max = simulate_counts(cfg.source, phase, det.with_(signal_polarizer=ALPHA,
                                                         idler_polarizer=ALPHA),
                            substream(cfg.seed, 0))
    c_min = simulate_counts(cfg.source, phase, det.with_(signal_polarizer=ALPHA,
                                                         idler_polarizer=BETA),
                            substream(cfg.seed, 1))
    v = visibility(c_max, c_min)
    eps = epsilon(cfg.source, phi_s, phi_i, det.signal_window, det.idler_window)
    record = lambda r: {"raw": r.raw, "accidentals": r.accidentals, "net": r.net,
                        "duration_s": r.duration}
    return render_json("visibility", cfg, {
        "mode": mode, "visibility": v.value, "stderr": v.stderr,
        "predicted": eps.real, "c_max": record(c_max), "c_min": record(c_min)})


def _model_state(cfg: ExperimentConfig, mode: str):
    phi_s, phi_i = cfg.masks_for(mode)
    eps = epsilon(cfg.source, phi_s, phi_i).real
    return eps, werner_dephased(eps)


def cmd_tomo(cfg: ExperimentConfig, args) -> str:
    mode = _mode(args)
    eps, truth = _model_state(cfg, mode)
    data = simulate_tomography(truth, cfg.tomography.flux, substream(cfg.seed, 0))
    res = mle_reconstruct(data)
    rho = res.state
    return render_json("tomo", cfg, {
        "mode": mode, "epsilon": eps, "truth": truth.to_dict(),
        "reconstruction": res.to_dict(), "dataset": data.to_dict(),
        "diagnostics": {"fidelity": fidelity(rho, truth),
                        "concurrence": concurrence(rho),
                        "concurrence_truth": concurrence(truth),
                        "chsh_optimal": chsh_optimal(rho),
                        "min_eigenvalue": float(np.linalg.eigvalsh(rho.matrix).min())}})


def _load_state(path) -> TwoQubitState:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read state: {exc}") from None
    if "result" in doc:  # a tomo output
        doc = doc["result"]["reconstruction"]["state"]
    return TwoQubitState.from_dict(doc)


def _parse_angles(text):
    if text is None or text == "optimal":
        return None
    try:
        angles = [float(a) for a in text.split(",")]
    except ValueError:
        raise UsageError(f"--angles: expected four comma-separated numbers, got {text!r}") from None
    if len(angles) != 4:
        raise UsageError(f"--angles: expected four numbers, got {len(angles)}")
    return angles


def cmd_chsh(cfg: ExperimentConfig, args) -> str:
    mode = _mode(args)
    if args.state:
        eps, rho = None, _load_state(args.state)
    else:
        eps, rho = _model_state(cfg, mode)
    angles = _parse_angles(args.angles)
    if angles is None and args.angles is None and cfg.chsh.angles is not None:
        angles = [float(a) for a in cfg.chsh.angles]
    b_opt = chsh_optimal(rho)
    result = {"mode": None if args.state else mode, "epsilon": eps, "optimal": b_opt,
              "tsirelson": 2.0 * math.sqrt(2.0)}
    if angles is None:
        result.update(angles="optimal", B=b_opt)
    else:
        result.update(angles=angles, B=chsh(rho, tuple(angles)))
    return render_json("chsh", cfg, result)


def cmd_qkd(cfg: ExperimentConfig, args) -> str:
    report = run_session(cfg.source, cfg.qkd_config())
    if args.rounds_csv:
        rows = [round_row(i, r) for i, r in enumerate(report.rounds)]
        _emit(render_csv("qkd", cfg, rows), args.rounds_csv)
    return render_json("qkd", cfg, report.to_dict(include_rounds=cfg.qkd.log_rounds))


def _parse_targets(items) -> dict:
    targets = {}
    for item in items:
        mode, sep, value = item.partition("=")
        if not sep or mode not in MASK_MODES:
            raise UsageError(f"--target: expected MODE=V with MODE in {MASK_MODES}, got {item!r}")
        try:
            targets[mode] = float(value)
        except ValueError:
            raise UsageError(f"--target: {value!r} is not a number") from None
    return targets


def cmd_calibrate(cfg: ExperimentConfig, args) -> str:
    targets = _parse_targets(args.target) if args.target else dict(cfg.calibration.targets)
    fit = calibrate(cfg.source, targets, cfg.masks.amplitude, cfg.masks.frequency)
    result = fit.to_dict()
    result["source"] = dataclasses.asdict(fit.model)
    return render_json("calibrate", cfg, result)


COMMANDS = {
    "source-scan": (cmd_source_scan, "9x9 slit-grid coincidence scan (CSV)"),
    "ghost": (cmd_ghost, "ghost phase imaging scan and reconstruction (CSV)"),
    "visibility": (cmd_visibility, "diagonal-basis visibility for a mask mode (JSON)"),
    "tomo": (cmd_tomo, "simulated tomography and MLE reconstruction (JSON)"),
    "chsh": (cmd_chsh, "CHSH parameter of the model or a given state (JSON)"),
    "qkd": (cmd_qkd, "key distribution session report (JSON, optional rounds CSV)"),
    "calibrate": (cmd_calibrate, "fit v0 and sigma_corr to target visibilities (JSON)"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration or a previous output")
    common.add_argument("--seed", type=int, metavar="U64", help="override the configured seed")
    common.add_argument("--out", metavar="PATH", help="output file (default: config output or stdout)")
    common.add_argument("--workers", type=int, metavar="N", help="worker threads for scans")
    common.add_argument("--mode", choices=MASK_MODES, help="mask configuration")

    parser = _Parser(prog="phasecomp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "chsh":
            p.add_argument("--angles", metavar="A,A',B,B'|optimal",
                           help="analyzer angles in rad (default: optimal)")
            p.add_argument("--state", metavar="PATH", help="state JSON (or tomo output) to test")
        if name == "qkd":
            p.add_argument("--rounds-csv", metavar="PATH", help="write the per-round summary CSV")
        if name == "calibrate":
            p.add_argument("--target", action="append", metavar="MODE=V",
                           help="target visibility; repeatable (default: config targets)")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        changes["seed"] = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        changes["workers"] = args.workers
    return dataclasses.replace(cfg, **changes) if changes else cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        text = COMMANDS[args.command][0](cfg, args)
        _emit(text, args.out or cfg.output)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"phasecomp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PhasecompError, ValueError) as exc:
        print(f"phasecomp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
