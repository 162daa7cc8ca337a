"""Command-line interface.

Subcommands: analytic, simulate, optimize, fringe, noise-validate, allan.
Tables are written as CSV and single runs as JSON; every output starts with
the resolved configuration so it can be regenerated.  Exit status is 0 on
success, 2 for configuration or input errors, 3 for numerical failures and
4 for resource problems (cost guards, unwritable output).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .allan import fit_prefactor, octave_taus, overlapping_adev
from .analytic_stability import budget, budget_sweep
from .config import JOBS_ENV, RunConfig, load
from .errors import (ClockStabError, ConfigError, ConvergenceError, DegenerateStateError, DomainError,
                     NumericFault, ResourceError)
from .fringe_mfpt import guide_flicker, guide_rw, t_fringe_hop
from .noise_gen import validate_generator
from .noise_model import coherence_time, preset
from .optimizer import n_min, n_min_capped, sigma_min
from .servo_sim import run_loop
from .spin_states import EnsembleSpec

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17e}"
    return str(v)


def _provenance(command: str, cfg: RunConfig) -> str:
    return json.dumps({"command": command, "version": __version__, "config": cfg.to_dict()},
                      sort_keys=True)


def _write_csv(out, command, cfg, header, rows, extra_comments=()):
    buf = io.StringIO()
    buf.write(f"# {_provenance(command, cfg)}\n")
    for line in extra_comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _emit(out, buf.getvalue())


def _emit(out, text):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    except OSError as exc:
        raise ResourceError(f"cannot write {out}: {exc}") from exc


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _grid_given(cfg: RunConfig) -> bool:
    return bool({"t_ramsey", "t_ramsey_min", "t_ramsey_max", "t_ramsey_points"} & cfg.raw.get("schedule", {}).keys())


def cmd_analytic(cfg: RunConfig, args) -> int:
    grid = cfg.t_ramsey if _grid_given(cfg) else None
    rows = budget_sweep(cfg.laser, cfg.t_dead, cfg.ensemble, cfg.servo, grid)
    _write_csv(args.out, "analytic", cfg, ["T_R", "sigma_qpn", "sigma_dick", "sigma_ctl", "sigma_total"],
               ([b.t_ramsey, b.sigma_qpn, b.sigma_dick, b.sigma_ctl, b.sigma_total] for b in rows))
    return EXIT_OK


def _sim_cell(cfg: RunConfig, t_r: float, seed: int):
    return run_loop(cfg.laser, cfg.schedule(t_r), cfg.ensemble, cfg.servo, cfg.n_cycles, seed)


def cmd_simulate(cfg: RunConfig, args) -> int:
    cells = [(t, s) for t in cfg.t_ramsey for s in cfg.seeds]
    results = Parallel(n_jobs=cfg.jobs)(delayed(_sim_cell)(cfg, t, s) for t, s in cells)
    by_point = {}
    for (t, s), r in zip(cells, results):
        by_point.setdefault(t, []).append((s, r))

    points = []
    allan_rows = []
    for t, runs in by_point.items():
        pre = np.array([r.prefactor_sigma1s for _, r in runs])
        sem = float(np.std(pre, ddof=1) / math.sqrt(len(pre))) if len(pre) > 1 else None
        try:
            analytic = budget(cfg.laser, cfg.schedule(t), cfg.ensemble, cfg.servo).sigma_total
        except ClockStabError:
            analytic = None
        points.append({
            "t_ramsey": t,
            "analytic_sigma_total": analytic,
            "prefactor_mean": float(pre.mean()),
            "prefactor_sem": sem,
            "runs": [{"seed": s, "prefactor_sigma1s": r.prefactor_sigma1s, "hop_count": r.hop_count,
                      "hop_storm": r.hop_storm, "n_cycles": r.n_cycles} for s, r in runs],
        })
        for s, r in runs:
            for tau, a, n in zip(r.allan.taus, r.allan.adev, r.allan.n_samples_per_tau):
                allan_rows.append([t, s, tau, a, n])
            if args.dump_traces and args.out:
                stem = Path(args.out).with_suffix("")
                _emit(f"{stem}_trace_T{t:g}_seed{s}.csv",
                      "cycle,y\n" + "".join(f"{k},{y:.17e}\n" for k, y in enumerate(r.stabilized_freq_trace)))

    doc = {"command": "simulate", "version": __version__, "config": cfg.to_dict(), "points": points}
    _emit(args.out, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    if args.out and str(args.out) != "-":
        _write_csv(f"{Path(args.out).with_suffix('')}_allan.csv", "simulate", cfg,
                   ["T_R", "seed", "tau", "adev", "n"], allan_rows)
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, args) -> int:
    header = ["laser", "T_D", "Z", "T_R_star", "sigma_min", "N_min_css", "N_min_sss"]
    header += [f"N_min_capped_css_{t:g}" for t in cfg.optimize_t_max]
    rows = []
    for name in cfg.optimize_presets:
        spec = preset(name, cfg.laser.nu0)
        z = coherence_time(spec)
        for td in cfg.optimize_t_dead:
            sm = sigma_min(spec, td, cfg.servo)
            row = [name, td, z, sm.t_ramsey, sm.sigma,
                   n_min(spec, td, cfg.servo), n_min(spec, td, cfg.servo, squeezed=True)]
            row += [n_min_capped(spec, td, t, cfg.servo) for t in cfg.optimize_t_max]
            rows.append(row)
    _write_csv(args.out, "optimize", cfg, header, rows)
    return EXIT_OK


def cmd_fringe(cfg: RunConfig, args) -> int:
    a = {"auto": None, "pi": math.pi, "pi/2": math.pi / 2}[cfg.fringe_escape]
    z = coherence_time(cfg.laser)
    rows = []
    for n in cfg.fringe_n_atoms:
        ens = EnsembleSpec.squeezed(n) if cfg.state == "sss" else EnsembleSpec(n)
        r = t_fringe_hop(cfg.laser, ens, cfg.servo, cfg.fringe_threshold, a)
        rows.append([n, r.t_fringe_hop, r.ratio_to_z, float(guide_flicker(n, z)), float(guide_rw(n, z)),
                     r.escape_half_width, r.low_confidence, r.degenerate])
    _write_csv(args.out, "fringe", cfg,
               ["N", "T_FH_mfpt", "T_FH_over_Z", "T_FH_guide_flicker", "T_FH_guide_rw",
                "escape_half_width", "low_confidence", "degenerate"], rows)
    return EXIT_OK


def cmd_noise_validate(cfg: RunConfig, args) -> int:
    seed = cfg.seeds[0]
    rep = validate_generator(cfg.laser, cfg.schedule(), cfg.validate_n_cycles, cfg.validate_n_seeds, seed=seed)
    _write_csv(args.out, "noise-validate", cfg, ["tau", "target", "estimated", "rel_error"],
               zip(rep.taus, rep.target, rep.estimated, rep.rel_error),
               [f"max_rel_error {rep.max_rel_error:.17e}", f"slope {rep.slope:.17e}",
                f"flicker_stages {rep.flicker.n_stages}"])
    return EXIT_OK


def _read_trace(path, column: int) -> np.ndarray:
    values = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    values.append(float(row[column]))
                except (ValueError, IndexError):
                    if values:
                        raise ConfigError(f"{path}: unparseable row {row!r}") from None
                    # header line before any data
    except OSError as exc:
        raise ConfigError(f"cannot read trace {path}: {exc}") from exc
    if not values:
        raise ConfigError(f"{path}: no numeric data")
    return np.asarray(values)


def cmd_allan(cfg: RunConfig, args) -> int:
    if not args.input:
        raise ConfigError("allan: --input is required")
    y = _read_trace(args.input, args.column)
    t_c = args.t_cycle if args.t_cycle else cfg.schedule().t_cycle
    series = overlapping_adev(y, t_c, octave_taus(y.size, t_c))
    comments = []
    lo = 1e3 * t_c
    hi = y.size * t_c / 10
    try:
        comments.append(f"prefactor_sigma1s {fit_prefactor(series, (lo, hi)):.17e} window {lo:g}..{hi:g} s")
    except DomainError:
        comments.append("prefactor_sigma1s unavailable (trace too short for the fit window)")
    _write_csv(args.out, "allan", cfg, ["tau", "adev", "n"],
               zip(series.taus, series.adev, series.n_samples_per_tau), comments)
    return EXIT_OK


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "fringe": cmd_fringe,
    "noise-validate": cmd_noise_validate,
    "allan": cmd_allan,
}

# flag -> config key
FLAG_KEYS = {
    "preset": "laser.preset",
    "components": "laser.components",
    "t_ramsey": "schedule.t_ramsey",
    "t_dead": "schedule.t_dead",
    "n_atoms": "ensemble.n_atoms",
    "state": "ensemble.state",
    "g": "servo.g",
    "g2": "servo.g2",
    "servo_kind": "servo.servo_kind",
    "seeds": "run.seeds",
    "n_cycles": "run.n_cycles",
    "jobs": "run.jobs",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any configuration key (repeatable)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--preset", help="laser preset: tL, cL, pL1, pL2")
    common.add_argument("--components", help="keep only these noise types, e.g. 'flicker'")
    common.add_argument("--t-ramsey", help="Ramsey time(s) in s, comma separated")
    common.add_argument("--t-dead", help="dead time in s")
    common.add_argument("--n-atoms", help="atom number")
    common.add_argument("--state", choices=["css", "sss"])
    common.add_argument("--g", help="primary servo gain")
    common.add_argument("--g2", help="secondary servo gain")
    common.add_argument("--servo-kind", choices=["single_integrator", "double_integrator"])
    common.add_argument("--seeds", help="comma separated seeds")
    common.add_argument("--n-cycles", help="cycles per simulated run")
    common.add_argument("--jobs", help=f"parallel workers (default: ${JOBS_ENV} or 1)")

    p = argparse.ArgumentParser(prog="clockstab", description="Ramsey clock stability models")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analytic", parents=[common], help="analytic budget versus Ramsey time")
    sp = sub.add_parser("simulate", parents=[common], help="Monte-Carlo servo-loop runs")
    sp.add_argument("--dump-traces", action="store_true", help="also write stabilised traces")
    sub.add_parser("optimize", parents=[common], help="sigma_min, T_R* and critical atom numbers")
    sub.add_parser("fringe", parents=[common], help="fringe-hop onset from escape times")
    sub.add_parser("noise-validate", parents=[common], help="check generated noise against its ADEV")
    ap = sub.add_parser("allan", parents=[common], help="Allan deviation of a frequency trace CSV")
    ap.add_argument("--input", help="CSV file with one fractional frequency per row")
    ap.add_argument("--column", type=int, default=-1, help="column index (default: last)")
    ap.add_argument("--t-cycle", type=float, help="sample spacing in s")
    return p


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            out[key] = v
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config, _overrides(args))
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DomainError, DegenerateStateError) as exc:
        print(f"clockstab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, NumericFault, ArithmeticError) as exc:
        print(f"clockstab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ResourceError, MemoryError) as exc:
        print(f"clockstab: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
