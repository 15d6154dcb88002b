"""Command-line driver: ``ymflow {seed,flow,analyze,spectrum}``.

Exit codes: 0 success, 1 usage, 2 validation (bad config, missing or corrupt
input), 3 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .flow import FlowError, FlowState, run_flow
from .observables import (
    concentration_scan,
    cutoff_energy_audit,
    decay_fit,
    energy_formula_audit,
    fp_norm2_nonconstant,
    measure,
)
from .seeds import perturb
from .spectral import poincare_estimate

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def thread_count() -> int:
    """Value of YMFLOW_THREADS (default 1); the numpy kernels are deterministic at any value."""
    raw = os.environ.get("YMFLOW_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"YMFLOW_THREADS: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"YMFLOW_THREADS: expected a positive integer, got {raw!r}")
    return n


def _config(path):
    if not Path(path).is_file():
        raise ValidationError(f"config: file not found: {path}")
    return io.load_config(path)


def _snapshot(path, key):
    if path is None:
        raise ValidationError(f"{key}: snapshot path not set")
    if not Path(path).is_file():
        raise ValidationError(f"{key}: snapshot file not found: {path}")
    try:
        return io.read_snapshot(path)
    except io.SnapshotError as e:
        raise ValidationError(f"{key}: {path}: {e}") from None


def _emit(report, path):
    if path:
        io.write_report(report, path)
    else:
        sys.stdout.write(io.dump_report(report))


def _window(text):
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"--decay-window expects 'start,end', got {text!r}") from None
    return lo, hi


def _seeded_field(cfg):
    U = cfg.seed_spec().build(cfg.geometry())
    if cfg.perturb_amplitude > 0:
        U = perturb(U, cfg.perturb_amplitude, cfg.perturb_seed)
    return U


def cmd_seed(args):
    cfg = _config(args.config)
    out = args.out or cfg.snapshot_out
    if out is None:
        raise ValidationError("snapshot_out: output path not set")
    io.write_snapshot(_seeded_field(cfg), 0.0, out)
    return EXIT_OK


def cmd_flow(args):
    cfg = _config(args.config)
    params = cfg.flow_params()
    src = args.snapshot or cfg.snapshot_in
    if src is not None:
        U, t0 = _snapshot(src, "snapshot_in")
        if U.geometry.dims != cfg.geometry().dims:
            raise ValidationError(f"snapshot_in: lattice {U.geometry.dims} does not match dims {cfg.dims}")
    else:
        U, t0 = _seeded_field(cfg), 0.0
    csv_path = args.csv or cfg.csv_out
    if csv_path is None:
        raise ValidationError("csv_out: trajectory path not set")
    if params.snapshot_every is not None and cfg.snapshot_dir is None:
        raise ValidationError("snapshot_dir: required when snapshot_every is set")
    try:
        with io.SampleWriter(csv_path) as sink:
            traj = run_flow(FlowState(U, t0), params, sink=sink)
    except FlowError as e:
        if cfg.snapshot_dir:
            Path(cfg.snapshot_dir).mkdir(parents=True, exist_ok=True)
            io.write_snapshot(e.state.U.renormalized(), e.state.t, Path(cfg.snapshot_dir) / "failed.ymf")
        raise
    if cfg.snapshot_dir:
        d = Path(cfg.snapshot_dir)
        d.mkdir(parents=True, exist_ok=True)
        for i, (t, V) in enumerate(traj.snapshots):
            io.write_snapshot(V, t, d / f"snap_{i:05d}.ymf")
    if cfg.snapshot_out:
        io.write_snapshot(traj.final.U, traj.final.t, cfg.snapshot_out)
    print(f"{traj.reason}: t = {traj.final.t:.6g} after {traj.final.step_count} steps", file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args):
    cfg = _config(args.config) if args.config else None
    snaps = sorted((_snapshot(p, "snapshot") for p in args.snapshots), key=lambda s: s[1])
    report = {"snapshots": []}
    for U, t in snaps:
        s = measure(U, t)
        entry = {
            "t": t,
            "F_norm2": s.F_norm2,
            "Fp_norm2": s.Fp_norm2,
            "Fm_norm2": s.Fm_norm2,
            "Q": s.Q,
            "max_density": s.max_density,
            "max_density_p": s.max_density_p,
            "energy_formula_residual": energy_formula_audit(U),
            "Fp_norm2_nonconstant": fp_norm2_nonconstant(U),
        }
        if cfg is not None and cfg.scan_eps0 is not None:
            hit = concentration_scan(U, cfg.scan_eps0, cfg.scan_R_grid, stride=cfg.scan_stride)
            entry["concentration"] = None if hit is None else {
                "radius": hit.radius, "center": list(hit.center), "energy": hit.energy
            }
        report["snapshots"].append(entry)

    if cfg is not None and cfg.audit_R is not None and len(snaps) >= 2:
        x0 = cfg.audit_x0 or (0, 0, 0, 0)
        audit = cutoff_energy_audit([(t, U) for U, t in snaps], x0, cfg.audit_R, cfg.audit_N or 4.0)
        report["cutoff_audit"] = vars(audit)

    window = _window(args.decay_window) if args.decay_window else (cfg.decay_window if cfg else None)
    if window is not None:
        series = {}
        if args.trajectory:
            cols = io.read_samples(args.trajectory)
            series = {k: (cols["t"], cols[k]) for k in ("Fp_norm2", "max_density_p", "F_norm2")}
        elif snaps:
            ts = np.array([e["t"] for e in report["snapshots"]])
            series = {k: (ts, np.array([e[k] for e in report["snapshots"]])) for k in ("Fp_norm2_nonconstant", "Fp_norm2")}
        fits = {}
        for name, (t, v) in series.items():
            try:
                fit = decay_fit(t, v, window)
                fits[name] = {"lambda": fit.rate, "intercept": fit.intercept, "r_squared": fit.r_squared, "window": list(fit.window)}
            except ValueError as e:
                fits[name] = {"error": str(e)}
        report["decay"] = fits
    _emit(report, args.report or (cfg.report_out if cfg else None))
    return EXIT_OK


def cmd_spectrum(args):
    cfg = _config(args.config) if args.config else None
    U, t = _snapshot(args.snapshot, "snapshot")
    deflate = cfg.spectral_deflate if cfg else True
    if args.no_deflate:
        deflate = False
    tol = args.tol or (cfg.spectral_tol if cfg else 1e-8)
    iters = args.max_iters or (cfg.spectral_max_iters if cfg else 2000)
    res = poincare_estimate(U, deflate_constants=deflate, tol=tol, max_iters=iters)
    report = {"t": t, "deflate_constants": deflate, **res.report()}
    _emit(report, args.report or (cfg.report_out if cfg else None))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ymflow", description="SU(2) Yang-Mills gradient flow on the lattice 4-torus")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("seed", help="build the configured initial field and write a snapshot")
    s.add_argument("config")
    s.add_argument("--out", help="snapshot path (overrides snapshot_out)")
    s.set_defaults(func=cmd_seed)

    f = sub.add_parser("flow", help="integrate the flow, writing a trajectory CSV")
    f.add_argument("config")
    f.add_argument("--snapshot", help="start field (overrides snapshot_in)")
    f.add_argument("--csv", help="trajectory path (overrides csv_out)")
    f.set_defaults(func=cmd_flow)

    a = sub.add_parser("analyze", help="audit snapshots and fit decay rates")
    a.add_argument("snapshots", nargs="*")
    a.add_argument("--config")
    a.add_argument("--trajectory", help="trajectory CSV for decay fits")
    a.add_argument("--decay-window", help="fit window 'start,end' in units of a^2")
    a.add_argument("--report", help="JSON output path (default stdout)")
    a.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("spectrum", help="estimate the self-dual Poincare constant")
    sp.add_argument("snapshot")
    sp.add_argument("--config")
    sp.add_argument("--no-deflate", action="store_true")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--max-iters", type=int)
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_spectrum)
    return p


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        thread_count()
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, io.ConfigError, io.SnapshotError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:  # noqa: BLE001 - every other failure is a runtime error
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run_cli())
