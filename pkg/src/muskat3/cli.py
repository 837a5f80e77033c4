"""Command-line entry point: ``muskat3 {simulate,resume,verify,dispersion,field}``.

Exit codes
  0   success (simulation reached t_end, all checks passed)
  1   verify: at least one check failed
  2   configuration, usage or input-file error
  3   unexpected internal error
  10  Rayleigh-Taylor violation
  11  interface collision
  12  window violation
  13  density equation not invertible
  14  step size underflow (stiffness)
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, io, linear, verify
from .errors import ConfigError, MuskatError
from .evolution import simulate
from .fields import REGION_NAMES, FieldEvaluator
from .state import InterfaceState, VorticityDensity

log = logging.getLogger("muskat3")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


def _load(args):
    return io.load_config(args.config, args.set or ())


def _out_dir(cfg, override, sub=None):
    if override:
        d = Path(override)
    else:
        d = Path(cfg["output"]["dir"])
        if sub:
            d = d / sub
    d.mkdir(parents=True, exist_ok=True)
    return d


def _run_simulation(run, out, start=None):
    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)

    def save(s):
        io.save_snapshot(snapdir / io.snapshot_name(s.step), s)

    res = simulate(run.X0, run.stepper, start=start, digest=run.digest, on_snapshot=save)
    io.write_records(out / "records.csv", res.records, run.params, run.digest)
    io.write_metadata(out / "metadata.json", run, {
        "event": res.event.name,
        "exit_code": int(res.event),
        "message": res.message,
        "steps": res.final.step if res.final is not None else 0,
        "final_time": io.fmt(res.final.time) if res.final is not None else "0.0",
        "resumed_from_step": None if start is None else start.step,
    })
    print(f"{res.event.name}: {res.message} (records: {out / 'records.csv'})")
    return int(res.event)


def cmd_simulate(args):
    cfg = _load(args)
    run = io.prepare(cfg)
    out = _out_dir(cfg, args.out)
    return _run_simulation(run, out)


def _read_snapshot(path):
    try:
        return io.load_snapshot(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"unreadable snapshot {path}: {exc}", field="snapshot") from exc


def cmd_resume(args):
    cfg = _load(args)
    run = io.prepare(cfg)
    snap = _read_snapshot(args.snapshot)
    if snap.config_digest != run.digest:
        raise ConfigError("snapshot was written under a different configuration "
                          f"({snap.config_digest[:12]} vs {run.digest[:12]})", field="snapshot")
    if snap.f.size != run.grid.N:
        raise ConfigError(f"snapshot has {snap.f.size} nodes, grid has N = {run.grid.N}", field="snapshot")
    out = _out_dir(cfg, args.out, "resume")
    return _run_simulation(run, out, start=snap)


def cmd_verify(args):
    cfg = _load(args)
    grid = io.build_grid(cfg)
    params = io.build_params(cfg)
    io.build_initial(cfg, grid, params)
    v = cfg["verify"]
    if v["omega"] not in ("random", "solve", "zero"):
        raise ConfigError("must be 'random', 'solve' or 'zero'", field="verify.omega")
    opts = {"seed": int(cfg["seed"]), "omega": v["omega"], "n_probes": int(v["n_probes"])}
    if args.n_random is not None:
        opts["n_random"] = args.n_random
    elif "n_random" in v:
        opts["n_random"] = int(v["n_random"])
    checks = verify.run_suite(args.suite, grid, params, **opts)
    print(verify.format_table(checks))
    failed = [c for c in checks if not c.passed]
    for c in failed:
        print(f"FAILED: {c.suite}: {c.name} (measured {c.measured:.3e} > tol {c.tol:.1e})", file=sys.stderr)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _k_values(cfg):
    d = cfg["dispersion"]
    ks = d["k"]
    if ks:
        if not isinstance(ks, list):
            raise ConfigError("expected a non-empty list of wavenumbers", field="dispersion.k")
        ks = np.array([float(k) for k in ks])
    else:
        n = io._num(cfg, "dispersion", "n_k", positive=True, integer=True)
        ks = np.linspace(io._num(cfg, "dispersion", "k_min"), io._num(cfg, "dispersion", "k_max"), n)
    if not np.all(np.isfinite(ks)) or np.any(ks < 0):
        raise ConfigError("wavenumbers must be finite and non-negative", field="dispersion")
    return ks


def cmd_dispersion(args):
    cfg = _load(args)
    params = io.build_params(cfg)
    ks = _k_values(cfg)
    rows = []
    for k in ks:
        d = linear.dispersion_matrix(k, params)
        lam = np.asarray(d.eigenvalues, dtype=complex)
        rows.append([k, d.M[0, 0], d.M[0, 1], d.M[1, 0], d.M[1, 1],
                     lam[0].real, lam[0].imag, lam[1].real, lam[1].imag])
    path = Path(args.out) if args.out else _out_dir(cfg, None) / "dispersion.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    io.write_csv(path, ["k", "M11", "M12", "M21", "M22", "lam1_re", "lam1_im", "lam2_re", "lam2_im"],
                 rows, io.header_lines(params, io.digest(cfg)))
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_field(args):
    cfg = _load(args)
    grid = io.build_grid(cfg)
    params = io.build_params(cfg)
    snap = _read_snapshot(args.snapshot)
    if snap.f.size != grid.N:
        raise ConfigError(f"snapshot has {snap.f.size} nodes, grid has N = {grid.N}", field="snapshot")
    X = InterfaceState(grid, params, snap.f, snap.h, validate=False)
    if not X.gap > 0:
        raise ConfigError("snapshot interfaces touch or cross", field="snapshot")
    ev = FieldEvaluator(X, VorticityDensity(snap.w1, snap.w2))
    fc = cfg["field"]
    nx = io._num(cfg, "field", "nx", positive=True, integer=True)
    ny = io._num(cfg, "field", "ny", positive=True, integer=True)
    xs = np.linspace(io._num(cfg, "field", "x_min"), io._num(cfg, "field", "x_max"), nx)
    ys = np.linspace(io._num(cfg, "field", "y_min"), io._num(cfg, "field", "y_max"), ny)
    if fc["points"]:
        pts = [(float(p[0]), float(p[1])) for p in fc["points"]]
    else:
        pts = [(x, y) for y in ys for x in xs]
    px = np.array([p[0] for p in pts])
    py = np.array([p[1] for p in pts])
    regions = ev.classify(px, py)
    rows = []
    for (x, y), reg in zip(pts, regions):
        reg = int(reg)
        if reg == 0:
            rows.append([x, y, None, None, None, REGION_NAMES[0], None])
            continue
        v1, v2 = ev.velocity_at([x], [y], check=False)
        p = ev.pressure_at(reg, x, y, check=False)
        rows.append([x, y, v1[0], v2[0], p, REGION_NAMES[reg], ev.darcy_residual(reg, x, y)])
    path = Path(args.out) if args.out else _out_dir(cfg, None) / "field.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    io.write_csv(path, ["x", "y", "v1", "v2", "p", "region", "darcy_residual"], rows,
                 io.header_lines(params, io.digest(cfg)))
    print(f"wrote {len(rows)} probes to {path}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="muskat3", description=__doc__.splitlines()[0],
                                 epilog="\n".join(__doc__.splitlines()[2:]),
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"muskat3 {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("config", help="TOML run configuration")
        else:
            p.add_argument("config", nargs="?", default=None, help="TOML run configuration (defaults if omitted)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config value, e.g. --set grid.N=256 (repeatable)")

    p = sub.add_parser("simulate", help="integrate the interfaces in time")
    common(p)
    p.add_argument("--out", help="output directory (default: output.dir)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("resume", help="continue a run from a snapshot")
    common(p)
    p.add_argument("snapshot")
    p.add_argument("--out", help="output directory (default: output.dir/resume)")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("verify", help="run an identity battery")
    common(p, config_required=False)
    p.add_argument("--suite", default="all", choices=verify.SUITES + ("all",))
    p.add_argument("--n-random", type=int, default=None, help="number of randomized states per suite")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dispersion", help="tabulate the flat-state growth matrix")
    common(p, config_required=False)
    p.add_argument("--out", help="CSV path (default: output.dir/dispersion.csv)")
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("field", help="velocity and pressure on a probe grid")
    common(p)
    p.add_argument("snapshot")
    p.add_argument("--out", help="CSV path (default: output.dir/field.csv)")
    p.set_defaults(func=cmd_field)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MuskatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # keep tracebacks away from users unless asked for
        if args.verbose:
            log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
