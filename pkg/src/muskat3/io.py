"""Run configuration, CSV writers and the versioned snapshot format."""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .errors import ConfigError, InterfaceCollision, WindowViolation
from .evolution import SimulationRecord, Snapshot, StepperConfig
from .grid import Grid
from .state import FluidParams, InterfaceState

SNAPSHOT_MAGIC = b"M3SNAP\x00\x00"
SNAPSHOT_VERSION = 1

DEFAULTS = {
    "units": "nondimensional",
    "seed": 0,
    "fluid": {
        "rho": [1.0, 2.0, 3.0],
        "mu": [1.0, 1.0, 1.0],
        "permeability": 1.0,
        "gravity": 1.0,
        "c_inf": 1.0,
        "allow_rt_unstable": False,
    },
    "grid": {"L": 40.0, "N": 512, "dx": None},
    "initial": {"f": [], "h": []},
    "stepper": {
        "t_end": 1.0, "rtol": 1e-6, "atol": 1e-10, "cfl_safety": 0.9,
        "dt_init": 1e-2, "dt_min": 1e-10, "dt_max": 1.0,
        "monitor_every": 1, "snapshot_every": 10, "gap_min": None, "track_mode": None,
        "window_tol": 1e-2, "allow_rt_unstable": False,
    },
    "output": {"dir": "run"},
    "verify": {"n_random": 3, "omega": "random", "n_probes": 100},
    "dispersion": {"k": [], "k_min": 0.0, "k_max": 10.0, "n_k": 101},
    "field": {"x_min": -4.0, "x_max": 4.0, "y_min": -2.0, "y_max": 3.0, "nx": 9, "ny": 11, "points": []},
}

FAMILIES = ("gaussian-bump", "cosine-mode", "file")


# ------------------------------------------------------------------ config

def _merge(base, extra, path=""):
    for key, val in extra.items():
        full = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError("unknown key", field=full)
        if isinstance(base[key], dict) and not isinstance(val, dict):
            raise ConfigError("expected a table", field=full)
        if isinstance(base[key], dict) and key != "initial":
            _merge(base[key], val, full)
        else:
            base[key] = val


def _parse_value(text):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_override(cfg, assignment):
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError("unknown key", field=key.strip())
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError("unknown key", field=key.strip())
    node[parts[-1]] = _parse_value(text.strip())


def load_config(path=None, overrides=()):
    """Read a TOML file (optional), merge onto defaults, apply ``key=value`` overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc
        _merge(cfg, raw)
        cfg["_base_dir"] = str(Path(path).resolve().parent)
    for item in overrides:
        apply_override(cfg, item)
    return cfg


def digest(cfg) -> str:
    """sha256 of the canonical JSON of everything except output locations."""
    body = {k: v for k, v in cfg.items() if k not in ("output", "_base_dir")}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _num(cfg, section, key, positive=False, integer=False):
    val = cfg[section][key]
    name = f"{section}.{key}"
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", field=name)
    if integer and int(val) != val:
        raise ConfigError(f"expected an integer, got {val!r}", field=name)
    if not np.isfinite(val):
        raise ConfigError("must be finite", field=name)
    if positive and val <= 0:
        raise ConfigError(f"must be positive, got {val!r}", field=name)
    return int(val) if integer else float(val)


def build_grid(cfg) -> Grid:
    L = _num(cfg, "grid", "L", positive=True)
    N = _num(cfg, "grid", "N", positive=True, integer=True)
    if N < 16 or N % 2:
        raise ConfigError(f"must be an even integer >= 16, got {N}", field="grid.N")
    extra = set(cfg["grid"]) - {"L", "N", "dx"}
    if extra:
        raise ConfigError("unknown key", field=f"grid.{sorted(extra)[0]}")
    if cfg["grid"].get("dx") is not None:
        dx = _num(cfg, "grid", "dx", positive=True)
        if abs(dx - 2 * L / N) > 1e-12 * dx:
            raise ConfigError(f"mismatched grid: dx = {dx} but 2L/N = {2 * L / N}", field="grid.dx")
    return Grid(L, N)


def build_params(cfg) -> FluidParams:
    fl = cfg["fluid"]
    for key in ("rho", "mu"):
        v = fl[key]
        if not isinstance(v, list) or len(v) != 3:
            raise ConfigError("expected a list of three numbers", field=f"fluid.{key}")
        for i, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not np.isfinite(x) or x <= 0:
                raise ConfigError(f"entry {i} must be a positive number, got {x!r}", field=f"fluid.{key}")
    for key in ("permeability", "gravity", "c_inf"):
        _num(cfg, "fluid", key, positive=True)
    if cfg["units"] not in ("SI", "nondimensional"):
        raise ConfigError("must be 'SI' or 'nondimensional'", field="units")
    p = FluidParams(rho1=fl["rho"][0], rho2=fl["rho"][1], rho3=fl["rho"][2],
                    mu1=fl["mu"][0], mu2=fl["mu"][1], mu3=fl["mu"][2],
                    k=fl["permeability"], g=fl["gravity"], c_inf=fl["c_inf"])
    if not p.stably_stratified and not fl["allow_rt_unstable"]:
        raise ConfigError(
            f"densities must satisfy rho3 > rho2 > rho1 (got {fl['rho']}); the flat state violates "
            f"the Rayleigh-Taylor condition (theta1 = {p.theta1:.4g}, theta2 = {p.theta2:.4g}). "
            "Set fluid.allow_rt_unstable = true to run anyway", field="fluid.rho")
    return p


def build_stepper(cfg) -> StepperConfig:
    st = cfg["stepper"]
    kw = {}
    for key in ("t_end", "rtol", "atol", "cfl_safety", "dt_init", "dt_min", "dt_max", "window_tol"):
        kw[key] = _num(cfg, "stepper", key)
    for key in ("monitor_every", "snapshot_every"):
        kw[key] = _num(cfg, "stepper", key, integer=True)
    if st.get("gap_min") is not None:
        kw["gap_min"] = _num(cfg, "stepper", "gap_min", positive=True)
    kw["allow_rt_unstable"] = bool(st["allow_rt_unstable"])
    if st.get("track_mode") is not None:
        kw["track_mode"] = _num(cfg, "stepper", "track_mode", positive=True, integer=True)
    try:
        return StepperConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc), field="stepper") from exc


def _component(grid, comp, where, base_dir):
    if not isinstance(comp, dict):
        raise ConfigError("expected a table", field=where)
    fam = comp.get("family")
    if fam not in FAMILIES:
        raise ConfigError(f"family must be one of {FAMILIES}, got {fam!r}", field=f"{where}.family")
    x = grid.x
    amp = float(comp.get("amplitude", 0.0))
    center = float(comp.get("center", 0.0))
    if fam == "gaussian-bump":
        width = float(comp.get("width", 1.0))
        if width <= 0:
            raise ConfigError("must be positive", field=f"{where}.width")
        return amp * np.exp(-((x - center) / width) ** 2)
    if fam == "cosine-mode":
        if "mode" in comp:
            mode = comp["mode"]
            if int(mode) != mode or mode < 0 or mode >= grid.N // 2:
                raise ConfigError(f"mode must be an integer in [0, {grid.N // 2})", field=f"{where}.mode")
            k = np.pi * mode / grid.L
        else:
            k = float(comp.get("wavenumber", 0.0))
        vals = amp * np.cos(k * (x - center))
        if "window" in comp:
            vals = vals * np.exp(-(x / float(comp["window"])) ** 2)
        return vals
    path = Path(comp.get("path", ""))
    if not path.is_absolute() and base_dir:
        path = Path(base_dir) / path
    try:
        vals = np.loadtxt(path, dtype=float, ndmin=1)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read samples: {exc}", field=f"{where}.path") from exc
    if vals.shape != (grid.N,):
        raise ConfigError(f"mismatched grid: file has {vals.size} samples, grid has N = {grid.N}",
                          field=f"{where}.path")
    return float(comp.get("scale", 1.0)) * vals


def build_initial(cfg, grid, params) -> InterfaceState:
    init = cfg["initial"]
    extra = set(init) - {"f", "h"}
    if extra:
        raise ConfigError("unknown key", field=f"initial.{sorted(extra)[0]}")
    prof = {}
    for name in ("f", "h"):
        comps = init.get(name, [])
        if isinstance(comps, dict):
            comps = [comps]
        vals = np.zeros(grid.N)
        for i, comp in enumerate(comps):
            vals = vals + _component(grid, comp, f"initial.{name}[{i}]", cfg.get("_base_dir"))
        prof[name] = vals
    try:
        return InterfaceState(grid, params, prof["f"], prof["h"])
    except WindowViolation as exc:
        raise ConfigError(str(exc), field="initial") from exc
    except InterfaceCollision as exc:
        raise ConfigError(str(exc), field="initial") from exc
    except ValueError as exc:
        raise ConfigError(str(exc), field="initial") from exc


@dataclass
class Run:
    cfg: dict
    grid: Grid
    params: FluidParams
    stepper: StepperConfig
    X0: InterfaceState
    digest: str


def prepare(cfg) -> Run:
    grid = build_grid(cfg)
    params = build_params(cfg)
    stepper = build_stepper(cfg)
    X0 = build_initial(cfg, grid, params)
    return Run(cfg, grid, params, stepper, X0, digest(cfg))


# ----------------------------------------------------------------- outputs

def fmt(x) -> str:
    """Shortest round-tripping decimal representation."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def header_lines(params: FluidParams, cfg_digest: str):
    d = params.derived()
    return [
        f"# muskat3 {__version__}",
        "# " + " ".join(f"{k}={fmt(v)}" for k, v in d.items()),
        f"# config_sha256={cfg_digest}",
    ]


def write_csv(path, columns, rows, header=()):
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if v is None else (v if isinstance(v, str) else fmt(v)) for v in row])


def read_csv(path):
    """Return (columns, rows as lists of strings), skipping '#' header lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    r = list(csv.reader(lines))
    return r[0], r[1:]


def write_records(path, records, params, cfg_digest):
    cols = list(SimulationRecord.FIELDS)
    rows = [[getattr(rec, c) for c in cols] for rec in records]
    write_csv(path, cols, rows, header_lines(params, cfg_digest))


def write_metadata(path, run: Run, extra=None):
    meta = {
        "version": __version__,
        "config_sha256": run.digest,
        "units": run.cfg["units"],
        "derived": {k: fmt(v) for k, v in run.params.derived().items()},
        "m_constant": fmt(run.params.m_constant()),
        "grid": {"L": fmt(run.grid.L), "N": run.grid.N, "dx": fmt(run.grid.dx)},
        "snapshot_format_version": SNAPSHOT_VERSION,
    }
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------- snapshots

def snapshot_bytes(s: Snapshot) -> bytes:
    n = int(np.asarray(s.f).size)
    header = {
        "format_version": SNAPSHOT_VERSION,
        "n": n,
        "time": float(s.time).hex(),
        "step": int(s.step),
        "dt_next": float(s.dt_next).hex(),
        "err_prev": float(s.err_prev).hex(),
        "config_digest": s.config_digest,
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.asarray(a, dtype="<f8").tobytes() for a in (s.f, s.h, s.w1, s.w2))
    return SNAPSHOT_MAGIC + struct.pack("<II", SNAPSHOT_VERSION, len(hb)) + hb + body


def snapshot_from_bytes(data: bytes) -> Snapshot:
    if len(data) < 16 or data[:8] != SNAPSHOT_MAGIC:
        raise ValueError("not a snapshot file (bad magic)")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"snapshot format version {version} is not supported (expected {SNAPSHOT_VERSION})")
    header = json.loads(data[16:16 + hlen].decode())
    if not isinstance(header, dict) or header.get("format_version") != version:
        raise ValueError("snapshot header version mismatch")
    missing = {"n", "time", "step", "dt_next", "err_prev", "config_digest"} - set(header)
    if missing:
        raise ValueError(f"snapshot header lacks {sorted(missing)}")
    n = int(header["n"])
    body = data[16 + hlen:]
    if len(body) != 4 * 8 * n:
        raise ValueError(f"snapshot body has {len(body)} bytes, expected {32 * n}")
    arrs = [np.frombuffer(body[i * 8 * n:(i + 1) * 8 * n], dtype="<f8").astype(float) for i in range(4)]
    return Snapshot(
        time=float.fromhex(header["time"]), step=int(header["step"]),
        f=arrs[0], h=arrs[1], w1=arrs[2], w2=arrs[3],
        dt_next=float.fromhex(header["dt_next"]), err_prev=float.fromhex(header["err_prev"]),
        config_digest=header["config_digest"],
    )


def save_snapshot(path, s: Snapshot):
    Path(path).write_bytes(snapshot_bytes(s))


def load_snapshot(path) -> Snapshot:
    return snapshot_from_bytes(Path(path).read_bytes())


def snapshot_name(step: int) -> str:
    return f"snap_{step:08d}.m3s"
