"""Snapshot persistence, run configuration and report output.

Snapshot layout (all little-endian)::

    b"YMF1" | u32 version = 1 | 4 x u32 dims | f64 spacing | f64 flow_time
    | payload: per site in canonical order, per mu = 0..3, four f64 (w, x, y, z)
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .flow import SCHEMES, FlowParams
from .lattice import NDIM, LatticeGeometry, LinkField
from .observables import ObservableSample
from .seeds import ANTI_SELF_DUAL, SEED_KINDS, SELF_DUAL, SeedSpec, _check_rho, _check_taper

MAGIC = b"YMF1"
VERSION = 1
_HEADER = struct.Struct("<4sI4Idd")
UNIT_TOL = 1e-9


class SnapshotError(ValueError):
    pass


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- snapshots


def encode_snapshot(U: LinkField, flow_time: float) -> bytes:
    g = U.geometry
    header = _HEADER.pack(MAGIC, VERSION, *g.dims, g.spacing, float(flow_time))
    return header + g.to_canonical(U.links).astype("<f8").tobytes()


def decode_snapshot(blob: bytes):
    if len(blob) < _HEADER.size:
        raise SnapshotError("truncated payload: file shorter than the header")
    magic, version, d0, d1, d2, d3, spacing, flow_time = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported version {version}")
    geometry = LatticeGeometry((d0, d1, d2, d3), spacing)
    expected = geometry.n_sites * NDIM * 4 * 8
    payload = blob[_HEADER.size :]
    if len(payload) < expected:
        raise SnapshotError(f"truncated payload: {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise SnapshotError(f"trailing data: {len(payload) - expected} bytes after payload")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(geometry.n_sites, NDIM, 4)
    defect = np.abs(np.sum(flat * flat, axis=-1) - 1.0)
    bad = np.argwhere(~(defect <= UNIT_TOL))
    if bad.size:
        s, mu = bad[0]
        raise SnapshotError(f"non-unit quaternion at site {s}, direction {mu}")
    return LinkField(geometry, geometry.from_canonical(flat)), flow_time


def write_snapshot(U: LinkField, flow_time: float, path) -> None:
    Path(path).write_bytes(encode_snapshot(U, flow_time))


def read_snapshot(path):
    """``(LinkField, flow_time)``; nothing is returned unless the whole file validates."""
    return decode_snapshot(Path(path).read_bytes())


# ---------------------------------------------------------------- CSV / reports


def _csv_value(v):
    if v is None:
        return ""
    return repr(float(v))


class SampleWriter:
    """Append-only CSV with the fixed observable columns; flushed per row."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(ObservableSample.CSV_COLUMNS)
        self._fh.flush()

    def __call__(self, sample: ObservableSample):
        self._w.writerow([_csv_value(v) for v in sample.row()])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_samples(path) -> dict[str, np.ndarray]:
    """Column arrays from a trajectory CSV (empty cells become NaN)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != ObservableSample.CSV_COLUMNS:
        raise ValueError(f"{path}: not a trajectory CSV (unexpected header)")
    cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(rows[0])
    return {
        name: np.array([float(v) if v else np.nan for v in col]) for name, col in zip(rows[0], cols)
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_report(report: dict, path) -> None:
    Path(path).write_text(dump_report(report))


# ---------------------------------------------------------------- run config


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s):
    return int(s, 0)


def _bool(s):
    t = s.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true/false")


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


def _floats(s):
    return tuple(_float(p) for p in s.replace(",", " ").split())


def _quad(s):
    """Four integers, or one repeated in every direction."""
    v = tuple(_int(p) for p in s.replace(",", " ").split())
    if len(v) == 1:
        v = v * NDIM
    if len(v) != NDIM:
        raise ValueError("expected 1 or 4 integers")
    return v


def _pair(s):
    v = _floats(s)
    if len(v) != 2:
        raise ValueError("expected two numbers")
    return v


def _path(s):
    return s


# key -> (parser, default); None means unset.  Lengths in lattice units
# (multiples of the spacing a), times in units of a^2.
SCHEMA = {
    # geometry
    "dims": (_quad, None),
    "spacing": (_float, 1.0),
    "r0": (_float, None),
    # seed
    "seed": (_choice(*SEED_KINDS), None),
    "amplitude": (_float, 0.0),
    "rng_seed": (_int, 0),
    "center": (_quad, (0, 0, 0, 0)),
    "rho": (_float, 2.0),
    "taper_R": (_float, 8.0),
    "orientation": (_choice(SELF_DUAL, ANTI_SELF_DUAL), ANTI_SELF_DUAL),
    "perturb_amplitude": (_float, 0.0),
    "perturb_seed": (_int, 1),
    # flow
    "step": (_float, 0.01),
    "scheme": (_choice(*SCHEMES), "rk3"),
    "t_max": (_float, 1.0),
    "adapt": (_bool, False),
    "c_stab": (_float, 0.05),
    "sample_every": (_float, 0.1),
    "stop_energy": (_float, None),
    "alarm_eps0": (_float, None),
    "alarm_R": (_float, None),
    "snapshot_every": (_float, None),
    # observables and audits
    "scan_eps0": (_float, None),
    "scan_R_grid": (_floats, None),
    "scan_stride": (_int, 1),
    "audit_x0": (_quad, None),
    "audit_R": (_float, None),
    "audit_N": (_float, None),
    "decay_window": (_pair, None),
    # spectral
    "spectral_deflate": (_bool, True),
    "spectral_tol": (_float, 1e-8),
    "spectral_max_iters": (_int, 2000),
    # paths
    "snapshot_in": (_path, None),
    "snapshot_out": (_path, None),
    "csv_out": (_path, None),
    "report_out": (_path, None),
    "snapshot_dir": (_path, None),
}
REQUIRED = ("dims", "seed")


@dataclass
class RunConfig:
    values: dict
    lines: dict = field(default_factory=dict)  # key -> 1-based line, for explicitly set keys

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    def where(self, key) -> str:
        line = self.lines.get(key)
        return f"line {line}: {key}" if line else f"{key} (default)"

    def fail(self, key, message):
        raise ConfigError(f"{self.where(key)}: {message}")

    def require(self, key):
        v = self.values.get(key)
        if v is None:
            raise ConfigError(f"{key}: required but not set")
        return v

    def geometry(self) -> LatticeGeometry:
        return LatticeGeometry(self.dims, self.spacing, self.r0)

    def seed_spec(self) -> SeedSpec:
        return SeedSpec(
            kind=self.seed,
            amplitude=self.amplitude,
            rng_seed=self.rng_seed,
            center=self.center,
            rho=self.rho,
            taper_R=self.taper_R,
            orientation=self.orientation,
        )

    def flow_params(self) -> FlowParams:
        alarm = None
        if self.alarm_eps0 is not None:
            alarm = (self.alarm_eps0, self.alarm_R)
        scan = None
        if self.scan_eps0 is not None:
            scan = (self.scan_eps0, self.scan_R_grid)
        return FlowParams(
            step=self.step,
            scheme=self.scheme,
            t_max=self.t_max,
            adapt=self.adapt,
            c_stab=self.c_stab,
            sample_every=self.sample_every,
            stop_energy=self.stop_energy,
            concentration_alarm=alarm,
            scan=scan,
            scan_stride=self.scan_stride,
            snapshot_every=self.snapshot_every,
        )


def parse_config(text: str) -> RunConfig:
    values = {k: d for k, (_, d) in SCHEMA.items()}
    lines: dict[str, int] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {n}: {key}: unknown key")
        if key in lines:
            raise ConfigError(f"line {n}: {key}: duplicate key (first set on line {lines[key]})")
        if not value:
            raise ConfigError(f"line {n}: {key}: empty value")
        try:
            values[key] = SCHEMA[key][0](value)
        except ValueError as e:
            raise ConfigError(f"line {n}: {key}: cannot parse {value!r} ({e})") from None
        lines[key] = n
    cfg = RunConfig(values, lines)
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def _check(cfg, key, fn):
    try:
        fn()
    except ValueError as e:
        cfg.fail(key, str(e))


def _validate(cfg: RunConfig):
    for key in REQUIRED:
        cfg.require(key)
    _check(cfg, "dims", lambda: LatticeGeometry(cfg.dims, 1.0))
    _check(cfg, "spacing", lambda: LatticeGeometry(cfg.dims, cfg.spacing))
    _check(cfg, "r0", cfg.geometry)
    g = cfg.geometry()
    if cfg.amplitude < 0:
        cfg.fail("amplitude", "must be >= 0")
    if cfg.perturb_amplitude < 0:
        cfg.fail("perturb_amplitude", "must be >= 0")
    if cfg.seed in ("bpst", "grafted"):
        _check(cfg, "rho", lambda: _check_rho(g, cfg.rho))
    if cfg.seed == "grafted":
        _check(cfg, "taper_R", lambda: _check_taper(g, cfg.rho, cfg.taper_R))
    if (cfg.alarm_eps0 is None) != (cfg.alarm_R is None):
        cfg.fail("alarm_R" if cfg.alarm_R is None else "alarm_eps0", "alarm_eps0 and alarm_R go together")
    if (cfg.scan_eps0 is None) != (cfg.scan_R_grid is None):
        cfg.fail("scan_R_grid" if cfg.scan_R_grid is None else "scan_eps0", "scan_eps0 and scan_R_grid go together")
    if cfg.scan_R_grid is not None:
        grid = cfg.scan_R_grid
        if not grid or list(grid) != sorted(grid) or grid[0] <= 0 or grid[-1] > g.ball_radius_cap:
            cfg.fail("scan_R_grid", f"needs ascending radii in (0, R0 = {g.ball_radius_cap}]")
    if cfg.scan_stride < 1:
        cfg.fail("scan_stride", "must be >= 1")
    if cfg.audit_N is not None and cfg.audit_N <= 1:
        cfg.fail("audit_N", "must be > 1")
    if cfg.audit_R is not None and not 0 < cfg.audit_R <= g.ball_radius_cap:
        cfg.fail("audit_R", f"must lie in (0, R0 = {g.ball_radius_cap}]")
    if cfg.spectral_tol <= 0:
        cfg.fail("spectral_tol", "must be > 0")
    if cfg.spectral_max_iters < 1:
        cfg.fail("spectral_max_iters", "must be >= 1")
    try:
        cfg.flow_params().validate(g.spacing)
    except ValueError as e:
        # FlowParams messages start with the offending field name
        msg = str(e)
        key = next((k for k in ("snapshot_every", "sample_every", "t_max", "step") if msg.startswith(k)), "step")
        if "concentration_alarm" in msg:
            key = "alarm_eps0"
        cfg.fail(key, msg)
