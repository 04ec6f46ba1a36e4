"""Run configuration files, binary snapshots and trace CSV persistence.

The config format is flat key = value text with section headers (INI),
parseable without dependencies from any language.  Snapshots are raw
little-endian float64 payloads behind a fixed header (magic "BO2D1"),
with the conserved integrals in a JSON sidecar; round trips are
bit-exact.  CSV floats are written with 17 significant digits so
identical runs diff identically.
"""

from __future__ import annotations

import configparser
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bo2d.diagnostics import ConservedSet
from bo2d.spectral import SpectralField2D, make_grid

__all__ = [
    "RunConfig",
    "SnapshotFormatError",
    "parse_config",
    "serialize_config",
    "write_snapshot",
    "read_snapshot",
    "TRACE_COLUMNS",
    "format_trace_row",
    "read_trace",
]

SNAPSHOT_MAGIC = b"BO2D1"
SNAPSHOT_VERSION = 1
TRACE_COLUMNS = ("tau", "amax", "xm", "ym", "sigma_ratio", "M", "Px", "Py", "H")


class SnapshotFormatError(ValueError):
    """Snapshot header is malformed or inconsistent with its payload."""


@dataclass
class RunConfig:
    """Everything a simulate command needs, mirroring the config file."""

    nx: int
    ny: int
    lx: float
    ly: float
    t_end: float
    a: float
    sigma_x: float
    sigma_y: float
    dt: float | None = None
    blowup_amp: float | None = None
    tail_frac: float = 0.05
    snapshot_every: int = 50
    dealias: bool = True
    nonlinear: bool = True
    x0: float | None = None  # None -> -Lx/4 (upstream launch point)
    y0: float = 0.0
    out_dir: str = "out"
    snapshot_format: str = "binary"  # binary | none
    seed: int | None = None
    noise_amp: float = 0.0

    def __post_init__(self):
        if self.snapshot_format not in ("binary", "none"):
            raise ValueError(f"unknown snapshot_format {self.snapshot_format!r}")
        if self.noise_amp < 0:
            raise ValueError("noise_amp must be nonnegative")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def serialize_config(cfg: RunConfig) -> str:
    opt = lambda v: "" if v is None else _fmt(v)  # noqa: E731
    lines = [
        "[grid]",
        f"nx = {cfg.nx}",
        f"ny = {cfg.ny}",
        f"lx = {_fmt(cfg.lx)}",
        f"ly = {_fmt(cfg.ly)}",
        "",
        "[sim]",
        f"dt = {opt(cfg.dt)}",
        f"t_end = {_fmt(cfg.t_end)}",
        f"blowup_amp = {opt(cfg.blowup_amp)}",
        f"tail_frac = {_fmt(cfg.tail_frac)}",
        f"snapshot_every = {cfg.snapshot_every}",
        f"dealias = {str(cfg.dealias).lower()}",
        f"nonlinear = {str(cfg.nonlinear).lower()}",
        "",
        "[ic]",
        f"a = {_fmt(cfg.a)}",
        f"sigma_x = {_fmt(cfg.sigma_x)}",
        f"sigma_y = {_fmt(cfg.sigma_y)}",
        f"x0 = {opt(cfg.x0)}",
        f"y0 = {_fmt(cfg.y0)}",
        "",
        "[output]",
        f"dir = {cfg.out_dir}",
        f"snapshot_format = {cfg.snapshot_format}",
        f"seed = {cfg.seed if cfg.seed is not None else ''}",
        f"noise_amp = {_fmt(cfg.noise_amp)}",
        "",
    ]
    return "\n".join(lines)


def parse_config(text_or_path) -> RunConfig:
    """Parse a config file or config text into a RunConfig.

    Raises ValueError (with the offending key) on malformed content.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = text_or_path
    p = Path(str(text_or_path))
    if "\n" not in str(text_or_path) and p.is_file():
        text = p.read_text()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"config parse error: {exc}") from exc

    def need(section, key, conv):
        try:
            return conv(parser.get(section, key))
        except (configparser.Error, ValueError) as exc:
            raise ValueError(f"config error at [{section}] {key}: {exc}") from exc

    def optional(section, key, conv, default=None):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key).strip()
        if raw == "":
            return default
        try:
            return conv(raw)
        except ValueError as exc:
            raise ValueError(f"config error at [{section}] {key}: {exc}") from exc

    as_bool = lambda s: {"true": True, "false": False}[s.strip().lower()]  # noqa: E731
    return RunConfig(
        nx=need("grid", "nx", int),
        ny=need("grid", "ny", int),
        lx=need("grid", "lx", float),
        ly=need("grid", "ly", float),
        dt=optional("sim", "dt", float),
        t_end=need("sim", "t_end", float),
        blowup_amp=optional("sim", "blowup_amp", float),
        tail_frac=optional("sim", "tail_frac", float, 0.05),
        snapshot_every=optional("sim", "snapshot_every", int, 50),
        dealias=optional("sim", "dealias", as_bool, True),
        nonlinear=optional("sim", "nonlinear", as_bool, True),
        a=need("ic", "a", float),
        sigma_x=need("ic", "sigma_x", float),
        sigma_y=need("ic", "sigma_y", float),
        x0=optional("ic", "x0", float),
        y0=optional("ic", "y0", float, 0.0),
        out_dir=optional("output", "dir", str, "out"),
        snapshot_format=optional("output", "snapshot_format", str, "binary"),
        seed=optional("output", "seed", int),
        noise_amp=optional("output", "noise_amp", float, 0.0),
    )


def write_snapshot(path, field: SpectralField2D, tau: float, cons: ConservedSet | None = None) -> None:
    """Binary snapshot: header + row-major float64 samples, bit-exact.

    The conserved integrals go to a `<path>.json` sidecar when given.
    """
    g = field.grid
    vals = np.ascontiguousarray(field.values, dtype="<f8")
    header = SNAPSHOT_MAGIC + struct.pack("<BII3d", SNAPSHOT_VERSION, g.nx, g.ny, g.Lx, g.Ly, tau)
    path = Path(path)
    path.write_bytes(header + vals.tobytes())
    if cons is not None:
        side = {
            "tau": tau,
            "M": cons.M,
            "Px": cons.Px,
            "Py": cons.Py,
            "I1": cons.I1,
            "I2": cons.I2,
            "H": cons.H,
            "py_reliable": cons.py_reliable,
        }
        Path(str(path) + ".json").write_text(json.dumps(side, indent=1))


def read_snapshot(path) -> tuple[float, SpectralField2D]:
    """Read a snapshot back; grid is reconstructed from the header."""
    blob = Path(path).read_bytes()
    hsize = len(SNAPSHOT_MAGIC) + struct.calcsize("<BII3d")
    if len(blob) < hsize or blob[:5] != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"{path}: not a BO2D1 snapshot")
    version, nx, ny, lx, ly, tau = struct.unpack("<BII3d", blob[5:hsize])
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"{path}: unsupported snapshot version {version}")
    expected = nx * ny * 8
    if len(blob) != hsize + expected:
        raise SnapshotFormatError(
            f"{path}: payload is {len(blob) - hsize} bytes, header declares {expected}"
        )
    vals = np.frombuffer(blob[hsize:], dtype="<f8").reshape(nx, ny)
    grid = make_grid(nx, ny, lx, ly)
    return tau, SpectralField2D.from_real(grid, vals.copy())


def format_trace_row(peak, cons) -> str:
    vals = (peak.tau, peak.amax, peak.xm, peak.ym, peak.sigma_ratio, cons.M, cons.Px, cons.Py, cons.H)
    return ",".join(_fmt(v) for v in vals)


def read_trace(path) -> dict[str, np.ndarray]:
    """Load a trace CSV into named column arrays; validates the header."""
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if "tau" not in cols or "amax" not in cols:
            raise ValueError(f"{path}: not a trace CSV (header {header!r})")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(cols):
        raise ValueError(f"{path}: rows have {data.shape[1]} fields, header {len(cols)}")
    return {c: data[:, i] for i, c in enumerate(cols)}
