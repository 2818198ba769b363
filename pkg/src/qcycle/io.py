"""Flat ``key = value`` configuration files and CSV result files."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .harness import SAMPLE_EVERY, ScanResult, ScanSpec, TrajectoryResult
from .params import ModelParams, ParamError

SCAN_CSV_HEADER = "param,qy_mean,qy_std,ne_mean,ne_std,np_mean,np_std,Q,eta"
TRAJECTORY_CSV_HEADER = "t_us,x_nm,n1,n2,N1,N2,nL,nH,nA,nB,ne,Np"

DEFAULT_GRIDS = {
    "delta_mu": [50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0],
    "delta_V": [160.0, 200.0, 240.0, 280.0, 320.0, 360.0],
    "temperature": [250.0 + 10.0 * i for i in range(11)],
}

_STRING_FIELDS = {f.name for f in dataclasses.fields(ModelParams) if f.type in (str, "str")}
_FLOAT_FIELDS = {f.name for f in dataclasses.fields(ModelParams)} - _STRING_FIELDS
_SCAN_KEYS = ("scan.variable", "scan.grid", "scan.scheme", "scan.trajectories",
              "scan.t_end", "scan.dt", "seed", "sample_every")


class ConfigError(ValueError):
    def __init__(self, key: str | None, line: int | None, message: str):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{key + ': ' if key else ''}{message}")
        self.key = key
        self.line = line


@dataclass
class RunConfig:
    params: ModelParams
    scan: ScanSpec | None
    seed: int = 0
    sample_every: int = SAMPLE_EVERY
    trajectories: int = 6
    t_end: float = 100.0


def _number(key, raw, line):
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(key, line, f"malformed number {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(key, line, f"non-finite number {raw!r}")
    return value


def _integer(key, raw, line):
    value = _number(key, raw, line)
    if value != int(value):
        raise ConfigError(key, line, f"expected an integer, got {raw!r}")
    return int(value)


def parse_config(text: str) -> RunConfig:
    """Parse a config merged over the default parameter set.

    Unknown keys, malformed numbers and out-of-domain values raise
    :class:`ConfigError` naming the key and line.
    """
    values: dict[str, tuple[str, int]] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(None, lineno, f"expected 'key = value', got {raw_line.strip()!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FLOAT_FIELDS and key not in _STRING_FIELDS and key not in _SCAN_KEYS:
            raise ConfigError(key, lineno, "unknown key")
        if key in values:
            raise ConfigError(key, lineno, "duplicate key")
        values[key] = (raw, lineno)

    fields = {}
    for key, (raw, lineno) in values.items():
        if key in _FLOAT_FIELDS:
            fields[key] = _number(key, raw, lineno)
        elif key in _STRING_FIELDS:
            fields[key] = raw
    try:
        params = ModelParams(**fields)
    except ParamError as exc:
        raise ConfigError(exc.name, values.get(exc.name, (None, None))[1], str(exc)) from None

    def get(key, conv, default):
        if key not in values:
            return default
        raw, lineno = values[key]
        return conv(key, raw, lineno)

    seed = get("seed", _integer, 0)
    sample_every = get("sample_every", _integer, SAMPLE_EVERY)
    if sample_every < 1:
        raise ConfigError("sample_every", values["sample_every"][1], "must be at least 1")
    trajectories = get("scan.trajectories", _integer, 6)
    t_end = get("scan.t_end", _number, 100.0)
    scan = None
    if "scan.variable" in values:
        variable, lineno = values["scan.variable"]
        if variable not in DEFAULT_GRIDS:
            raise ConfigError("scan.variable", lineno, f"unknown scan variable {variable!r}")
        if "scan.grid" in values:
            raw, lineno_g = values["scan.grid"]
            grid = [_number("scan.grid", g, lineno_g) for g in raw.split(",") if g.strip()]
        else:
            grid = list(DEFAULT_GRIDS[variable])
        scheme = values.get("scan.scheme", ("III", None))[0]
        try:
            scan = ScanSpec(variable, grid, scheme=scheme, trajectories=trajectories,
                            t_end=t_end, dt=get("scan.dt", _number, params.dt), seed=seed,
                            sample_every=sample_every)
        except ValueError as exc:
            raise ConfigError("scan", None, str(exc)) from None
    else:
        for key in ("scan.grid", "scan.scheme"):
            if key in values:
                raise ConfigError(key, values[key][1], "given without scan.variable")
    if "scan.dt" in values:
        params = params.replace(dt=get("scan.dt", _number, params.dt))
    return RunConfig(params, scan, seed, sample_every, trajectories, t_end)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    value = float(value)
    return "" if math.isnan(value) else repr(value)


def emit_config(params: ModelParams, scan: ScanSpec | None = None, seed: int | None = None,
                sample_every: int | None = None) -> str:
    """Render a config file that :func:`parse_config` reads back exactly."""
    lines = [f"{name} = {_fmt(value)}" for name, value in dataclasses.asdict(params).items()]
    if scan is not None:
        lines += [
            f"scan.variable = {scan.variable}",
            "scan.grid = " + ", ".join(repr(float(g)) for g in scan.grid),
            f"scan.scheme = {scan.scheme}",
            f"scan.trajectories = {scan.trajectories}",
            f"scan.t_end = {scan.t_end!r}",
            f"scan.dt = {scan.dt!r}",
        ]
        seed = scan.seed if seed is None else seed
        sample_every = scan.sample_every if sample_every is None else sample_every
    if seed is not None:
        lines.append(f"seed = {seed}")
    if sample_every is not None:
        lines.append(f"sample_every = {sample_every}")
    return "\n".join(lines) + "\n"


def scan_rows(result: ScanResult) -> list[list[float]]:
    return [[p.param, p.qy_mean, p.qy_std, p.ne_mean, p.ne_std, p.np_mean, p.np_std,
             p.Q_mean, p.eta_mean] for p in result.points]


def write_scan_csv(result: ScanResult, path) -> None:
    """One row per grid point; undefined QY-derived values are left empty."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SCAN_CSV_HEADER + "\n")
        for row in scan_rows(result):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_trajectory_csv(result: TrajectoryResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(TRAJECTORY_CSV_HEADER + "\n")
        for row in result.samples[:, :12]:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read either CSV kind back; empty fields become NaN."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [[float(v) if v else math.nan for v in line.split(",")] for line in lines[1:]]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def plot_script(csv_name: str, kind: str) -> str:
    """A gnuplot script for a scan or trajectory CSV."""
    if kind == "scan":
        body = (f"set xlabel 'scanned parameter'\nset ylabel 'QY'\n"
                f"plot '{csv_name}' using 1:2:3 with yerrorlines title 'QY'\n")
    else:
        body = (f"set xlabel 't (us)'\nset multiplot layout 2,1\n"
                f"plot '{csv_name}' using 1:2 with lines title 'x (nm)'\n"
                f"plot '{csv_name}' using 1:11 with lines title 'n_e', "
                f"'' using 1:12 with lines title 'N_p'\nunset multiplot\n")
    return "set datafile separator ','\nset key autotitle columnhead\n" + body
