"""Configuration files, run-record persistence, field snapshots and the command line.

Config format
-------------
Plain text, one ``key = value`` per line.  ``#`` starts a comment.  Values
are Python literals (``2.0``, ``[1.6, 1.55]``, ``"two_thirds"``, ``None``);
a bare word that is not a literal is taken as a string.  Unknown keys are
rejected, and physical parameters are validated when the file is parsed.

Record files
------------
``<stem>.json``
    Full diagnostics with a ``schema_version`` field.
``<stem>.csv``
    Time series with columns ``time, mass, energy, hs_alpha_half, sup_norm``.

Every float is written with 17 significant digits, so doubles round-trip
exactly.

Snapshot format
---------------
Little-endian binary, 64-byte header followed by the samples::

    offset  type        field
    0       8 bytes     magic b"MFNLSNAP"
    8       uint32      format version (1)
    12      uint32      nx
    16      uint32      ny
    20      uint32      reserved (0)
    24      float64     dx
    32      float64     dy
    40      float64     lx
    48      float64     ly
    56      float64     time
    64      complex128  nx * ny samples, x index slowest (C order)
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import experiments as ex
from .grid import Field2D, Grid2D
from .linear_flow import BoundaryError
from .multipliers import DispersionParams, ParameterError
from .nls_solver import NonFiniteError, RunRecord, SolverConfig, TerminationReason, evolve

SCHEMA_VERSION = "1.0"
SNAPSHOT_MAGIC = b"MFNLSNAP"
SNAPSHOT_VERSION = 1
SNAPSHOT_HEADER = np.dtype(
    [
        ("magic", "S8"),
        ("version", "<u4"),
        ("nx", "<u4"),
        ("ny", "<u4"),
        ("reserved", "<u4"),
        ("dx", "<f8"),
        ("dy", "<f8"),
        ("lx", "<f8"),
        ("ly", "<f8"),
        ("time", "<f8"),
    ]
)

EXIT_PASS, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class SchemaError(ValueError):
    """Record written with an unsupported schema version."""


# ---------------------------------------------------------------------------
# config

EXPERIMENTS = (
    "simulate",
    "scaling",
    "kernel",
    "bernstein",
    "decay",
    "strichartz",
    "gn",
    "embedding",
    "continuity",
    "decoherence",
    "thresholds",
    "scattering",
)

REQUIRED = ("experiment", "alpha1", "alpha2")

DEFAULTS = {
    "name": None,
    "output_dir": "runs",
    "p": 3.0,
    "mu": 1,
    "nx": 128,
    "ny": 128,
    "lx": 8.0,
    "ly": 8.0,
    "dt": 1e-3,
    "t_end": 1.0,
    "dealias": "two_thirds",
    "monitor_every": 10,
    "blowup_threshold": None,
    "blowup_factor": 1e6,
    "seed": 0,
    "amplitude": 1.0,
    "width": 1.0,
    "s": None,
    "lam": 2.0,
    "alpha_primes": [],
    "n_list": [1.0, 2.0],
    "t_list": [],
    "ensemble_size": 100,
    "amplitudes": [],
    "q": 4.0,
    "r": 2.0,
    "window": [],
    "kernel_mu": 0.0,
}

_TUPLE_KEYS = ("alpha_primes", "n_list", "t_list", "amplitudes", "window")


@dataclass(frozen=True)
class ConfigFile:
    """Parsed configuration: experiment kind, spec, output directory and the resolved values."""

    experiment: str
    spec: ex.ExperimentSpec
    output_dir: Path
    values: dict


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _tuplify(v):
    if isinstance(v, (list, tuple)):
        return tuple(_tuplify(x) for x in v)
    return v


def parse_config_text(text: str, source: str = "<string>") -> ConfigFile:
    """Parse config text; see the module docstring for the format."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in DEFAULTS and key not in REQUIRED:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _literal(val)
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing required key(s) {', '.join(missing)}")
    if values["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"{source}: unknown experiment {values['experiment']!r}")
    resolved = {**DEFAULTS, **values}
    if resolved["name"] is None:
        resolved["name"] = resolved["experiment"]
    return ConfigFile(
        resolved["experiment"], spec_from_values(resolved), Path(resolved["output_dir"]), resolved
    )


def spec_from_values(v: dict) -> ex.ExperimentSpec:
    """Build and validate an :class:`ExperimentSpec` from resolved config values."""
    try:
        params = DispersionParams(float(v["alpha1"]), float(v["alpha2"]), float(v["p"]), int(v["mu"]))
        grid = Grid2D(int(v["nx"]), int(v["ny"]), float(v["lx"]), float(v["ly"]))
        solver = SolverConfig(
            float(v["dt"]),
            float(v["t_end"]),
            v["dealias"],
            int(v["monitor_every"]),
            None if v["blowup_threshold"] is None else float(v["blowup_threshold"]),
            float(v["blowup_factor"]),
        )
    except ParameterError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
    kw = {k: _tuplify(v[k]) for k in _TUPLE_KEYS}
    return ex.ExperimentSpec(
        name=str(v["name"]),
        params=params,
        grid=grid,
        solver=solver,
        seed=int(v["seed"]),
        amplitude=float(v["amplitude"]),
        width=float(v["width"]),
        s=None if v["s"] is None else float(v["s"]),
        lam=float(v["lam"]),
        ensemble_size=int(v["ensemble_size"]),
        q=float(v["q"]),
        r=float(v["r"]),
        kernel_mu=float(v["kernel_mu"]),
        **kw,
    )


def read_config(path) -> ConfigFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config_text(text, str(path))


def parse_config(path) -> ex.ExperimentSpec:
    """Read a config file and return its validated :class:`ExperimentSpec`.

    Raises
    ------
    ConfigError
        Unknown, duplicate or missing keys; malformed values.
    ParameterError
        A dispersion parameter breaks its admissible range; the message
        names the rule.
    """
    return read_config(path).spec


# ---------------------------------------------------------------------------
# serialization


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def _dump(obj, indent: int = 0) -> str:
    """JSON text with every float at 17 significant digits."""
    pad, pad1 = " " * indent, " " * (indent + 2)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(x, (int, float, np.number)) and not isinstance(x, bool) for x in obj):
            return "[" + ", ".join(_dump(x) for x in obj) + "]"
        return "[\n" + ",\n".join(pad1 + _dump(x, indent + 2) for x in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (pad1 + json.dumps(str(k)) + ": " + _dump(v, indent + 2) for k, v in obj.items())
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _params_dict(p: DispersionParams) -> dict:
    return {"alpha1": p.alpha1, "alpha2": p.alpha2, "p": p.p, "mu": p.mu}


def _config_dict(c: SolverConfig) -> dict:
    return {f.name: getattr(c, f.name) for f in fields(c)}


def record_to_dict(record: RunRecord) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "params": _params_dict(record.params),
        "config": _config_dict(record.config),
        "terminated_reason": record.terminated_reason.value,
        "filter_loss": record.filter_loss,
        "series": {k: getattr(record, k) for k in RunRecord.SERIES},
        "meta": record.meta,
    }


def _check_schema(version) -> None:
    major = str(version).split(".", 1)[0]
    if major != SCHEMA_VERSION.split(".", 1)[0]:
        raise SchemaError(f"unsupported schema version {version!r} (reader handles {SCHEMA_VERSION})")


def record_from_dict(d: dict) -> RunRecord:
    _check_schema(d.get("schema_version"))
    p = d["params"]
    params = DispersionParams(p["alpha1"], p["alpha2"], p["p"], p["mu"])
    config = SolverConfig(**d["config"])
    s = d["series"]
    return RunRecord(
        params=params,
        config=config,
        terminated_reason=TerminationReason(d["terminated_reason"]),
        filter_loss=d["filter_loss"],
        meta=d.get("meta", {}),
        **{k: np.asarray(s[k], dtype=float) for k in RunRecord.SERIES},
    )


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err


def write_record(record: RunRecord, directory, stem: str = "run") -> tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.csv`` into ``directory``.

    Returns
    -------
    (json_path, csv_path)
    """
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OSError(f"cannot create output directory {d}: {err}") from err
    jp, cp = d / f"{stem}.json", d / f"{stem}.csv"
    _write(jp, _dump(record_to_dict(record)) + "\n")
    try:
        with cp.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("time",) + RunRecord.SERIES[1:])
            cols = [getattr(record, k) for k in RunRecord.SERIES]
            for row in zip(*cols):
                w.writerow([_fmt(float(x)) for x in row])
    except OSError as err:
        raise OSError(f"cannot write {cp}: {err}") from err
    return jp, cp


def read_record(path) -> RunRecord:
    """Read a record from its ``.json`` file (or the directory holding ``run.json``)."""
    p = Path(path)
    if p.is_dir():
        p = p / "run.json"
    try:
        d = json.loads(p.read_text())
    except OSError as err:
        raise OSError(f"cannot read {p}: {err}") from err
    return record_from_dict(d)


def read_table(path) -> dict:
    """Columns of a record ``.csv`` as float arrays."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(head)}


def write_snapshot(path, u: Field2D, time: float = 0.0) -> Path:
    """Write a field in the fixed little-endian snapshot layout."""
    g = u.grid
    h = np.zeros((), dtype=SNAPSHOT_HEADER)
    h["magic"], h["version"], h["nx"], h["ny"] = SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.nx, g.ny
    h["dx"], h["dy"], h["lx"], h["ly"], h["time"] = g.dx, g.dy, g.lx, g.ly, time
    p = Path(path)
    try:
        with p.open("wb") as fh:
            fh.write(h.tobytes())
            fh.write(np.ascontiguousarray(u.physical().data, dtype="<c16").tobytes())
    except OSError as err:
        raise OSError(f"cannot write snapshot {p}: {err}") from err
    return p


def read_snapshot(path) -> tuple[Field2D, float]:
    """Inverse of :func:`write_snapshot`; returns ``(field, time)``."""
    p = Path(path)
    raw = p.read_bytes()
    if len(raw) < SNAPSHOT_HEADER.itemsize:
        raise ValueError(f"{p}: truncated snapshot header")
    h = np.frombuffer(raw[: SNAPSHOT_HEADER.itemsize], dtype=SNAPSHOT_HEADER)[0]
    if h["magic"] != SNAPSHOT_MAGIC or h["version"] != SNAPSHOT_VERSION:
        raise ValueError(f"{p}: not a version-{SNAPSHOT_VERSION} snapshot")
    nx, ny = int(h["nx"]), int(h["ny"])
    data = np.frombuffer(raw[SNAPSHOT_HEADER.itemsize :], dtype="<c16")
    if data.size != nx * ny:
        raise ValueError(f"{p}: expected {nx * ny} samples, found {data.size}")
    g = Grid2D(nx, ny, float(h["lx"]), float(h["ly"]))
    return Field2D(g, data.reshape(nx, ny).astype(np.complex128)), float(h["time"])


# ---------------------------------------------------------------------------
# running experiments


def _simulate(spec: ex.ExperimentSpec, out: Path | None = None, snapshot: bool = False):
    u0 = ex.gaussian_datum(spec.grid, spec.amplitude, spec.width)
    u, rec = evolve(u0, spec.params, spec.solver)
    if snapshot and out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_snapshot(out / "initial.snap", u0, 0.0)
        write_snapshot(out / "final.snap", u, float(rec.times[-1]))
    ok = rec.completed and rec.mass_drift() <= 1e-10 + rec.filter_loss
    rows = [{"mass_drift": rec.mass_drift(), "energy_drift": rec.energy_drift(), "filter_loss": rec.filter_loss}]
    return ex.ExperimentResult(spec.name, bool(ok), rec.energy_drift(), rows, [rec])


RUNNERS = {
    "scaling": ex.exp_scaling,
    "kernel": ex.exp_kernel,
    "bernstein": ex.exp_bernstein,
    "decay": ex.exp_decay,
    "strichartz": ex.exp_strichartz,
    "gn": ex.exp_gn,
    "embedding": ex.exp_embedding,
    "continuity": ex.exp_continuity,
    "decoherence": ex.exp_decoherence,
    "thresholds": ex.exp_thresholds,
    "scattering": ex.exp_scattering_probe,
}


def write_result(result: ex.ExperimentResult, directory, echo: dict) -> Path:
    """Write ``result.json`` plus one record pair per run into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, rec in enumerate(result.records):
        rec.meta = {**rec.meta, "config": echo}
        write_record(rec, d, "run" if len(result.records) == 1 else f"run_{i:02d}")
    body = {
        "schema_version": SCHEMA_VERSION,
        "name": result.name,
        "verdict": "pass" if result.verdict else "fail",
        "headline": result.headline,
        "table": [{str(k): _plain(v) for k, v in row.items()} for row in result.table],
        "notes": {str(k): _plain(v) for k, v in result.notes.items()},
        "config": {k: _plain(v) for k, v in echo.items()},
    }
    p = d / "result.json"
    _write(p, _dump(body) + "\n")
    return p


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (bool, np.bool_, int, float, np.number, str)) or v is None:
        return v
    return str(v)


def run_config(cfg: ConfigFile, output_dir=None, snapshot: bool = False) -> tuple[int, ex.ExperimentResult | None, str]:
    """Run one parsed config; returns ``(exit_code, result, message)``."""
    out = Path(output_dir) if output_dir is not None else cfg.output_dir / cfg.spec.name
    try:
        if cfg.experiment == "simulate":
            res = _simulate(cfg.spec, out, snapshot)
        else:
            res = RUNNERS[cfg.experiment](cfg.spec)
    except (ex.ExperimentInvalid, ConfigError, ParameterError) as err:
        return EXIT_INVALID, None, f"invalid input: {err}"
    except (NonFiniteError, BoundaryError, FloatingPointError, RuntimeError) as err:
        return EXIT_NUMERICAL, None, f"numerical failure: {err}"
    except ValueError as err:
        return EXIT_INVALID, None, f"invalid input: {err}"
    write_result(res, out, cfg.values)
    code = EXIT_PASS if res.verdict else EXIT_FAIL
    return code, res, f"{cfg.spec.name}: {'pass' if res.verdict else 'fail'} (headline {res.headline:.6g}) -> {out}"


def _sweep_job(args):
    path, root = args
    try:
        cfg = read_config(path)
    except (ConfigError, ParameterError) as err:
        return EXIT_INVALID, f"{path}: invalid input: {err}"
    out = Path(root) / Path(path).stem if root is not None else None
    code, _, msg = run_config(cfg, out)
    return code, msg


def sweep(paths, output_root=None, workers: int | None = None) -> int:
    """Run several configs in a bounded process pool; each job writes to its own directory.

    Returns the largest exit code among the jobs.
    """
    workers = workers or min(len(paths), os.cpu_count() or 1)
    jobs = [(str(p), output_root) for p in paths]
    worst = EXIT_PASS
    with ProcessPoolExecutor(max_workers=max(1, workers)) as pool:
        for code, msg in pool.map(_sweep_job, jobs):
            print(msg)
            worst = max(worst, code)
    return worst


# ---------------------------------------------------------------------------
# command line


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mfnls", description="Experiments for the mixed fractional nonlinear Schrodinger equation."
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment from a config file")
        sp.add_argument("config", help="key = value config file")
        sp.add_argument("-o", "--output", help="output directory (default: <output_dir>/<name>)")
        if name == "simulate":
            sp.add_argument("--snapshot", action="store_true", help="save initial and final fields")
    sw = sub.add_parser("sweep", help="run several config files in parallel")
    sw.add_argument("configs", nargs="+")
    sw.add_argument("-o", "--output", help="root directory; each job writes to <root>/<config stem>")
    sw.add_argument("-j", "--workers", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "sweep":
        return sweep(args.configs, args.output, args.workers)
    try:
        cfg = read_config(args.config)
    except (ConfigError, ParameterError) as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return EXIT_INVALID
    if cfg.experiment != args.command:
        print(
            f"invalid input: config is for {cfg.experiment!r}, not {args.command!r}", file=sys.stderr
        )
        return EXIT_INVALID
    code, _, msg = run_config(cfg, args.output, getattr(args, "snapshot", False))
    print(msg, file=sys.stderr if code >= EXIT_INVALID else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
