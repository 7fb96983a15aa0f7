"""Command-line driver: ``sgstrip {spectral,solve,oracle,verify}``.

Configuration is an INI file whose sections and keys mirror ``RunConfig``.
Flags override environment variables (``SGSTRIP_CONFIG``, ``SGSTRIP_OUT``,
``SGSTRIP_THREADS``, ``SGSTRIP_BACKEND``), which override the file.

Exit codes: 0 success, 1 verification failed, 2 config/parse error,
3 domain/region error, 4 solver failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .core import ProblemParams
from .errors import (ConditioningError, ConfigError, DivergenceError, DomainError, GridError,
                     RegionError, SGError, TailTruncationWarning)
from .linearizable import LinearizableSpectrum
from .reconstruct import GridSpec, SolutionField, __version__, field_sweep
from .rh_solver import BACKENDS, GRADINGS, discretize_contour
from .verify import OracleSeries, oracle_grid, spectral_roundtrip, verification_report, write_report
from .volterra import read_boundary_csv, spectral_functions, write_spectral_csv

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DOMAIN, EXIT_SOLVER = 0, 1, 2, 3, 4
ENV_PREFIX = "SGSTRIP_"
FORMATS = ("csv", "json")

DEFAULT_LAMBDAS = (0.5 + 0.5j, 1.0 + 1.0j, 2.0 + 0.5j, 0.3 + 1.0j, 1.5j, 0.7 + 0j, 1.5 + 0j, -1.2 + 0.4j)


@dataclass(frozen=True)
class ContourConfig:
    r_min: float = 1e-2
    r_max: float = 1e2
    n_per_ray: int = 200
    grading: str = "log"


@dataclass(frozen=True)
class GridConfig:
    x_min: float = 0.2
    x_max: float = 2.0
    nx: int = 10
    y_margin: float = 0.1
    ny: int = 9


@dataclass(frozen=True)
class SolverConfig:
    backend: str = "neumann"
    tol: float = 1e-10
    max_iter: int = 200


@dataclass(frozen=True)
class OracleConfig:
    n_terms: int = 25


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = FORMATS


@dataclass(frozen=True)
class RunConfig:
    params: ProblemParams = field(default_factory=lambda: ProblemParams(0.01, 1.0))
    contour: ContourConfig = field(default_factory=ContourConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "RunConfig":
        c, s = self.contour, self.solver
        if c.grading not in GRADINGS:
            raise ConfigError(f"contour.grading must be one of {GRADINGS}")
        if not (0 < c.r_min < 1 < c.r_max) or c.n_per_ray < 8:
            raise ConfigError("contour needs 0 < r_min < 1 < r_max and n_per_ray >= 8")
        if s.backend not in BACKENDS:
            raise ConfigError(f"solver.backend must be one of {BACKENDS}")
        if not (s.tol > 0) or s.max_iter < 1:
            raise ConfigError("solver.tol must be positive and max_iter >= 1")
        if self.oracle.n_terms < 1:
            raise ConfigError("oracle.n_terms must be >= 1")
        bad = set(self.output.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")
        try:
            GridSpec(**asdict(self.grid)).axes(self.params.L)
        except GridError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    @property
    def grid_spec(self) -> GridSpec:
        return GridSpec(**asdict(self.grid))


_SECTIONS = {
    "params": ProblemParams, "contour": ContourConfig, "grid": GridConfig,
    "solver": SolverConfig, "oracle": OracleConfig, "output": OutputConfig,
}


def _convert(cls, name: str, raw: str):
    default = {f.name: f.type for f in fields(cls)}[name]
    kind = str(default)
    if name == "formats":
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw.strip()


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_to_ini(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    for sec in _SECTIONS:
        obj = getattr(cfg, sec)
        cp[sec] = {f.name: _format_value(getattr(obj, f.name)) for f in fields(obj)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_from_ini(text: str) -> RunConfig:
    """Parse an INI config; unknown sections or keys are errors."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    unknown = set(cp.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    base = RunConfig(params=ProblemParams(0.0, 1.0))
    parts = {}
    for sec, cls in _SECTIONS.items():
        current = asdict(getattr(base, sec))
        if cp.has_section(sec):
            names = {f.name for f in fields(cls)}
            for key, raw in cp.items(sec):
                if key not in names:
                    raise ConfigError(f"unknown key {sec}.{key}")
                try:
                    current[key] = _convert(cls, key, raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {sec}.{key}: {raw!r}") from exc
        if sec == "params" and not (cp.has_section("params") and cp.has_option("params", "d")
                                    and cp.has_option("params", "L")):
            raise ConfigError("params.d and params.L are required")
        try:
            parts[sec] = cls(**current)
        except DomainError as exc:
            raise ConfigError(f"invalid {sec}: {exc}") from exc
    return RunConfig(**parts).validate()


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_ini(text)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    out = args.out
    backend = args.backend
    if out:
        cfg = replace(cfg, output=replace(cfg.output, directory=out))
    if backend:
        if backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}")
        cfg = replace(cfg, solver=replace(cfg.solver, backend=backend))
    return cfg


def _resolve(args, name: str):
    value = getattr(args, name, None)
    if value is None:
        value = os.environ.get(ENV_PREFIX + name.upper())
    return value


def _comment(cfg: RunConfig) -> str:
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    return f"sgstrip {__version__} d={cfg.params.d!r} L={cfg.params.L!r} generated {stamp}"


def _build_disc(cfg: RunConfig):
    spec = LinearizableSpectrum(cfg.params)
    c = cfg.contour
    return spec, discretize_contour(spec, c.r_min, c.r_max, c.n_per_ray, c.grading)


def _parse_lambdas(text: str | None):
    if not text:
        return list(DEFAULT_LAMBDAS)
    try:
        return [complex(v.strip().replace(" ", "")) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad lambda list: {exc}") from exc


def cmd_spectral(cfg: RunConfig, args) -> int:
    if not args.input:
        raise ConfigError("spectral needs --input <boundary csv>")
    sides = read_boundary_csv(args.input)
    lams = _parse_lambdas(args.lambdas)
    rows = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TailTruncationWarning)
        for data in sides:
            a, b = spectral_functions(data, np.array(lams), cfg.params)
            rows.extend((lam, ai, bi, int(data.side)) for lam, ai, bi in zip(lams, a, b))
    for w in caught:
        if isinstance(w.message, TailTruncationWarning):
            print(f"warning: side {w.message.side} tail magnitude {w.message.magnitude:.3g}", file=sys.stderr)
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    write_spectral_csv(out / "spectral.csv", rows, comment=_comment(cfg))
    print(out / "spectral.csv")
    return EXIT_OK


def cmd_solve(cfg: RunConfig, args) -> int:
    spec, disc = _build_disc(cfg)
    s = cfg.solver
    field_ = field_sweep(cfg.grid_spec, disc, backend=s.backend, tol=s.tol, max_iter=s.max_iter,
                         threads=args.threads)
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.output.formats:
        field_.to_csv(out / "field.csv", comment=_comment(cfg))
    if "json" in cfg.output.formats:
        field_.to_json(out / "field.json", extra={"config": config_to_ini(cfg)})
    if field_.failures:
        for x, y, msg in field_.failures:
            print(f"failed at ({x}, {y}): {msg}", file=sys.stderr)
        return EXIT_SOLVER
    report = verification_report(field_, cfg.params, cfg.oracle.n_terms, s.tol)
    write_report(out / "verification.json", report)
    _print_report(report)
    return EXIT_OK if report["all_pass"] else EXIT_VERIFY


def cmd_oracle(cfg: RunConfig, args) -> int:
    x, y = cfg.grid_spec.axes(cfg.params.L)
    q = oracle_grid(x, y, OracleSeries(cfg.params.d, cfg.params.L, cfg.oracle.n_terms))
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "oracle.csv", "w", newline="") as fh:
        fh.write(f"# {_comment(cfg)}\n")
        w = csv.writer(fh)
        w.writerow(("x", "y", "q"))
        for i, xv in enumerate(x):
            for j, yv in enumerate(y):
                w.writerow([format(float(v), ".17g") for v in (xv, yv, q[i, j])])
    print(out / "oracle.csv")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    path = args.field or str(Path(cfg.output.directory) / "field.csv")
    field_ = SolutionField.from_csv(path, cfg.params)
    roundtrip = None
    if args.roundtrip:
        roundtrip = spectral_roundtrip(field_, LinearizableSpectrum(cfg.params), cfg.params)
    report = verification_report(field_, cfg.params, cfg.oracle.n_terms, cfg.solver.tol, roundtrip)
    if roundtrip is not None:
        report["roundtrip"] = roundtrip
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "verification.json", report)
    _print_report(report)
    return EXIT_OK if report["all_pass"] else EXIT_VERIFY


def _print_report(report: dict) -> None:
    for name, c in report["checks"].items():
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {name}: {c['value']} (tol {c['tolerance']})")


COMMANDS = {"spectral": cmd_spectral, "solve": cmd_solve, "oracle": cmd_oracle, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sgstrip", description="Elliptic sine-Gordon on a semistrip via a RH problem")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config")
    ap.add_argument("--out")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--backend")
    ap.add_argument("--input", help="boundary-trace CSV (spectral)")
    ap.add_argument("--lambdas", help="comma-separated complex samples (spectral)")
    ap.add_argument("--field", help="field CSV to check (verify)")
    ap.add_argument("--roundtrip", action="store_true", help="include the spectral round trip (verify)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        for name in ("config", "out", "backend"):
            setattr(args, name, _resolve(args, name))
        threads = _resolve(args, "threads")
        args.threads = int(threads) if threads is not None else None
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except (RegionError, DomainError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ConfigError, GridError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, ConditioningError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SGError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
