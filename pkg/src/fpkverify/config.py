"""Declarative TOML run configuration with strict key checking."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .checks import ALL_CHECKS, CheckSpec, DriftCase, GridSettings, default_check_specs, default_drift_suite
from .errors import ConfigError
from .measure import DRIFT_FAMILIES, GaussianSpec, make_drift

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TOP_KEYS = {"seed", "grids", "output", "drifts", "checks"}
GRID_KEYS = {"order_1d", "order_grid", "radius", "coarse_cells", "transport_method"}
OUTPUT_KEYS = {"dir", "formats"}
DRIFT_KEYS = {"name", "family", "params", "precision", "solver"}
CHECK_KEYS = {"name", "drifts", "alpha", "beta", "t_values", "tolerance", "enabled", "explore", "params"}
FORMATS = {"jsonl", "csv"}


@dataclass
class DriftDecl:
    name: str
    family: str
    params: dict = field(default_factory=dict)
    precision: Optional[list] = None
    solver: str = "auto"

    def build(self) -> DriftCase:
        drift = make_drift(self.family, **self.params)
        prec = GaussianSpec.from_precision(np.asarray(self.precision, dtype=float)) if self.precision else None
        return DriftCase(self.name, drift, prec, self.solver)


@dataclass
class RunConfig:
    seed: int = 0
    grids: GridSettings = field(default_factory=GridSettings)
    drifts: Optional[list] = None
    checks: list = field(default_factory=list)
    output_dir: str = "reports"
    formats: tuple = ("jsonl", "csv")

    @classmethod
    def default(cls) -> "RunConfig":
        return cls(checks=default_check_specs())

    def grid_settings(self) -> GridSettings:
        return self.grids

    def drift_cases(self) -> list[DriftCase]:
        if self.drifts is None:
            return default_drift_suite()
        return [d.build() for d in self.drifts]

    def find_drift(self, name: str) -> DriftCase:
        for case in self.drift_cases():
            if case.name == name:
                return case
        raise ConfigError(f"drift {name!r} is not declared")


def _reject_unknown(table: dict, allowed: set, where: str):
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"unknown key {extra[0]!r} in {where}")


def _typed(value, kind, where: str):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f"key {where!r} must be of type {kind.__name__}")
    return value


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed TOML document and build a :class:`RunConfig`."""
    _reject_unknown(data, TOP_KEYS, "the top level")
    cfg = RunConfig()
    if "seed" in data:
        cfg.seed = _typed(data["seed"], int, "seed")

    grids = data.get("grids", {})
    _reject_unknown(grids, GRID_KEYS, "[grids]")
    for key in ("order_1d", "order_grid", "coarse_cells"):
        if key in grids:
            setattr(cfg.grids, key, _typed(grids[key], int, f"grids.{key}"))
    if "radius" in grids:
        cfg.grids.radius = _typed(grids["radius"], float, "grids.radius")
    if "transport_method" in grids:
        method = _typed(grids["transport_method"], str, "grids.transport_method")
        if method not in ("sinkhorn", "dual-lp"):
            raise ConfigError(f"key 'grids.transport_method' has unknown value {method!r}")
        cfg.grids.transport_method = method

    output = data.get("output", {})
    _reject_unknown(output, OUTPUT_KEYS, "[output]")
    if "dir" in output:
        cfg.output_dir = _typed(output["dir"], str, "output.dir")
    if "formats" in output:
        formats = tuple(_typed(output["formats"], list, "output.formats"))
        bad = [f for f in formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"key 'output.formats' has unknown format {bad[0]!r}")
        cfg.formats = formats

    if "drifts" in data:
        decls = []
        for i, entry in enumerate(_typed(data["drifts"], list, "drifts")):
            where = f"drifts[{i}]"
            _reject_unknown(entry, DRIFT_KEYS, where)
            for key in ("name", "family"):
                if key not in entry:
                    raise ConfigError(f"missing key {key!r} in {where}")
            family = entry["family"]
            if family not in DRIFT_FAMILIES and family != "product":
                raise ConfigError(f"key '{where}.family' names unknown drift family {family!r}")
            decl = DriftDecl(entry["name"], family, dict(entry.get("params", {})), entry.get("precision"),
                             entry.get("solver", "auto"))
            if decl.solver not in ("auto", "explicit", "grid"):
                raise ConfigError(f"key '{where}.solver' has unknown value {decl.solver!r}")
            try:
                decl.build()
            except (TypeError, ValueError, KeyError) as exc:
                raise ConfigError(f"key '{where}.params' is invalid: {exc}") from None
            decls.append(decl)
        names = [d.name for d in decls]
        if len(set(names)) != len(names):
            raise ConfigError("drift names in [[drifts]] must be unique")
        cfg.drifts = decls

    known_drifts = {c.name for c in cfg.drift_cases()}
    for i, entry in enumerate(_typed(data.get("checks", []), list, "checks")):
        where = f"checks[{i}]"
        _reject_unknown(entry, CHECK_KEYS, where)
        if "name" not in entry:
            raise ConfigError(f"missing key 'name' in {where}")
        if entry["name"] not in ALL_CHECKS:
            raise ConfigError(f"key '{where}.name' names unknown check {entry['name']!r}")
        missing = set(entry.get("drifts", [])) - known_drifts
        if missing:
            raise ConfigError(f"key '{where}.drifts' references undeclared drift {sorted(missing)[0]!r}")
        try:
            spec = CheckSpec(
                entry["name"],
                drifts=entry.get("drifts"),
                alpha=entry.get("alpha"),
                beta=entry.get("beta"),
                t_values=entry.get("t_values"),
                tolerance=entry.get("tolerance"),
                enabled=bool(entry.get("enabled", True)),
                explore=bool(entry.get("explore", False)),
                params=dict(entry.get("params", {})),
            )
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        cfg.checks.append(spec)
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a TOML configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return parse_config(data)
