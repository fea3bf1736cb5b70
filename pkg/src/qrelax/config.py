"""Scenario configuration: plain-text [section] / key = value files.

`parse_config` validates exhaustively and reports every violation at once
(unknown keys, unparsable values, physics constraints), so a bad file never
triggers a partial run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .core import CoordGrid, PhaseGrid, PhysParams
from .errors import ConfigError

__all__ = ["ScenarioConfig", "parse_config", "SCENARIOS"]

SCENARIOS = (
    "operator-relax",
    "wigner-relax",
    "moments-sweep",
    "smoluchowski",
    "free-diffusion",
    "equilibrium-check",
    "coefficient-table",
)

_ALLOWED = {
    "scenario": {"name"},
    "physics": {"m", "omega0", "b", "T", "hbar", "k_B"},
    "grid": {"x_min", "x_max", "n_x", "p_min", "p_max", "n_p"},
    "run": {
        "t_end", "dt", "stride", "models", "kernels", "law", "sigma0_sq",
        "t_start", "basis_size", "displacement", "beta_end", "dbeta",
        "n_modes", "mean_x", "mean_p", "var_x", "var_p", "cov_xp", "var0",
        "beta_min", "beta_max", "points", "snapshot_times",
    },
    "output": {"directory", "format"},
}

_MODEL_TAGS = {"classical", "effective-temperature", "quantum-friction", "maxwell-heisenberg"}
_KERNEL_TAGS = {"caldeira-leggett", "nonlinear", "linearized"}
_LAW_TAGS = {"classical-einstein", "quantum-einstein", "quantum-bath"}

_REQUIRED_RUN_KEYS = {
    "operator-relax": {"t_end", "dt"},
    "wigner-relax": {"t_end"},
    "moments-sweep": {"t_end", "dt"},
    "smoluchowski": {"t_end", "dt", "var0"},
    "free-diffusion": {"law", "sigma0_sq", "t_end", "dt"},
    "equilibrium-check": set(),
    "coefficient-table": {"beta_min", "beta_max", "points"},
}

_NEEDS_PHASE_GRID = {"wigner-relax"}
_NEEDS_COORD_GRID = {"smoluchowski", "equilibrium-check"}


@dataclass
class ScenarioConfig:
    name: str
    params: PhysParams
    grid: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    output_dir: str = "out"
    output_format: str = "csv"

    def coord_grid(self) -> CoordGrid:
        g = self.grid
        return CoordGrid(g["x_min"], g["x_max"], g["n_x"])

    def phase_grid(self) -> PhaseGrid:
        g = self.grid
        return PhaseGrid(
            CoordGrid(g["x_min"], g["x_max"], g["n_x"]),
            CoordGrid(g["p_min"], g["p_max"], g["n_p"]),
        )


def _parse_float(raw, section, key, errors):
    try:
        return float(raw)
    except ValueError:
        errors.append(f"[{section}] {key} = {raw!r} is not a number")
        return None


def _parse_int(raw, section, key, errors):
    try:
        return int(raw)
    except ValueError:
        errors.append(f"[{section}] {key} = {raw!r} is not an integer")
        return None


def _parse_tags(raw, section, key, allowed, errors):
    tags = [t.strip() for t in raw.split(",") if t.strip()]
    bad = [t for t in tags if t not in allowed]
    if bad:
        errors.append(
            f"[{section}] {key} contains unknown tags {bad}; allowed: {sorted(allowed)}"
        )
        return None
    if not tags:
        errors.append(f"[{section}] {key} is empty")
        return None
    return tags


_FLOAT_RUN_KEYS = {
    "t_end", "dt", "sigma0_sq", "t_start", "displacement", "beta_end", "dbeta",
    "mean_x", "mean_p", "var_x", "var_p", "cov_xp", "var0", "beta_min", "beta_max",
}
_INT_RUN_KEYS = {"stride", "basis_size", "n_modes", "points"}


def parse_config(path) -> ScenarioConfig:
    """Parse and validate a scenario file; raises ConfigError listing every
    violation found (not just the first)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"configuration file not found: {path}"])
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError([f"syntax error: {exc}"]) from exc

    errors: list[str] = []

    for section in cp.sections():
        if section not in _ALLOWED:
            errors.append(f"unknown section [{section}]")
            continue
        for key in cp[section]:
            if key not in _ALLOWED[section]:
                errors.append(f"unknown key {key!r} in section [{section}]")

    name = cp.get("scenario", "name", fallback=None)
    if name is None:
        errors.append("[scenario] name is required")
    elif name not in SCENARIOS:
        errors.append(f"[scenario] name = {name!r} is not one of {SCENARIOS}")

    # physics with natural-unit defaults
    phys_kwargs = {"m": 1.0, "omega0": 1.0, "b": 1.0, "T": 1.0, "hbar": 1.0, "k_B": 1.0}
    if cp.has_section("physics"):
        for key in cp["physics"]:
            if key in phys_kwargs:
                val = _parse_float(cp["physics"][key], "physics", key, errors)
                if val is not None:
                    phys_kwargs[key] = val
    constraints = {
        "m": ("m > 0", lambda v: v > 0),
        "omega0": ("omega0 >= 0", lambda v: v >= 0),
        "b": ("b >= 0", lambda v: v >= 0),
        "T": ("T >= 0", lambda v: v >= 0),
        "hbar": ("hbar > 0", lambda v: v > 0),
        "k_B": ("k_B > 0", lambda v: v > 0),
    }
    params = None
    bad_phys = False
    for key, (desc, ok) in constraints.items():
        if not ok(phys_kwargs[key]):
            errors.append(f"[physics] {key} = {phys_kwargs[key]} violates {desc}")
            bad_phys = True
    if not bad_phys:
        params = PhysParams(**phys_kwargs)

    grid = {}
    if cp.has_section("grid"):
        for key in cp["grid"]:
            if key not in _ALLOWED["grid"]:
                continue
            if key.startswith("n_"):
                val = _parse_int(cp["grid"][key], "grid", key, errors)
            else:
                val = _parse_float(cp["grid"][key], "grid", key, errors)
            if val is not None:
                grid[key] = val
    for nkey in ("n_x", "n_p"):
        if nkey in grid and grid[nkey] < 8:
            errors.append(f"[grid] {nkey} = {grid[nkey]} violates {nkey} >= 8")
    for lo, hi in (("x_min", "x_max"), ("p_min", "p_max")):
        if lo in grid and hi in grid and not grid[hi] > grid[lo]:
            errors.append(f"[grid] requires {hi} > {lo}, got {grid[lo]} .. {grid[hi]}")

    run = {}
    if cp.has_section("run"):
        for key in cp["run"]:
            if key not in _ALLOWED["run"]:
                continue
            raw = cp["run"][key]
            if key in _FLOAT_RUN_KEYS:
                val = _parse_float(raw, "run", key, errors)
            elif key in _INT_RUN_KEYS:
                val = _parse_int(raw, "run", key, errors)
            elif key == "models":
                val = _parse_tags(raw, "run", key, _MODEL_TAGS, errors)
            elif key == "kernels":
                val = _parse_tags(raw, "run", key, _KERNEL_TAGS, errors)
            elif key == "law":
                val = raw.strip()
                if val not in _LAW_TAGS:
                    errors.append(f"[run] law = {val!r} is not one of {sorted(_LAW_TAGS)}")
                    val = None
            elif key == "snapshot_times":
                try:
                    val = [float(t) for t in raw.split(",") if t.strip()]
                except ValueError:
                    errors.append(f"[run] snapshot_times = {raw!r} is not a number list")
                    val = None
            else:
                val = raw
            if val is not None:
                run[key] = val

    for key in ("t_end", "dt", "dbeta", "beta_end", "sigma0_sq", "var0", "var_x", "var_p"):
        if key in run and run[key] <= 0:
            errors.append(f"[run] {key} = {run[key]} violates {key} > 0")
    if "stride" in run and run["stride"] < 1:
        errors.append(f"[run] stride = {run['stride']} violates stride >= 1")
    if "basis_size" in run and run["basis_size"] < 2:
        errors.append(f"[run] basis_size = {run['basis_size']} violates basis_size >= 2")
    if "points" in run and run["points"] < 2:
        errors.append(f"[run] points = {run['points']} violates points >= 2")

    if name in SCENARIOS:
        missing = _REQUIRED_RUN_KEYS[name] - run.keys()
        if missing:
            errors.append(f"scenario {name!r} requires [run] keys: {sorted(missing)}")
        if name in _NEEDS_PHASE_GRID:
            need = {"x_min", "x_max", "n_x", "p_min", "p_max", "n_p"} - grid.keys()
            if need:
                errors.append(f"scenario {name!r} requires [grid] keys: {sorted(need)}")
        if name in _NEEDS_COORD_GRID:
            need = {"x_min", "x_max", "n_x"} - grid.keys()
            if need:
                errors.append(f"scenario {name!r} requires [grid] keys: {sorted(need)}")
        if name == "coefficient-table" and "beta_min" in run and "beta_max" in run:
            if not 0 < run["beta_min"] < run["beta_max"]:
                errors.append("[run] requires 0 < beta_min < beta_max")
        if params is not None and params.T == 0 and name in (
            "operator-relax", "equilibrium-check", "coefficient-table", "moments-sweep",
        ):
            errors.append(f"[physics] T = 0 violates T > 0 required by scenario {name!r}")

    output_dir = cp.get("output", "directory", fallback="out")
    output_format = cp.get("output", "format", fallback="csv")
    if output_format not in ("csv", "csv+svg"):
        errors.append(f"[output] format = {output_format!r} must be 'csv' or 'csv+svg'")

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        name=name,
        params=params,
        grid=grid,
        run=run,
        output_dir=output_dir,
        output_format=output_format,
    )
