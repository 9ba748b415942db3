"""Experiment configuration: schema, validation, and deterministic hashing.

Configs are JSON files with dotted sections (domain, grid, operator, solver,
singular, barrier, rhs, fit, quad, sweep, experiment).  Every referenced key
is validated against the module preconditions before any computation runs;
the canonical key-value set determines a short hash that stamps every
artifact file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "config_hash"]

KINDS = ("solve", "singular", "barrier", "principles", "exponent", "sweep", "report")
RHS_KINDS = ("constant", "expression-table", "singular")

_DEFAULTS = {
    "domain": {"a": -1.0, "b": 1.0},
    "grid": {"n": 256, "halo": 2.0},
    "operator": {"p": 2.0, "q": 2.0, "s1": 0.75, "s2": 0.35},
    "solver": {"tol": None, "max_iter": 4000, "outer_max_iter": 200},
    "rhs": {"kind": "constant", "value": 1.0},
    "singular": {
        "gamma": 0.0,
        "delta": 1.0,
        "eps0": 1.0,
        "eps_factor": 0.5,
        "eps_min": 1e-3,
        "weight_kind": "pure_distance",
        "scale": 1.0,
    },
    "barrier": {"alpha": 0.5, "kappa": 0.0, "rho": 0.0, "band": 0.0},
    "fit": {"d_lo": None, "d_hi": None, "side": "both"},
    "quad": {"pair_order": "ascending", "tolerance": 1e-12},
    "experiment": {"kind": "solve", "out_dir": "runs/out", "seed": 0},
    "sweep": {"key": None, "values": None},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict = field(repr=False)

    def section(self, name: str) -> dict:
        merged = dict(_DEFAULTS.get(name, {}))
        merged.update(self.raw.get(name, {}))
        return merged

    def get(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.section(section)[key]

    def with_overrides(self, **dotted) -> "ExperimentConfig":
        raw = json.loads(json.dumps(self.raw))
        for dotted_key, value in dotted.items():
            section, key = dotted_key.split(".", 1)
            raw.setdefault(section, {})[key] = value
        return ExperimentConfig(raw)

    @property
    def kind(self) -> str:
        return self.section("experiment")["kind"]

    @property
    def out_dir(self) -> Path:
        return Path(self.section("experiment")["out_dir"])

    @property
    def seed(self) -> int:
        return int(self.section("experiment")["seed"])

    @property
    def hash(self) -> str:
        return config_hash(self.canonical())

    def canonical(self) -> dict:
        """Fully-defaulted nested dict used for hashing and provenance."""
        return {name: self.section(name) for name in sorted(_DEFAULTS)}


def config_hash(canonical: dict) -> str:
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"), default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = ExperimentConfig(raw)
    validate(cfg)
    return cfg


def _require(cond: bool, key: str, message: str):
    if not cond:
        raise ConfigError(f"{key}: {message}")


def validate(cfg: ExperimentConfig) -> None:
    """Check every key against the module preconditions; raises ConfigError
    naming the offending key before any computation happens."""
    for name in cfg.raw:
        _require(name in _DEFAULTS, name, "unknown config section")
        for key in cfg.raw[name]:
            _require(key in _DEFAULTS[name], f"{name}.{key}", "unknown config key")

    exp = cfg.section("experiment")
    _require(exp["kind"] in KINDS, "experiment.kind", f"must be one of {KINDS}")
    _require(isinstance(exp["seed"], int), "experiment.seed", "must be an integer")

    dom = cfg.section("domain")
    _require(dom["a"] < dom["b"], "domain.a", "must satisfy a < b")

    grid = cfg.section("grid")
    _require(isinstance(grid["n"], int) and grid["n"] >= 16, "grid.n", "must be an integer >= 16")
    _require(grid["halo"] >= dom["b"] - dom["a"], "grid.halo", "must be at least b - a")

    op = cfg.section("operator")
    _require(1.0 < op["q"] <= op["p"], "operator.q", "must satisfy 1 < q <= p")
    _require(0.0 < op["s2"] <= op["s1"] < 1.0, "operator.s2", "must satisfy 0 < s2 <= s1 < 1")

    sol = cfg.section("solver")
    if sol["tol"] is not None:
        _require(sol["tol"] > 0.0, "solver.tol", "must be positive")
    _require(sol["max_iter"] >= 1, "solver.max_iter", "must be at least 1")
    _require(sol["outer_max_iter"] >= 1, "solver.outer_max_iter", "must be at least 1")

    rhs = cfg.section("rhs")
    _require(rhs["kind"] in RHS_KINDS, "rhs.kind", f"must be one of {RHS_KINDS}")
    if rhs["kind"] == "expression-table":
        v = rhs["value"]
        ok = (
            isinstance(v, list)
            and len(v) >= 2
            and all(isinstance(row, list) and len(row) == 2 for row in v)
        )
        _require(ok, "rhs.value", "expression-table needs a list of [x, f] pairs")

    sg = cfg.section("singular")
    _require(sg["gamma"] >= 0.0, "singular.gamma", "must be nonnegative")
    _require(sg["gamma"] < op["p"] * op["s1"], "singular.gamma", "must be below p*s1")
    _require(sg["delta"] > 0.0, "singular.delta", "must be positive")
    _require(sg["eps0"] > 0.0, "singular.eps0", "must be positive")
    _require(0.0 < sg["eps_factor"] < 1.0, "singular.eps_factor", "must lie in (0, 1)")
    _require(0.0 < sg["eps_min"] <= sg["eps0"], "singular.eps_min", "must lie in (0, eps0]")
    _require(sg["weight_kind"] in ("pure_distance", "scaled"), "singular.weight_kind",
             "must be pure_distance or scaled")
    _require(sg["scale"] >= 0.0, "singular.scale", "must be nonnegative")
    if sg["weight_kind"] == "pure_distance":
        _require(sg["scale"] == 1.0, "singular.scale", "pure_distance fixes the scale to 1")

    bar = cfg.section("barrier")
    _require(0.0 < bar["alpha"] < 1.0, "barrier.alpha", "must lie in (0, 1)")
    _require(bar["kappa"] >= 0.0, "barrier.kappa", "must be nonnegative")
    half = 0.5 * (dom["b"] - dom["a"])
    _require(0.0 <= bar["rho"] < half, "barrier.rho", "must lie in [0, (b-a)/2); 0 means default")
    _require(bar["band"] >= 0.0, "barrier.band", "must be nonnegative; 0 means default")

    fit = cfg.section("fit")
    _require(fit["side"] in ("left", "right", "both"), "fit.side",
             "must be left, right, or both")
    h = (dom["b"] - dom["a"]) / (grid["n"] + 1)
    if fit["d_lo"] is not None:
        _require(fit["d_lo"] >= 2.0 * h, "fit.d_lo", "must be at least 2h")
    if fit["d_hi"] is not None:
        _require(fit["d_hi"] <= 0.25 * (dom["b"] - dom["a"]), "fit.d_hi",
                 "must be at most (b-a)/4")
        lo = fit["d_lo"] if fit["d_lo"] is not None else 2.0 * h
        _require(fit["d_hi"] > lo, "fit.d_hi", "must exceed fit.d_lo")

    quad = cfg.section("quad")
    _require(quad["pair_order"] == "ascending", "quad.pair_order",
             "only the ascending deterministic order is supported")
    _require(quad["tolerance"] > 0.0, "quad.tolerance", "must be positive")

    if exp["kind"] == "sweep":
        sw = cfg.section("sweep")
        _require(isinstance(sw["key"], str) and "." in sw["key"], "sweep.key",
                 "must name a dotted scalar config entry")
        section, key = sw["key"].split(".", 1)
        _require(section in _DEFAULTS and key in _DEFAULTS.get(section, {}),
                 "sweep.key", "does not name a known config entry")
        _require(isinstance(sw["values"], list) and len(sw["values"]) > 0,
                 "sweep.values", "must be a nonempty list")
