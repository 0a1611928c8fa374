"""Experiment configuration files and built-in presets.

Configs are TOML (``key = value`` with sections). A ``summary.json`` written
by a previous run is also accepted: its ``config`` member is the echoed
configuration.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .hamiltonian import Monomial, PolynomialHamiltonian
from .operator import BScale
from .solver import SolverConfig


class ConfigError(ValueError):
    pass


KINDS = ("torus", "drift", "resonance-scan")

_SOLVER_KEYS = {
    "M": int, "N0": int, "max_iter": int, "tol_residual": float, "use_B": bool,
    "b_scale_mode": str, "tau": float, "strict_conditions": bool, "seed": int,
    "N_cap": int, "max_rows": int, "rcond_floor": float,
}
_DIAG_KEYS = {"s": float, "tau": float, "M_box": int, "strict": bool}
_OUTPUT_KEYS = {"directory": str, "emit_trajectories": bool, "trajectory_times": list,
                "reference_dt": float}
_DRIFT_KEYS = {"h_grid": list, "n_steps": int}
_SCAN_KEYS = {"lower": list, "upper": list, "taus": list, "M_boxes": list,
              "samples": int, "seed": int}


@dataclass
class ExperimentConfig:
    name: str
    kind: str = "torus"
    system: dict = field(default_factory=dict)
    perturbation: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    drift: dict = field(default_factory=dict)
    scan: dict = field(default_factory=dict)

    def hamiltonian(self) -> PolynomialHamiltonian:
        n = self.system["n"]
        terms = [Monomial(float(m["coeff"]), tuple(m["alpha"]), tuple(m["beta"]))
                 for m in self.perturbation.get("monomials", [])]
        return PolynomialHamiltonian(n, tuple(self.system["omega0"]), tuple(terms),
                                     float(self.perturbation.get("epsilon", 0.0)))

    def solver_config(self) -> SolverConfig:
        kw = dict(self.solver)
        d = self.diagnostics
        if "tau" in d:
            kw["tau"] = d["tau"]
        if "s" in d:
            kw["s"] = d["s"]
        if "M_box" in d:
            kw["M_box"] = d["M_box"]
        kw["strict_conditions"] = bool(kw.get("strict_conditions", False) or d.get("strict", False))
        kw["amplitude"] = self.system.get("amplitude", math.exp(-1))
        return SolverConfig(**kw)

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        for key in ("system", "perturbation", "solver", "diagnostics", "outputs", "drift", "scan"):
            section = getattr(self, key)
            if section:
                out[key] = copy.deepcopy(section)
        return out


def _typed(section: str, data: dict, types: dict) -> dict:
    out = {}
    for key, value in data.items():
        if key not in types:
            raise ConfigError(f"unknown key '{section}.{key}'")
        want = types[key]
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if want is bool and not isinstance(value, bool):
            raise ConfigError(f"'{section}.{key}' must be true or false")
        if want is int and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"'{section}.{key}' must be an integer")
        if not isinstance(value, want):
            raise ConfigError(f"'{section}.{key}' must be of type {want.__name__}")
        out[key] = value
    return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    name = raw.pop("name", None)
    if not isinstance(name, str) or not name:
        raise ConfigError("missing or empty key 'name'")
    kind = raw.pop("kind", "torus")
    if kind not in KINDS:
        raise ConfigError(f"'kind' must be one of {', '.join(KINDS)}, got {kind!r}")
    sections = {}
    for key in ("system", "perturbation", "solver", "diagnostics", "outputs", "drift", "scan"):
        value = raw.pop(key, {})
        if not isinstance(value, dict):
            raise ConfigError(f"section '{key}' must be a table")
        sections[key] = value
    if raw:
        raise ConfigError(f"unknown key '{sorted(raw)[0]}'")
    cfg = ExperimentConfig(name, kind)
    cfg.solver = _typed("solver", sections["solver"], _SOLVER_KEYS)
    cfg.diagnostics = _typed("diagnostics", sections["diagnostics"], _DIAG_KEYS)
    cfg.outputs = _typed("outputs", sections["outputs"], _OUTPUT_KEYS)
    cfg.drift = _typed("drift", sections["drift"], _DRIFT_KEYS)
    cfg.scan = _typed("scan", sections["scan"], _SCAN_KEYS)
    if "b_scale_mode" in cfg.solver:
        try:
            BScale(cfg.solver["b_scale_mode"])
        except ValueError:
            raise ConfigError("'solver.b_scale_mode' must be 'chain_rule' or 'paper_literal'") from None
    if kind == "torus":
        cfg.system = _parse_system(sections["system"])
        cfg.perturbation = _parse_perturbation(sections["perturbation"], cfg.system["n"])
        try:
            cfg.hamiltonian()
            cfg.solver_config()
        except (ValueError, TypeError) as err:
            raise ConfigError(str(err)) from None
    elif kind == "drift":
        if not cfg.drift.get("h_grid"):
            raise ConfigError("missing key 'drift.h_grid'")
    else:
        for key in ("lower", "upper", "taus", "M_boxes"):
            if not cfg.scan.get(key):
                raise ConfigError(f"missing key 'scan.{key}'")
    return cfg


def _parse_system(data: dict) -> dict:
    for key in data:
        if key in ("h0", "H0", "frequency_map"):
            raise ConfigError(f"'system.{key}': only the isochronous H0 = sum omega_j |z_j|^2 is supported")
        if key not in ("n", "omega0", "amplitude"):
            raise ConfigError(f"unknown key 'system.{key}'")
    if "n" not in data or "omega0" not in data:
        raise ConfigError("missing key 'system.n' or 'system.omega0'")
    n = data["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError("'system.n' must be a positive integer")
    omega0 = [float(w) for w in data["omega0"]]
    if len(omega0) != n:
        raise ConfigError(f"'system.omega0' must have {n} entries")
    out = {"n": n, "omega0": omega0}
    if "amplitude" in data:
        a = float(data["amplitude"])
        if not a > 0:
            raise ConfigError("'system.amplitude' must be positive")
        out["amplitude"] = a
    return out


def _parse_perturbation(data: dict, n: int) -> dict:
    for key in data:
        if key not in ("epsilon", "monomials"):
            raise ConfigError(f"unknown key 'perturbation.{key}'")
    eps = float(data.get("epsilon", 0.0))
    monos = []
    for i, m in enumerate(data.get("monomials", [])):
        if not isinstance(m, dict) or set(m) != {"coeff", "alpha", "beta"}:
            raise ConfigError(f"'perturbation.monomials[{i}]' needs exactly coeff, alpha, beta")
        alpha, beta = list(m["alpha"]), list(m["beta"])
        if len(alpha) != n or len(beta) != n:
            raise ConfigError(f"'perturbation.monomials[{i}]' exponents must have {n} entries")
        monos.append({"coeff": float(m["coeff"]), "alpha": alpha, "beta": beta})
    return {"epsilon": eps, "monomials": monos}


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    try:
        if path.suffix == ".json":
            raw = json.loads(text)
            raw = raw.get("config", raw)
        else:
            raw = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as err:
        raise ConfigError(f"cannot parse {path}: {err}") from None
    return config_from_dict(raw)


# Presets -------------------------------------------------------------------

_SQ2 = math.sqrt(2.0)


def _duffing() -> dict:
    # (z + zbar)^4 / 16 = [z^4 + zbar^4 + 4(z^3 zbar + z zbar^3) + 6 z^2 zbar^2] / 16
    return {
        "name": "duffing",
        "system": {"n": 1, "omega0": [1.0]},
        "perturbation": {"epsilon": 1.0, "monomials": [
            {"coeff": 1 / 16, "alpha": [4], "beta": [0]},
            {"coeff": 4 / 16, "alpha": [3], "beta": [1]},
            {"coeff": 6 / 16, "alpha": [2], "beta": [2]},
        ]},
        "solver": {"M": 2, "N0": 1, "max_iter": 5, "tol_residual": 1e-12},
        "diagnostics": {"s": 0.5, "tau": 2.0, "M_box": 4},
        "outputs": {"emit_trajectories": True,
                    "trajectory_times": [0.1 * i for i in range(101)],
                    "reference_dt": 0.01},
    }


def _henon_heiles() -> dict:
    # eps [ (z1+zb1)^2 (z2+zb2) / (2 sqrt2) - (z2+zb2)^3 / (6 sqrt2) ]
    c = 1 / (2 * _SQ2)
    d = 1 / (6 * _SQ2)
    return {
        "name": "henon-heiles",
        "system": {"n": 2, "omega0": [1.0, (1 + math.sqrt(5.0)) / 2]},
        "perturbation": {"epsilon": 0.1, "monomials": [
            {"coeff": c, "alpha": [2, 1], "beta": [0, 0]},
            {"coeff": c, "alpha": [2, 0], "beta": [0, 1]},
            {"coeff": 2 * c, "alpha": [1, 1], "beta": [1, 0]},
            {"coeff": -d, "alpha": [0, 3], "beta": [0, 0]},
            {"coeff": -3 * d, "alpha": [0, 2], "beta": [0, 1]},
        ]},
        "solver": {"M": 2, "N0": 1, "max_iter": 5, "tol_residual": 1e-12},
        "diagnostics": {"s": 0.5, "tau": 2.0, "M_box": 4},
        "outputs": {"emit_trajectories": True,
                    "trajectory_times": [0.2 * i for i in range(101)],
                    "reference_dt": 0.01},
    }


def _harmonic_drift() -> dict:
    return {
        "name": "harmonic-drift",
        "kind": "drift",
        "drift": {"h_grid": [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 1.5], "n_steps": 101},
    }


def _resonance_scan() -> dict:
    return {
        "name": "resonance-scan",
        "kind": "resonance-scan",
        "scan": {"lower": [1.0, 1.0], "upper": [2.0, 2.0], "taus": [1.5, 2.0, 3.0, 4.0],
                 "M_boxes": [1, 2, 4], "samples": 10000, "seed": 0},
    }


PRESETS = {
    "duffing": ("undamped Duffing oscillator, epsilon = 1, quartic perturbation", _duffing),
    "henon-heiles": ("Henon-Heiles model, epsilon = 0.1, omega = (1, golden ratio)", _henon_heiles),
    "harmonic-drift": ("symplectic Euler phase drift of the harmonic oscillator over an h grid",
                       _harmonic_drift),
    "resonance-scan": ("Monte Carlo measure of nearly-resonant frequencies in [1,2]^2",
                       _resonance_scan),
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; choose from {', '.join(PRESETS)}")
    return config_from_dict(PRESETS[name][1]())


def list_presets() -> str:
    return "\n".join(f"{name}: {desc}" for name, (desc, _) in PRESETS.items())
