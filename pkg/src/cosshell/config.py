"""Scenario configuration: TOML (or JSON) files with a closed schema.

Every section and key is optional; omitted values take the defaults below.
Unknown sections or keys are errors, since a silently ignored typo in a
material constant is worse than a refusal to run.

    [geometry]   Lx, Ly
    [mesh]       nx, ny                 (ny even: wrinkle metrics use the midline)
    [model]      mode                   unconstrained | unit_director | normal_director | kirchhoff_love
    [energy]     p, q, s, a1, a2, a3, c1, c2, offset
    [loads]      b, g, tau, mu          (3-vectors)
    [boundary]   gamma (edge names), stretch
    [solver]     max_iter, gtol, armijo, backtrack, initial_step, max_halvings, history, energy_slack
    [run]        seed, perturbation, initial_director, initial_thickness, out
    [gradcheck]  nx, ny, tolerance, step, noise
    [convexity]  joint_samples, rank_one_attempts, planar_attempts, grid
    [refine]     levels
"""
import copy
import hashlib
import json
import sys
from dataclasses import dataclass

import numpy as np

from .discretization import EDGES, ConstraintMode
from .energy import EnergyParams, LoadSpec
from .errors import ConfigError, InvalidInputError
from .solver import SolverOptions

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ScenarioConfig", "load_config", "parse_config", "DEFAULTS"]

DEFAULTS = {
    "geometry": {"Lx": 2.0, "Ly": 1.0},
    "mesh": {"nx": 16, "ny": 8},
    "model": {"mode": "unconstrained"},
    "energy": {"p": 4.0, "q": 4.0, "s": 2.0, "a1": 1.0, "a2": 1.0, "a3": 0.0,
               "c1": 1.0, "c2": 1.0, "offset": 0.0},
    "loads": {"b": [0.0, 0.0, 0.0], "g": [0.0, 0.0, 0.0],
              "tau": [0.0, 0.0, 0.0], "mu": [0.0, 0.0, 0.0]},
    "boundary": {"gamma": ["left", "right"], "stretch": 1.0},
    "solver": {"max_iter": 5000, "gtol": 1e-8, "armijo": 1e-4, "backtrack": 0.5,
               "initial_step": 1.0, "max_halvings": 60, "history": 10, "energy_slack": 1e-14},
    "run": {"seed": 0, "perturbation": 1e-3, "initial_director": [0.0, 0.0, 1.0],
            "initial_thickness": 1.0, "out": "out"},
    "gradcheck": {"nx": 2, "ny": 2, "tolerance": 1e-5, "step": 1e-6, "noise": 0.05},
    "convexity": {"joint_samples": 10000, "rank_one_attempts": 100000,
                  "planar_attempts": 100000, "grid": 41},
    "refine": {"levels": 3},
}

_INTS = {("mesh", "nx"), ("mesh", "ny"), ("solver", "max_iter"), ("solver", "max_halvings"),
         ("solver", "history"), ("run", "seed"), ("gradcheck", "nx"), ("gradcheck", "ny"),
         ("convexity", "joint_samples"), ("convexity", "rank_one_attempts"),
         ("convexity", "planar_attempts"), ("convexity", "grid"), ("refine", "levels")}
_STRINGS = {("model", "mode"), ("run", "out")}
_VECTORS = {("loads", k) for k in ("b", "g", "tau", "mu")} | {("run", "initial_director")}


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Validated scenario; ``raw`` is the complete normalized dictionary."""

    raw: dict
    source: str = "<memory>"

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def Lx(self):
        return self.raw["geometry"]["Lx"]

    @property
    def Ly(self):
        return self.raw["geometry"]["Ly"]

    @property
    def nx(self):
        return self.raw["mesh"]["nx"]

    @property
    def ny(self):
        return self.raw["mesh"]["ny"]

    @property
    def mode(self):
        return ConstraintMode.parse(self.raw["model"]["mode"])

    @property
    def params(self):
        return EnergyParams(**self.raw["energy"])

    @property
    def loads(self):
        return LoadSpec(**{k: tuple(v) for k, v in self.raw["loads"].items()})

    @property
    def gamma(self):
        return tuple(self.raw["boundary"]["gamma"])

    @property
    def stretch(self):
        return self.raw["boundary"]["stretch"]

    @property
    def solver(self):
        return SolverOptions(**self.raw["solver"])

    @property
    def seed(self):
        return self.raw["run"]["seed"]

    @property
    def out(self):
        return self.raw["run"]["out"]

    def replace(self, **sections):
        """Copy with some keys overridden, e.g. ``replace(energy={"a2": 0.1})``; revalidated."""
        raw = copy.deepcopy(self.raw)
        for sec, vals in sections.items():
            raw.setdefault(sec, {}).update(vals)
        return parse_config(raw, self.source)

    def canonical(self):
        """Normalized config without the output location (hashed into every output)."""
        raw = copy.deepcopy(self.raw)
        raw["run"].pop("out", None)
        return raw

    @property
    def hash(self):
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _fail(where, msg):
    raise ConfigError(f"{where}: {msg}")


def _number(where, v, kind):
    if isinstance(v, bool):
        _fail(where, f"expected {kind}, got a boolean")
    if kind == "integer":
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        if not isinstance(v, int):
            _fail(where, f"expected an integer, got {v!r}")
        return v
    if not isinstance(v, (int, float)) or not np.isfinite(v):
        _fail(where, f"expected a finite number, got {v!r}")
    return float(v)


def parse_config(data, source="<memory>"):
    """Validate a decoded mapping and fill in defaults."""
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a table")
    raw = copy.deepcopy(DEFAULTS)
    for sec, body in data.items():
        if sec not in DEFAULTS:
            _fail(f"{source}: [{sec}]", f"unknown section (allowed: {', '.join(DEFAULTS)})")
        if not isinstance(body, dict):
            _fail(f"{source}: [{sec}]", "must be a table")
        for key, v in body.items():
            where = f"{source}: {sec}.{key}"
            if key not in DEFAULTS[sec]:
                _fail(where, f"unknown key (allowed: {', '.join(DEFAULTS[sec])})")
            if (sec, key) in _INTS:
                v = _number(where, v, "integer")
            elif (sec, key) in _STRINGS:
                if not isinstance(v, str):
                    _fail(where, f"expected a string, got {v!r}")
            elif (sec, key) in _VECTORS:
                if not isinstance(v, list) or len(v) != 3:
                    _fail(where, "expected a list of 3 numbers")
                v = [_number(where, x, "number") for x in v]
            elif (sec, key) == ("boundary", "gamma"):
                if isinstance(v, str):
                    v = [v]
                if not isinstance(v, list) or not all(isinstance(e, str) for e in v):
                    _fail(where, "expected a list of edge names")
            else:
                v = _number(where, v, "number")
            raw[sec][key] = v
    _validate(raw, source)
    return ScenarioConfig(raw, source)


def _validate(raw, source):
    g, m = raw["geometry"], raw["mesh"]
    for k in ("Lx", "Ly"):
        if not g[k] > 0:
            _fail(f"{source}: geometry.{k}", "must be positive")
    for k in ("nx", "ny"):
        if m[k] < 1:
            _fail(f"{source}: mesh.{k}", "must be >= 1")
    if m["ny"] % 2:
        _fail(f"{source}: mesh.ny", "must be even (the wrinkle metric reads the midline y = Ly/2)")
    try:
        ConstraintMode.parse(raw["model"]["mode"])
    except InvalidInputError as exc:
        _fail(f"{source}: model.mode", str(exc))
    for sec, build in (("energy", EnergyParams), ("solver", SolverOptions)):
        try:
            build(**raw[sec])
        except InvalidInputError as exc:
            _fail(f"{source}: [{sec}]", str(exc))
    b = raw["boundary"]
    if not b["gamma"]:
        _fail(f"{source}: boundary.gamma", "Dirichlet region must contain at least one edge")
    for e in b["gamma"]:
        if e not in EDGES:
            _fail(f"{source}: boundary.gamma", f"unknown edge {e!r} (allowed: {', '.join(EDGES)})")
    if len(set(b["gamma"])) != len(b["gamma"]):
        _fail(f"{source}: boundary.gamma", "repeated edge")
    b["gamma"] = [e for e in EDGES if e in b["gamma"]]
    if not b["stretch"] > 0:
        _fail(f"{source}: boundary.stretch", "stretch factor must be positive")
    r = raw["run"]
    if r["seed"] < 0:
        _fail(f"{source}: run.seed", "must be non-negative")
    if r["perturbation"] < 0:
        _fail(f"{source}: run.perturbation", "must be non-negative")
    gc = raw["gradcheck"]
    if gc["nx"] < 1 or gc["ny"] < 1:
        _fail(f"{source}: gradcheck", "nx and ny must be >= 1")
    if gc["tolerance"] < 0:
        _fail(f"{source}: gradcheck.tolerance", "must be non-negative")
    if not gc["step"] > 0 or gc["noise"] < 0:
        _fail(f"{source}: gradcheck", "step must be positive and noise non-negative")
    cv = raw["convexity"]
    for k in ("joint_samples", "rank_one_attempts", "planar_attempts"):
        if cv[k] < 1:
            _fail(f"{source}: convexity.{k}", "must be >= 1")
    if cv["grid"] < 3:
        _fail(f"{source}: convexity.grid", "must be >= 3")
    if raw["refine"]["levels"] < 2:
        _fail(f"{source}: refine.levels", "must be >= 2")


def load_config(path):
    """Read a ``.toml`` or ``.json`` scenario file.

    Syntax errors are reported with the line number of the decoder; schema
    errors name the offending ``section.key``.
    """
    path = str(path)
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    if path.endswith(".json"):
        try:
            data = json.loads(blob.decode())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    else:
        try:
            data = tomllib.loads(blob.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, path)
