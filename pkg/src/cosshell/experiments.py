"""Scenario runs, refinement studies, gradient checks and convexity reports.

Every routine takes a validated :class:`~cosshell.config.ScenarioConfig`,
computes its result, and only then writes output files, so a failure before
the end leaves the output directory untouched. All files are deterministic
and carry the config hash; wall-clock time goes to ``timing.json`` so that
``summary.json`` is reproducible byte for byte.
"""
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import convexity as cx
from .discretization import (ConstraintMode, DiscreteEnergy, FieldState, Problem, build_grid,
                             constraint_residuals, prolongate)
from .energy import phi_membrane_planar, phi_reference
from .errors import DegenerateStateError, InfeasibleStateError, InvalidInputError
from .solver import minimize

__all__ = [
    "RunSummary",
    "wrinkle_metrics",
    "build_problem",
    "initial_state",
    "solve",
    "run",
    "refine_study",
    "gradcheck",
    "check_convexity",
    "write_fields_csv",
    "read_fields_csv",
    "check_start",
    "FIELDS_HEADER",
]

FIELDS_HEADER = "x,y,f1,f2,f3,d1,d2,d3,t"


@dataclass
class RunSummary:
    energy: float
    iterations: int
    reason: str
    min_J: float
    grad_inf: float
    residual_unit: float
    residual_normal: float
    wrinkle_count: int
    wrinkle_amplitude: float
    min_J_iterates: float
    max_energy_increase: float
    n_evaluations: int
    config_hash: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {k: getattr(self, k) for k in (
            "config_hash", "energy", "iterations", "reason", "min_J", "grad_inf",
            "residual_unit", "residual_normal", "wrinkle_count", "wrinkle_amplitude",
            "min_J_iterates", "max_energy_increase", "n_evaluations")}
        out.update(self.extra)
        return out


def wrinkle_metrics(nodes, f3, Lx, Ly):
    """Sign changes of detrended ``f3`` along ``y = Ly/2`` and the largest detrended amplitude.

    ``f3`` is detrended by the least-squares plane over all nodes. Values with
    magnitude at most ``1e-9 min(Lx, Ly)`` are treated as zero and skipped.
    """
    nodes = np.asarray(nodes, dtype=float)
    f3 = np.asarray(f3, dtype=float)
    A = np.column_stack([np.ones(len(f3)), nodes])
    coef, *_ = np.linalg.lstsq(A, f3, rcond=None)
    r = f3 - A @ coef
    floor = 1e-9 * min(Lx, Ly)
    on_mid = np.isclose(nodes[:, 1], 0.5 * Ly, rtol=0.0, atol=1e-12 * Ly)
    mid = r[on_mid][np.argsort(nodes[on_mid, 0], kind="stable")]
    s = np.sign(mid[np.abs(mid) > floor])
    count = int(np.count_nonzero(s[1:] != s[:-1]))
    return count, float(np.max(np.abs(r)))


def build_problem(cfg, nx=None, ny=None):
    """Mesh and problem of a scenario; Dirichlet data ``f_o = (lambda x, y, 0)``, ``d_o = e3``."""
    mesh = build_grid(nx or cfg.nx, ny or cfg.ny, cfg.Lx, cfg.Ly)
    lam = cfg.stretch
    X, Y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    f_o = np.column_stack([lam * X, Y, np.zeros_like(X)])
    d_o = np.tile([0.0, 0.0, 1.0], (mesh.n_nodes, 1))
    return Problem(mesh, cfg.gamma, f_o, d_o, cfg.params, cfg.loads, cfg.mode)


def initial_state(cfg, problem):
    """Start state of a scenario.

    ``f`` is the affine boundary data plus ``A sin(pi x/Lx) sin(pi y/Ly)`` in
    ``f3`` with ``A = perturbation * min(Lx, Ly)``. Free-node directors are
    ``run.initial_director`` (Dirichlet nodes keep ``d_o``), thicknesses
    ``run.initial_thickness``; modes that reconstruct ``d`` ignore the former.
    """
    m = problem.mesh
    X, Y = m.nodes[:, 0], m.nodes[:, 1]
    f = np.array(problem.f_o, dtype=float)
    r = cfg["run"]
    amp = r["perturbation"] * min(cfg.Lx, cfg.Ly)
    f[:, 2] += amp * np.sin(np.pi * X / cfg.Lx) * np.sin(np.pi * Y / cfg.Ly)
    d = np.array(problem.d_o, dtype=float)
    d[~problem.dirichlet_mask] = r["initial_director"]
    return FieldState(f, d, np.full(m.n_nodes, r["initial_thickness"]))


def _summarize(cfg, problem, sol):
    unit, normal = constraint_residuals(problem.mesh, sol.state)
    count, amp = wrinkle_metrics(problem.mesh.nodes, sol.state.f[:, 2], cfg.Lx, cfg.Ly)
    hist = np.asarray(sol.energy_history)
    inc = float(np.max(np.diff(hist))) if len(hist) > 1 else 0.0
    return RunSummary(
        energy=sol.energy, iterations=sol.iterations, reason=sol.reason, min_J=sol.min_J,
        grad_inf=sol.grad_inf, residual_unit=unit, residual_normal=normal,
        wrinkle_count=count, wrinkle_amplitude=amp,
        min_J_iterates=float(np.min(sol.min_J_history)), max_energy_increase=inc,
        n_evaluations=sol.n_evaluations, config_hash=cfg.hash)


def solve(cfg, start=None, problem=None):
    """Minimize one scenario; returns ``(problem, solution, summary)``.

    Raises :class:`InvalidInputError` for an infeasible start.
    """
    problem = problem or build_problem(cfg)
    start = start or initial_state(cfg, problem)
    sol = minimize(problem, start, cfg.solver)
    return problem, sol, _summarize(cfg, problem, sol)


# --- files ------------------------------------------------------------------

def _json_dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_fields_csv(path, mesh, state, config_hash):
    t = state.t
    with open(path, "w") as fh:
        fh.write(f"# config_sha256={config_hash}\n{FIELDS_HEADER}\n")
        for k in range(mesh.n_nodes):
            vals = [*mesh.nodes[k], *state.f[k], *state.d[k]]
            row = ",".join("%.17g" % v for v in vals)
            fh.write(row + "," + ("" if t is None else "%.17g" % t[k]) + "\n")


def read_fields_csv(path):
    """Read a nodal CSV back into ``(nodes, f, d, t)``; ``t`` is None when blank."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    if lines[0] != FIELDS_HEADER:
        raise InvalidInputError(f"unexpected header {lines[0]!r}")
    rows = [ln.split(",") for ln in lines[1:]]
    a = np.array([[float(v) for v in r[:8]] for r in rows])
    t = None if rows[0][8] == "" else np.array([float(r[8]) for r in rows])
    return a[:, :2], a[:, 2:5], a[:, 5:8], t


# --- commands -----------------------------------------------------------------

def run(cfg, out=None):
    """Solve the scenario and write ``fields.csv``, ``summary.json`` and ``timing.json``."""
    out = out or cfg.out
    t0 = time.perf_counter()
    problem, sol, summary = solve(cfg)
    wall = time.perf_counter() - t0
    os.makedirs(out, exist_ok=True)
    write_fields_csv(os.path.join(out, "fields.csv"), problem.mesh, sol.state, cfg.hash)
    _json_dump(summary.to_dict(), os.path.join(out, "summary.json"))
    _json_dump({"config_hash": cfg.hash, "wall_seconds": wall}, os.path.join(out, "timing.json"))
    return summary, sol


def refine_study(cfg, levels=None, out=None):
    """Solve on ``levels`` nested meshes, each warm-started from the prolongated coarser minimizer.

    Returns a list of row dictionaries (also written to ``refine.csv``).
    """
    levels = levels or cfg["refine"]["levels"]
    if levels < 2:
        raise InvalidInputError("refine study needs at least 2 levels")
    rows = []
    start = None
    nx, ny = cfg.nx, cfg.ny
    for lev in range(levels):
        problem = build_problem(cfg, nx, ny)
        if start is not None:
            start = FieldState(start.f, start.d, start.t if start.t is not None
                               else np.ones(problem.mesh.n_nodes))
        problem, sol, s = solve(cfg, start, problem)
        rows.append({"level": lev, "nx": nx, "ny": ny, "h": problem.mesh.hx,
                     "energy": s.energy, "wrinkle_count": s.wrinkle_count,
                     "wrinkle_amplitude": s.wrinkle_amplitude, "iterations": s.iterations,
                     "reason": s.reason, "min_J_iterates": s.min_J_iterates,
                     "max_energy_increase": s.max_energy_increase,
                     "residual_normal": s.residual_normal})
        _, start = prolongate(problem.mesh, sol.state)
        nx, ny = 2 * nx, 2 * ny
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    cols = list(rows[0])
    with open(os.path.join(out, "refine.csv"), "w") as fh:
        fh.write(f"# config_sha256={cfg.hash}\n" + ",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(v if isinstance(v, str) else "%.17g" % v for v in r.values()) + "\n")
    return rows


def _random_feasible(energy, problem, rng, noise):
    m = problem.mesh
    L = min(m.Lx, m.Ly)
    for _ in range(100):
        f = np.array(problem.f_o) + noise * L * rng.standard_normal((m.n_nodes, 3))
        d = np.array(problem.d_o) + noise * rng.standard_normal((m.n_nodes, 3))
        t = 1.0 + noise * rng.uniform(-1.0, 1.0, m.n_nodes)
        try:
            x = energy.x_from_state(FieldState(f, d, t))
        except InvalidInputError:
            continue
        if energy.is_feasible(x):
            return x
    raise InvalidInputError("could not draw a feasible state for the gradient check")


def gradcheck(cfg, out=None):
    """Central-difference check of the assembled gradient on a small mesh.

    Returns a report dictionary; ``passed`` compares the max relative error
    ``max_i |g_fd - g| / max(|g|_inf, 1e-300)`` with ``gradcheck.tolerance``.
    """
    gc = cfg["gradcheck"]
    problem = build_problem(cfg, gc["nx"], gc["ny"])
    energy = DiscreteEnergy(problem)
    rng = np.random.default_rng(cfg.seed)
    x = _random_feasible(energy, problem, rng, gc["noise"])
    g = energy.gradient(x)
    fd = np.empty_like(g)
    for i in range(len(x)):
        h = gc["step"] * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (energy.energy(x + e) - energy.energy(x - e)) / (2 * h)
    err = float(np.max(np.abs(fd - g)) / max(float(np.max(np.abs(g))), 1e-300))
    report = {"config_hash": cfg.hash, "mode": problem.mode.value, "n_dofs": int(len(x)),
              "max_rel_error": err, "tolerance": gc["tolerance"], "passed": err <= gc["tolerance"]}
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    _json_dump(report, os.path.join(out, "gradcheck.json"))
    return report


def check_convexity(cfg, out=None):
    """Joint-convexity, rank-one and blow-up probes with the scenario's material and seed."""
    cv = cfg["convexity"]
    params = cfg.params
    seed = cfg.seed
    joint = cx.check_joint_convexity(lambda a: phi_reference(params, a), cv["joint_samples"], seed)
    planar_joint = cx.check_joint_convexity(lambda a: phi_membrane_planar(params, a),
                                            cv["joint_samples"], seed, dim=5, positive_index=4)
    full = cx.find_rank_one_violation(cx.membrane_energy(params), cv["rank_one_attempts"], seed,
                                      grid=cv["grid"])
    planar = cx.find_rank_one_violation(cx.planar_membrane_energy(params), cv["planar_attempts"],
                                        seed, planar=True, grid=cv["grid"])
    report = {
        "config_hash": cfg.hash,
        "seed": seed,
        "joint_convexity": joint.to_dict(),
        "planar_joint_convexity": planar_joint.to_dict(),
        "rank_one_full": full.to_dict(),
        "rank_one_planar": planar.to_dict(),
        "blowup": [[j, g] for j, g in cx.blowup_scan(params.c1, params.c2, 8)],
    }
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    _json_dump(report, os.path.join(out, "convexity.json"))
    return report


def check_start(cfg):
    """Raise :class:`InvalidInputError` if the scenario's start state is infeasible."""
    problem = build_problem(cfg)
    energy = DiscreteEnergy(problem)
    try:
        x = energy.x_from_state(initial_state(cfg, problem))
        if energy.mode is ConstraintMode.UNIT_DIRECTOR and np.any(
                np.linalg.norm(x[energy.n_f:].reshape(-1, 3), axis=1) == 0):
            raise DegenerateStateError("zero director")
        ok = energy.is_feasible(x)
    except (InfeasibleStateError, DegenerateStateError):
        ok = False
    if not ok:
        raise InvalidInputError("start state is infeasible (J <= 0 or t <= 0 somewhere)")
    return problem

