"""Feasibility-preserving limited-memory quasi-Newton descent for ``E_h``."""
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .discretization import ConstraintMode, DiscreteEnergy, FieldState, Problem, nodal_normals
from .errors import DegenerateStateError, InfeasibleStateError, InvalidInputError

__all__ = [
    "SolverOptions",
    "Solution",
    "minimize",
    "project_unit_director",
    "nodal_normals",
]

log = logging.getLogger(__name__)

_WOLFE_DELTA = 0.1
_WOLFE_SIGMA = 0.9


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 5000
    gtol: float = 1e-8
    armijo: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_halvings: int = 60
    history: int = 10
    energy_slack: float = 1e-14

    def __post_init__(self):
        if not self.gtol > 0:
            raise InvalidInputError("gtol must be positive")
        if not (0 < self.armijo < 1 and 0 < self.backtrack < 1):
            raise InvalidInputError("armijo and backtrack must lie in (0, 1)")
        if self.max_iter < 0 or self.max_halvings < 1 or self.history < 0:
            raise InvalidInputError("max_iter >= 0, max_halvings >= 1 and history >= 0 required")
        if not self.initial_step > 0:
            raise InvalidInputError("initial_step must be positive")
        if not self.energy_slack >= 0:
            raise InvalidInputError("energy_slack must be non-negative")


@dataclass(frozen=True, eq=False)
class Solution:
    state: FieldState
    x: np.ndarray
    energy: float
    energy_history: list
    min_J_history: list
    iterations: int
    grad_inf: float
    min_J: float
    min_t: float
    reason: str
    n_evaluations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.reason == "converged"


def project_unit_director(state):
    """Replace every nodal director by ``d / |d|``."""
    d = np.asarray(state.d, dtype=float)
    nd = np.linalg.norm(d, axis=1)
    if np.any(nd == 0):
        raise DegenerateStateError(f"zero nodal director at node {int(np.flatnonzero(nd == 0)[0])}")
    return FieldState(np.array(state.f, dtype=float), d / nd[:, None],
                      None if state.t is None else np.array(state.t, dtype=float))


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _normalize_director_block(energy, x):
    x = x.copy()
    raw = x[energy.n_f:].reshape(-1, 3)
    nr = np.linalg.norm(raw, axis=1)
    if np.any(nr == 0):
        raise DegenerateStateError("zero nodal director")
    raw /= nr[:, None]
    return x


def minimize(problem, start, opts=None, callback=None):
    """Minimize the discrete energy from ``start``.

    ``problem`` is a :class:`Problem` or an already built
    :class:`DiscreteEnergy`; ``start`` is a :class:`FieldState` or a DOF
    vector. The start must be feasible (``J > 0`` at every quadrature point,
    ``t > 0`` where used); otherwise :class:`InvalidInputError` is raised.

    Each iteration takes an L-BFGS direction (steepest descent when the
    direction is not a descent direction or no curvature pair is stored),
    halves trial steps until the trial state is feasible and then backtracks
    to the first step with Armijo decrease and a strict energy decrease.

    Near a minimizer energy differences drown in rounding long before the
    gradient does. A trial whose energy lies within ``energy_slack`` of the
    current value is therefore also accepted when it meets the approximate
    Wolfe conditions of Hager and Zhang,
    ``sigma g.p <= g_t.p <= (2 delta - 1) g.p`` with ``delta = 0.1`` and
    ``sigma = 0.9``, which only use the gradient.
    """
    opts = opts or SolverOptions()
    energy = problem if isinstance(problem, DiscreteEnergy) else DiscreteEnergy(problem)
    x = energy.x_from_state(start) if isinstance(start, FieldState) else np.array(start, dtype=float)
    unit = energy.mode is ConstraintMode.UNIT_DIRECTOR
    if unit:
        try:
            x = _normalize_director_block(energy, x)
        except DegenerateStateError:
            raise InvalidInputError("zero director in start state") from None

    try:
        E, g = energy.energy_and_gradient(x)
    except (InfeasibleStateError, DegenerateStateError) as exc:
        raise InvalidInputError(f"infeasible start: {exc}") from exc
    n_eval = 1
    Jmin, tmin = energy.feasibility(x)
    history = [E]
    Jhist = [Jmin]
    pairs = deque(maxlen=opts.history)
    use_memory = True
    reason = "max_iterations"
    it = 0

    def gnorm(v):
        return float(np.max(np.abs(v))) if v.size else 0.0

    while True:
        if gnorm(g) <= opts.gtol:
            reason = "converged"
            break
        if it >= opts.max_iter:
            reason = "max_iterations"
            break

        steepest = not (use_memory and pairs)
        p = -g if steepest else _two_loop(g, list(pairs))
        slope = float(g @ p)
        if not (np.isfinite(slope) and slope < 0):
            p, slope, steepest = -g, -float(g @ g), True

        accepted = None
        for attempt in (0, 1):
            alpha = opts.initial_step
            for _ in range(opts.max_halvings):
                xt = x + alpha * p
                try:
                    Et, gt = energy.energy_and_gradient(xt)
                    n_eval += 1
                except (InfeasibleStateError, DegenerateStateError):
                    n_eval += 1
                    alpha *= 0.5
                    continue
                if Et < E and Et <= E + opts.armijo * alpha * slope:
                    accepted = (xt, Et, gt)
                    break
                if Et <= E + opts.energy_slack:
                    dt = float(gt @ p)
                    if _WOLFE_SIGMA * slope <= dt <= (2.0 * _WOLFE_DELTA - 1.0) * slope:
                        accepted = (xt, Et, gt)
                        break
                alpha *= opts.backtrack
            if accepted is not None or steepest:
                break
            # quasi-Newton direction failed: retry once along the negative gradient
            p, slope, steepest = -g, -float(g @ g), True
            pairs.clear()
        if accepted is None:
            reason = "line_search_failure"
            break

        xt, Et, gt = accepted
        if unit:
            xt = _normalize_director_block(energy, xt)
            Et, gt = energy.energy_and_gradient(xt)
            n_eval += 1
        s = xt - x
        y = gt - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
            use_memory = True
        else:
            use_memory = False
        x, E, g = xt, Et, gt
        it += 1
        Jmin, tmin = energy.feasibility(x)
        history.append(E)
        Jhist.append(Jmin)
        if callback is not None:
            callback(it, x, E, g)
        if it % 500 == 0:
            log.debug("iter %d  E=%.12g  |g|inf=%.3e  minJ=%.4f", it, E, gnorm(g), Jmin)

    state = energy.state_from_x(x)
    return Solution(state=state, x=x, energy=E, energy_history=history, min_J_history=Jhist,
                    iterations=it, grad_inf=gnorm(g), min_J=Jmin, min_t=tmin, reason=reason,
                    n_evaluations=n_eval)
