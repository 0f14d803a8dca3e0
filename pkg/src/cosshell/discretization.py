"""Bilinear finite elements on a structured rectangular grid.

Nodal fields are interpolated with Q1 shape functions and integrated with
2x2 Gauss quadrature. Every interpolation/differentiation step is a fixed
sparse matrix built once per mesh, so energy and gradient assembly reduce to
pointwise kernel calls plus sparse products (and their transposes), which
keeps the reduction order fixed and the results bitwise reproducible.

Nodes are numbered row by row (``n = j * (nx + 1) + i``), elements likewise,
and quadrature points element by element (four per element).
"""
import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .energy import EnergyParams, LoadSpec, reference_density
from .errors import DegenerateStateError, InfeasibleStateError, InvalidInputError
from .kinematics import minors as _minors

__all__ = [
    "Mesh",
    "build_grid",
    "EDGES",
    "ConstraintMode",
    "FieldState",
    "Problem",
    "QuadKinematics",
    "DiscreteEnergy",
    "evaluate_kinematics",
    "assemble_energy",
    "assemble_gradient",
    "load_value",
    "prolongate",
    "nodal_normals",
    "constraint_residuals",
]

EDGES = ("left", "right", "bottom", "top")
_GP = 1.0 / np.sqrt(3.0)
_LOCAL = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _shape(xi, eta):
    N = 0.25 * (1 + _LOCAL[:, 0] * xi) * (1 + _LOCAL[:, 1] * eta)
    dxi = 0.25 * _LOCAL[:, 0] * (1 + _LOCAL[:, 1] * eta)
    deta = 0.25 * _LOCAL[:, 1] * (1 + _LOCAL[:, 0] * xi)
    return N, dxi, deta


@dataclass(frozen=True, eq=False)
class Mesh:
    nx: int
    ny: int
    Lx: float
    Ly: float
    nodes: np.ndarray
    elements: np.ndarray
    qpoints: np.ndarray
    qweights: np.ndarray
    interp: sp.csr_matrix
    ddx: sp.csr_matrix
    ddy: sp.csr_matrix
    center_ddx: sp.csr_matrix
    center_ddy: sp.csr_matrix
    node_elem: sp.csr_matrix

    @property
    def hx(self):
        return self.Lx / self.nx

    @property
    def hy(self):
        return self.Ly / self.ny

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_qpoints(self):
        return len(self.qweights)

    def node_index(self, i, j):
        return j * (self.nx + 1) + i

    def edge_nodes(self, edge):
        """Node indices along ``edge``, ordered along the edge."""
        I, J = self.nx, self.ny
        if edge == "left":
            return np.array([self.node_index(0, j) for j in range(J + 1)])
        if edge == "right":
            return np.array([self.node_index(I, j) for j in range(J + 1)])
        if edge == "bottom":
            return np.array([self.node_index(i, 0) for i in range(I + 1)])
        if edge == "top":
            return np.array([self.node_index(i, J) for i in range(I + 1)])
        raise InvalidInputError(f"unknown edge {edge!r}; expected one of {EDGES}")

    def midline_nodes(self):
        """Nodes on the horizontal line y = Ly/2 (requires even ny)."""
        if self.ny % 2:
            raise InvalidInputError("midline requires an even number of rows of elements")
        return np.array([self.node_index(i, self.ny // 2) for i in range(self.nx + 1)])

    def integrate(self, values):
        """Quadrature of per-point values of shape ``(nq, ...)``."""
        return np.tensordot(self.qweights, values, axes=(0, 0))


def build_grid(nx, ny, Lx=1.0, Ly=1.0):
    """Uniform ``nx`` by ``ny`` grid of bilinear elements on ``[0, Lx] x [0, Ly]``."""
    if isinstance(nx, bool) or isinstance(ny, bool) or int(nx) != nx or int(ny) != ny:
        raise InvalidInputError("nx and ny must be integers")
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise InvalidInputError("nx and ny must be >= 1")
    if not (np.isfinite(Lx) and np.isfinite(Ly) and Lx > 0 and Ly > 0):
        raise InvalidInputError("Lx and Ly must be positive")
    Lx, Ly = float(Lx), float(Ly)
    hx, hy = Lx / nx, Ly / ny
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    base = (jj * (nx + 1) + ii).ravel()
    elements = np.column_stack([base, base + 1, base + nx + 2, base + nx + 1])
    ne = len(elements)
    nn = len(nodes)

    gauss = [(-_GP, -_GP), (_GP, -_GP), (_GP, _GP), (-_GP, _GP)]
    Nq = np.empty((4, 4))
    Dxq = np.empty((4, 4))
    Dyq = np.empty((4, 4))
    for g, (xi, eta) in enumerate(gauss):
        N, dxi, deta = _shape(xi, eta)
        Nq[g], Dxq[g], Dyq[g] = N, dxi * 2.0 / hx, deta * 2.0 / hy
    rows = (4 * np.arange(ne)[:, None, None] + np.arange(4)[None, :, None]) * np.ones((1, 1, 4), int)
    cols = np.broadcast_to(elements[:, None, :], (ne, 4, 4))

    def op(local, nrows, r, c):
        vals = np.broadcast_to(local, r.shape)
        return sp.csr_matrix((vals.ravel(), (r.ravel(), c.ravel())), shape=(nrows, nn))

    interp = op(Nq, 4 * ne, rows, cols)
    ddx = op(Dxq, 4 * ne, rows, cols)
    ddy = op(Dyq, 4 * ne, rows, cols)

    _, cdxi, cdeta = _shape(0.0, 0.0)
    crow = np.repeat(np.arange(ne)[:, None], 4, axis=1)
    center_ddx = op(cdxi * 2.0 / hx, ne, crow, elements)
    center_ddy = op(cdeta * 2.0 / hy, ne, crow, elements)
    node_elem = sp.csr_matrix(
        (np.full(4 * ne, hx * hy), (elements.ravel(), crow.ravel())), shape=(nn, ne))

    qpoints = interp @ nodes
    qweights = np.full(4 * ne, 0.25 * hx * hy)
    return Mesh(nx, ny, Lx, Ly, nodes, elements, qpoints, qweights,
                interp, ddx, ddy, center_ddx, center_ddy, node_elem)


class ConstraintMode(enum.Enum):
    UNCONSTRAINED = "unconstrained"
    UNIT_DIRECTOR = "unit_director"
    NORMAL_DIRECTOR = "normal_director"
    KIRCHHOFF_LOVE = "kirchhoff_love"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"unitdirector": "unit_director", "normaldirector": "normal_director",
                   "kirchhofflove": "kirchhoff_love", "kl": "kirchhoff_love"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidInputError(
                f"unknown constraint mode {value!r}; expected one of {[m.value for m in cls]}") from None


@dataclass(frozen=True, eq=False)
class FieldState:
    """Nodal deformation ``f`` and director ``d`` (both ``(nn, 3)``).

    ``t`` is the nodal director length used by the normal-director mode and
    is ``None`` otherwise.
    """

    f: np.ndarray
    d: np.ndarray
    t: np.ndarray = None

    def copy(self):
        return FieldState(self.f.copy(), self.d.copy(), None if self.t is None else self.t.copy())


@dataclass(frozen=True)
class QuadKinematics:
    F: np.ndarray
    G: np.ndarray
    d: np.ndarray
    J: np.ndarray
    d_interp: np.ndarray = None

    @property
    def minors(self):
        return _minors(self.F, self.G)


@dataclass(frozen=True, eq=False)
class Problem:
    """Mesh, Dirichlet region and data, material, loads and constraint mode.

    ``f_o`` and ``d_o`` are nodal arrays; only rows of nodes on the Dirichlet
    region are read. ``coefficient_fields`` optionally maps a coefficient
    name (``a1``, ``a2``, ``a3``, ``c1``, ``c2``) to per-element values.
    """

    mesh: Mesh
    gamma: tuple
    f_o: np.ndarray
    d_o: np.ndarray
    params: EnergyParams = field(default_factory=EnergyParams)
    loads: LoadSpec = field(default_factory=LoadSpec)
    mode: ConstraintMode = ConstraintMode.UNCONSTRAINED
    coefficient_fields: dict = None

    def __post_init__(self):
        gamma = tuple(self.gamma)
        if not gamma:
            raise InvalidInputError("the Dirichlet region must contain at least one edge")
        for e in gamma:
            if e not in EDGES:
                raise InvalidInputError(f"unknown edge {e!r}; expected one of {EDGES}")
        object.__setattr__(self, "gamma", tuple(e for e in EDGES if e in gamma))
        object.__setattr__(self, "mode", ConstraintMode.parse(self.mode))
        nn = self.mesh.n_nodes
        for name in ("f_o", "d_o"):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != (nn, 3) or not np.all(np.isfinite(a)):
                raise InvalidInputError(f"{name} must be a finite ({nn}, 3) array")
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if self.coefficient_fields:
            ne = self.mesh.n_elements
            for k, v in self.coefficient_fields.items():
                if k not in ("a1", "a2", "a3", "c1", "c2"):
                    raise InvalidInputError(f"unknown coefficient field {k!r}")
                if np.shape(v) != (ne,):
                    raise InvalidInputError(f"coefficient field {k!r} must have shape ({ne},)")

    @property
    def gamma_complement(self):
        return tuple(e for e in EDGES if e not in self.gamma)

    @property
    def dirichlet_mask(self):
        mask = np.zeros(self.mesh.n_nodes, dtype=bool)
        for e in self.gamma:
            mask[self.mesh.edge_nodes(e)] = True
        return mask

    def with_mode(self, mode):
        return replace(self, mode=ConstraintMode.parse(mode))

    def with_params(self, params):
        return replace(self, params=params)


def nodal_normals(mesh, f, return_sums=False):
    """Unit nodal normals: area-weighted average of element-center ``f,1 x f,2``.

    Raises :class:`DegenerateStateError` where the weighted sum vanishes.
    """
    f = np.asarray(f, dtype=float)
    f1c = mesh.center_ddx @ f
    f2c = mesh.center_ddy @ f
    c = np.cross(f1c, f2c)
    s = mesh.node_elem @ c
    ns = np.linalg.norm(s, axis=1)
    if np.any(ns == 0.0) or not np.all(np.isfinite(ns)):
        k = int(np.flatnonzero(~(ns > 0))[0])
        raise DegenerateStateError(f"zero normal sum at node {k}")
    n = s / ns[:, None]
    if return_sums:
        return n, (f1c, f2c, ns)
    return n


def _normals_vjp(mesh, n, aux, gn):
    """Pull back a cotangent ``gn`` on nodal normals to the nodal deformation."""
    f1c, f2c, ns = aux
    gs = (gn - np.einsum("ni,ni->n", gn, n)[:, None] * n) / ns[:, None]
    gc = mesh.node_elem.T @ gs
    return mesh.center_ddx.T @ np.cross(f2c, gc) + mesh.center_ddy.T @ np.cross(gc, f1c)


def _edge_weights(mesh, edges):
    """``int_{edges} N_a ds`` for every node, by 2-point Gauss per edge segment."""
    w = np.zeros(mesh.n_nodes)
    gauss = (0.5 - 0.5 * _GP, 0.5 + 0.5 * _GP)
    for e in edges:
        nodes = mesh.edge_nodes(e)
        h = mesh.hy if e in ("left", "right") else mesh.hx
        for a, b in zip(nodes[:-1], nodes[1:]):
            for s in gauss:
                w[a] += 0.5 * h * (1.0 - s)
                w[b] += 0.5 * h * s
    return w


def load_value(loads, state, mesh, free_edges):
    """Dead-load functional and its (state-independent) nodal gradients.

    ``free_edges`` are the edges carrying tractions and couples. Returns
    ``(L, dL/df, dL/dd)`` with the gradients of shape ``(nn, 3)``.
    """
    f = np.asarray(state.f, dtype=float)
    d = np.asarray(state.d, dtype=float)
    if f.shape != (mesh.n_nodes, 3) or d.shape != (mesh.n_nodes, 3):
        raise InvalidInputError("field arrays do not match the mesh")
    gf, gd = _load_gradients(loads, mesh, tuple(free_edges))
    L = float(np.sum(gf * f) + np.sum(gd * d))
    return L, gf, gd


def _load_gradients(loads, mesh, free_edges):
    area_w = mesh.interp.T @ mesh.qweights
    edge_w = _edge_weights(mesh, free_edges)
    gf = np.outer(area_w, loads.b) + np.outer(edge_w, loads.tau)
    gd = np.outer(area_w, loads.g) + np.outer(edge_w, loads.mu)
    return gf, gd


def evaluate_kinematics(mesh, state, mode=ConstraintMode.UNCONSTRAINED):
    """Per-quadrature-point ``F``, ``G``, ``d`` and ``J`` from consistent nodal fields.

    ``state.d`` must already be the nodal director of the active mode (see
    :meth:`DiscreteEnergy.state_from_x`). The pointwise director is its
    bilinear interpolant and ``G`` the gradient of that interpolant, in
    every mode; ``mode`` is accepted for call-site symmetry.
    """
    ConstraintMode.parse(mode)
    f = np.asarray(state.f, dtype=float)
    d = np.asarray(state.d, dtype=float)
    F = np.stack([mesh.ddx @ f, mesh.ddy @ f], axis=-1)
    G = np.stack([mesh.ddx @ d, mesh.ddy @ d], axis=-1)
    dq = mesh.interp @ d
    J = np.einsum("ni,ni->n", dq, np.cross(F[:, :, 0], F[:, :, 1]))
    return QuadKinematics(F, G, dq, J, dq)


def constraint_residuals(mesh, state):
    """Director constraint violations of a nodal state.

    Returns ``(unit, normal)``: ``unit`` is ``max ||d| - 1|`` over nodes and
    ``normal`` is ``max |d . f,alpha| / (|d| |f,alpha|)`` over quadrature
    points, with ``d`` the interpolated nodal director.
    """
    d = np.asarray(state.d, dtype=float)
    unit = float(np.max(np.abs(np.linalg.norm(d, axis=1) - 1.0)))
    kin = evaluate_kinematics(mesh, state)
    dq = kin.d_interp
    nd = np.linalg.norm(dq, axis=1)
    normal = 0.0
    for a in range(2):
        fa = kin.F[:, :, a]
        r = np.abs(np.einsum("ni,ni->n", dq, fa)) / (nd * np.linalg.norm(fa, axis=1))
        normal = max(normal, float(np.max(r)))
    return unit, normal


class DiscreteEnergy:
    """Discrete energy ``E_h`` as a function of the free degrees of freedom.

    DOF layout: free-node deformations (3 per node) followed by, per mode,
    free-node directors (unconstrained, unit director: 3 per node),
    free-node director lengths (normal director: 1 per node), or nothing
    (Kirchhoff-Love). Nodes on the Dirichlet region keep ``f_o``, ``d_o``.

    In the unit-director mode the stored director DOFs are normalized before
    use, so the gradient is the tangent projection of the unconstrained one.
    In the normal-director and Kirchhoff-Love modes the free-node directors
    are ``t * n(f)`` and ``n(f)`` with ``n`` from :func:`nodal_normals`.

    ``density`` replaces the material law: a callable taking
    :class:`QuadKinematics` and returning a :class:`~cosshell.energy.DensityEval`
    (used to run the solver on test energies).
    """

    def __init__(self, problem, density=None):
        self.problem = problem
        self._density_fn = density
        self.mesh = problem.mesh
        self.mode = problem.mode
        self.mask = problem.dirichlet_mask
        self.free = np.flatnonzero(~self.mask)
        self.fixed = np.flatnonzero(self.mask)
        nf = len(self.free)
        self.n_f = 3 * nf
        self.n_second = {ConstraintMode.UNCONSTRAINED: 3 * nf,
                         ConstraintMode.UNIT_DIRECTOR: 3 * nf,
                         ConstraintMode.NORMAL_DIRECTOR: nf,
                         ConstraintMode.KIRCHHOFF_LOVE: 0}[self.mode]
        self.size = self.n_f + self.n_second
        self._load_f, self._load_d = _load_gradients(
            problem.loads, self.mesh, problem.gamma_complement)
        self._has_loads = not problem.loads.is_zero()
        if problem.coefficient_fields:
            self._overrides = {k: np.repeat(np.asarray(v, dtype=float), 4)
                               for k, v in problem.coefficient_fields.items()}
        else:
            self._overrides = None
        self._t_o = np.linalg.norm(problem.d_o, axis=1)

    # --- state <-> DOF vector -------------------------------------------------

    def x_from_state(self, state):
        parts = [np.asarray(state.f, dtype=float)[self.free].ravel()]
        if self.mode in (ConstraintMode.UNCONSTRAINED, ConstraintMode.UNIT_DIRECTOR):
            parts.append(np.asarray(state.d, dtype=float)[self.free].ravel())
        elif self.mode is ConstraintMode.NORMAL_DIRECTOR:
            if state.t is None:
                raise InvalidInputError("normal-director mode needs nodal thickness t")
            parts.append(np.asarray(state.t, dtype=float)[self.free])
        return np.concatenate(parts)

    def _full_f(self, x):
        f = np.array(self.problem.f_o, dtype=float)
        f[self.free] = x[:self.n_f].reshape(-1, 3)
        return f

    def state_from_x(self, x, _aux=None):
        """Consistent :class:`FieldState` (directors reconstructed per mode)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise InvalidInputError(f"DOF vector must have length {self.size}, got {x.shape}")
        f = self._full_f(x)
        d = np.array(self.problem.d_o, dtype=float)
        t = None
        rest = x[self.n_f:]
        if self.mode is ConstraintMode.UNCONSTRAINED:
            d[self.free] = rest.reshape(-1, 3)
        elif self.mode is ConstraintMode.UNIT_DIRECTOR:
            raw = rest.reshape(-1, 3)
            nr = np.linalg.norm(raw, axis=1)
            if np.any(nr == 0):
                raise DegenerateStateError("zero nodal director")
            d[self.free] = raw / nr[:, None]
            if _aux is not None:
                _aux["raw"] = (d[self.free], nr)
        else:
            n, sums = nodal_normals(self.mesh, f, return_sums=True)
            if self.mode is ConstraintMode.NORMAL_DIRECTOR:
                t = self._t_o.copy()
                t[self.free] = rest
                d[self.free] = t[self.free, None] * n[self.free]
            else:
                d[self.free] = n[self.free]
            if _aux is not None:
                _aux["normals"] = (n, sums)
        return FieldState(f, d, t)

    # --- evaluation -----------------------------------------------------------

    def kinematics(self, x):
        return evaluate_kinematics(self.mesh, self.state_from_x(x), self.mode)

    def feasibility(self, x):
        """``(min J over quadrature points, min t)``; ``min t`` is ``inf`` outside the normal-director mode.

        Degenerate reconstructions report ``-inf``.
        """
        try:
            state = self.state_from_x(x)
        except DegenerateStateError:
            return -np.inf, -np.inf
        try:
            kin = evaluate_kinematics(self.mesh, state, self.mode)
        except InfeasibleStateError:
            return -np.inf, -np.inf
        tmin = np.inf if state.t is None else float(np.min(state.t))
        return float(np.min(kin.J)), tmin

    def is_feasible(self, x):
        Jmin, tmin = self.feasibility(x)
        return Jmin > 0 and tmin > 0

    def _density(self, state):
        kin = evaluate_kinematics(self.mesh, state, self.mode)
        if np.any(~(kin.J > 0)):
            k = int(np.flatnonzero(~(kin.J > 0))[0])
            raise InfeasibleStateError(f"J = {kin.J[k]:.3e} <= 0 at quadrature point {k}", index=k)
        if state.t is not None and np.any(~(state.t > 0)):
            k = int(np.flatnonzero(~(state.t > 0))[0])
            raise InfeasibleStateError(f"t = {state.t[k]:.3e} <= 0 at node {k}", index=k)
        if self._density_fn is not None:
            return kin, self._density_fn(kin)
        dens = reference_density(self.problem.params, kin.d, kin.F, kin.G, overrides=self._overrides)
        return kin, dens

    def _load(self, state):
        if not self._has_loads:
            return 0.0
        return float(np.sum(self._load_f * state.f) + np.sum(self._load_d * state.d))

    def energy(self, x):
        state = self.state_from_x(x)
        _, dens = self._density(state)
        return float(self.mesh.qweights @ dens.W) - self._load(state)

    def energy_and_gradient(self, x):
        aux = {}
        state = self.state_from_x(x, _aux=aux)
        kin, dens = self._density(state)
        m = self.mesh
        w = m.qweights
        E = float(w @ dens.W) - self._load(state)

        PF = dens.dF * w[:, None, None]
        PG = dens.dG * w[:, None, None]
        Pd = dens.dd * w[:, None]
        gd = m.ddx.T @ PG[:, :, 0] + m.ddy.T @ PG[:, :, 1] + m.interp.T @ Pd
        gf = m.ddx.T @ PF[:, :, 0] + m.ddy.T @ PF[:, :, 1]
        if self._has_loads:
            gf = gf - self._load_f
            gd = gd - self._load_d
        gd[self.fixed] = 0.0

        if self.mode is ConstraintMode.UNCONSTRAINED:
            second = gd[self.free].ravel()
        elif self.mode is ConstraintMode.UNIT_DIRECTOR:
            u, nr = aux["raw"]
            g = gd[self.free]
            second = ((g - np.einsum("ni,ni->n", g, u)[:, None] * u) / nr[:, None]).ravel()
        else:
            n, sums = aux["normals"]
            if self.mode is ConstraintMode.NORMAL_DIRECTOR:
                second = np.einsum("ni,ni->n", gd[self.free], n[self.free])
                gn = gd * state.t[:, None]
            else:
                second = np.zeros(0)
                gn = gd
            gf = gf + _normals_vjp(m, n, sums, gn)
        grad = np.concatenate([gf[self.free].ravel(), second])
        return E, grad

    def gradient(self, x):
        return self.energy_and_gradient(x)[1]


def assemble_energy(problem, state):
    """``E_h`` at a nodal state (free values read from ``state``)."""
    de = DiscreteEnergy(problem)
    return de.energy(de.x_from_state(state))


def assemble_gradient(problem, state):
    """Gradient of ``E_h`` with respect to the free DOFs of ``problem.mode``."""
    de = DiscreteEnergy(problem)
    return de.gradient(de.x_from_state(state))


def prolongate(mesh, state):
    """Interpolate nodal fields onto the uniformly refined ``(2 nx, 2 ny)`` mesh.

    Bilinear fields on the coarse mesh are reproduced exactly.
    """
    fine = build_grid(2 * mesh.nx, 2 * mesh.ny, mesh.Lx, mesh.Ly)

    def lift(a):
        a = np.asarray(a, dtype=float)
        shape = (mesh.ny + 1, mesh.nx + 1) + a.shape[1:]
        A = a.reshape(shape)
        out = np.empty((2 * mesh.ny + 1, 2 * mesh.nx + 1) + a.shape[1:])
        out[::2, ::2] = A
        out[::2, 1::2] = 0.5 * (A[:, :-1] + A[:, 1:])
        out[1::2, ::2] = 0.5 * (A[:-1, :] + A[1:, :])
        out[1::2, 1::2] = 0.25 * (A[:-1, :-1] + A[:-1, 1:] + A[1:, :-1] + A[1:, 1:])
        return out.reshape((-1,) + a.shape[1:])

    t = None if state.t is None else lift(state.t)
    return fine, FieldState(lift(state.f), lift(state.d), t)
