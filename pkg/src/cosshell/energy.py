"""Stored-energy densities and their first derivatives.

The reference family is

    W(d, F, G) = a1 |F|^p + a2 |G|^q + a3 S^(s/2) + gamma(J) + offset

with ``S`` the sum of squares of the twelve minors ``m_4 ... m_15``,
``J = d . (f,1 x f,2)`` and the barrier

    gamma(J) = c1 (J - 1)^2 + c2 (1/J + J - 2).

Every summand is convex in its own argument block, so ``W`` is a convex
function ``phi`` of the independent tuple ``(F, G, J, m_4, ..., m_15)``.
All summands are built from rotation invariants (Frobenius norms, ``J`` and
the sum ``S``); no term sees an individual mixed minor.

The membrane density drops the director: ``a1 |F|^p + gamma(|f,1 x f,2|)``.
"""
from dataclasses import dataclass, field, fields

import numpy as np

from . import _backend
from .errors import InfeasibleStateError, InvalidInputError
from .kinematics import area_ratio, orientation_J, random_rotation, rotate

__all__ = [
    "EnergyParams",
    "LoadSpec",
    "DensityEval",
    "barrier",
    "reference_density",
    "membrane_density",
    "phi_reference",
    "phi_membrane_planar",
    "objectivity_check",
    "ARG_SLICES",
]

# layout of the flat argument vector of phi: F (6, row-major 3x2), G (6), J, m_4..m_15
ARG_SLICES = {"F": slice(0, 6), "G": slice(6, 12), "J": 12, "m": slice(13, 25)}


@dataclass(frozen=True)
class EnergyParams:
    """Exponents and coefficients of the reference family (immutable)."""

    p: float = 4.0
    q: float = 4.0
    s: float = 2.0
    a1: float = 1.0
    a2: float = 1.0
    a3: float = 0.0
    c1: float = 1.0
    c2: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
                raise InvalidInputError(f"EnergyParams.{f.name} must be a finite number, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        if not (self.p > 2 and self.q > 2):
            raise InvalidInputError("exponents p and q must exceed 2")
        if not self.s > 1:
            raise InvalidInputError("minor exponent s must exceed 1")
        if not self.a1 > 0:
            raise InvalidInputError("a1 must be positive")
        if self.a2 < 0 or self.a3 < 0 or self.c1 < 0:
            raise InvalidInputError("a2, a3 and c1 must be non-negative")
        if not self.c2 > 0:
            raise InvalidInputError("c2 must be positive")

    def coefficient_arrays(self, n, overrides=None):
        """Per-point coefficient arrays ``(a1, a2, a3, c1, c2)`` of length ``n``.

        ``overrides`` maps a coefficient name to an array of shape ``(n,)``;
        this is how piecewise-constant material fields enter the kernels.
        """
        out = []
        overrides = overrides or {}
        for name in ("a1", "a2", "a3", "c1", "c2"):
            if name in overrides:
                arr = np.ascontiguousarray(overrides[name], dtype=float)
                if arr.shape != (n,):
                    raise InvalidInputError(f"override {name!r} must have shape ({n},)")
            else:
                arr = np.full(n, getattr(self, name))
            out.append(arr)
        return tuple(out)


@dataclass(frozen=True)
class LoadSpec:
    """Dead loads: body force ``b``, director couple ``g``, edge traction ``tau``
    and edge couple ``mu``. Constant over the domain / the free boundary."""

    b: tuple = (0.0, 0.0, 0.0)
    g: tuple = (0.0, 0.0, 0.0)
    tau: tuple = (0.0, 0.0, 0.0)
    mu: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("b", "g", "tau", "mu"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise InvalidInputError(f"load {name!r} must be a finite 3-vector")
            object.__setattr__(self, name, tuple(float(x) for x in v))

    def is_zero(self):
        return not any(any(getattr(self, n)) for n in ("b", "g", "tau", "mu"))


@dataclass
class DensityEval:
    """Density value and partials; arrays carry the leading batch shape."""

    W: np.ndarray
    dd: np.ndarray
    dF: np.ndarray
    dG: np.ndarray
    J: np.ndarray = field(default=None)


def barrier(J, c1=1.0, c2=1.0):
    """``gamma(J)`` and ``gamma'(J)``; convex on ``(0, inf)``, zero at J = 1."""
    J = np.asarray(J, dtype=float)
    val = c1 * (J - 1.0) ** 2 + c2 * (1.0 / J + J - 2.0)
    slope = 2.0 * c1 * (J - 1.0) + c2 * (1.0 - 1.0 / (J * J))
    return val, slope


def _stack(a, tail):
    a = np.asarray(a, dtype=float)
    if a.shape[a.ndim - len(tail):] != tail:
        raise InvalidInputError(f"expected trailing shape {tail}, got {a.shape}")
    return a


def reference_density(params, d, F, G, overrides=None, backend=None):
    """Evaluate ``W`` and its partials at one state or a stack of states.

    Raises :class:`InfeasibleStateError` if ``J <= 0`` anywhere; ``index``
    is the flat position of the first offending point.
    """
    d = _stack(d, (3,))
    F = _stack(F, (3, 2))
    G = _stack(G, (3, 2))
    d, F, G = np.broadcast_arrays(d[..., :, None], F, G)
    d = d[..., 0]
    batch = F.shape[:-2]
    # copies: broadcast views are read-only for the compiled kernels
    d2 = np.array(d.reshape(-1, 3), order="C")
    F2 = np.array(F.reshape(-1, 3, 2), order="C")
    G2 = np.array(G.reshape(-1, 3, 2), order="C")
    J = orientation_J(d2, F2)
    if np.any(~(J > 0)):
        k = int(np.flatnonzero(~(J > 0))[0])
        raise InfeasibleStateError(f"J = {J[k]:.3e} <= 0 at point {k}", index=k)
    if not (np.all(np.isfinite(G2))):
        raise InvalidInputError("non-finite director gradient")
    a1, a2, a3, c1, c2 = params.coefficient_arrays(len(J), overrides)
    kern = _backend.get_kernels(backend)
    W, dd, dF, dG = kern.reference_density(
        d2, F2, G2, a1, a2, a3, c1, c2, params.p, params.q, params.s, params.offset)
    return DensityEval(W.reshape(batch), dd.reshape(batch + (3,)),
                       dF.reshape(batch + (3, 2)), dG.reshape(batch + (3, 2)),
                       J.reshape(batch))


def membrane_density(params, F, overrides=None, backend=None):
    """Membrane density ``a1 |F|^p + gamma(area ratio)``; ``dd`` and ``dG`` are zero."""
    F = _stack(F, (3, 2))
    batch = F.shape[:-2]
    F2 = np.ascontiguousarray(F.reshape(-1, 3, 2))
    J = area_ratio(F2)
    if np.any(~(J > 0)):
        k = int(np.flatnonzero(~(J > 0))[0])
        raise InfeasibleStateError(f"area ratio vanishes at point {k}", index=k)
    a1, _, _, c1, c2 = params.coefficient_arrays(len(J), overrides)
    kern = _backend.get_kernels(backend)
    W, dF = kern.membrane_density(F2, a1, c1, c2, params.p, params.offset)
    return DensityEval(W.reshape(batch), np.zeros(batch + (3,)),
                       dF.reshape(batch + (3, 2)), np.zeros(batch + (3, 2)),
                       J.reshape(batch))


def phi_reference(params, args):
    """The convex representative as a function of independent arguments.

    ``args`` has shape ``(..., 25)`` laid out as in :data:`ARG_SLICES`.
    Returns ``inf`` where ``J <= 0``.
    """
    args = np.asarray(args, dtype=float)
    F = args[..., ARG_SLICES["F"]]
    G = args[..., ARG_SLICES["G"]]
    J = args[..., ARG_SLICES["J"]]
    m = args[..., ARG_SLICES["m"]]
    nF2 = np.sum(F * F, axis=-1)
    nG2 = np.sum(G * G, axis=-1)
    S = np.sum(m * m, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        gam, _ = barrier(J, params.c1, params.c2)
    out = (params.a1 * nF2 ** (params.p / 2) + params.a2 * nG2 ** (params.q / 2)
           + params.a3 * S ** (params.s / 2) + gam + params.offset)
    return np.where(J > 0, out, np.inf)


def phi_membrane_planar(params, args):
    """Planar membrane representative of ``(F (2x2, 4 entries), delta)``."""
    args = np.asarray(args, dtype=float)
    nF2 = np.sum(args[..., :4] ** 2, axis=-1)
    delta = args[..., 4]
    with np.errstate(divide="ignore", invalid="ignore"):
        gam, _ = barrier(delta, params.c1, params.c2)
    out = params.a1 * nF2 ** (params.p / 2) + gam + params.offset
    return np.where(delta > 0, out, np.inf)


def _random_feasible_state(rng):
    while True:
        F = rng.uniform(-2.0, 2.0, size=(3, 2))
        G = rng.uniform(-2.0, 2.0, size=(3, 2))
        d = rng.uniform(-2.0, 2.0, size=3)
        J = float(orientation_J(d, F))
        if abs(J) < 1e-3:
            continue
        if J < 0:
            d = -d
        return d, F, G


def objectivity_check(params, trials, seed=0, family="reference", rotations=None):
    """Largest normalized change ``|W(Qd, QF, QG) - W| / (1 + |W|)`` over random trials.

    ``rotations`` may supply an explicit list of rotations (cycled over the
    trials); by default each trial draws a uniform random rotation.
    """
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    if family not in ("reference", "membrane"):
        raise InvalidInputError(f"unknown family {family!r}")
    rng = np.random.default_rng(seed)
    states = []
    Qs = []
    for k in range(trials):
        states.append(_random_feasible_state(rng))
        Qs.append(random_rotation(rng) if rotations is None else np.asarray(rotations[k % len(rotations)]))
    d = np.array([s[0] for s in states])
    F = np.array([s[1] for s in states])
    G = np.array([s[2] for s in states])
    rd, rF, rG = [], [], []
    for Q, (di, Fi, Gi) in zip(Qs, states):
        a, b, c = rotate(Q, di, Fi, Gi)
        rd.append(a)
        rF.append(b)
        rG.append(c)
    rd, rF, rG = np.array(rd), np.array(rF), np.array(rG)
    if family == "reference":
        W0 = reference_density(params, d, F, G).W
        W1 = reference_density(params, rd, rF, rG).W
    else:
        W0 = membrane_density(params, F).W
        W1 = membrane_density(params, rF).W
    return float(np.max(np.abs(W1 - W0) / (1.0 + np.abs(W0))))
