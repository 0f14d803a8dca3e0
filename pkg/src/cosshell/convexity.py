"""Sampling probes for convexity, rank-one convexity and barrier blow-up.

All probes are derivative free and deterministic for a fixed seed: samples
are drawn up front from one generator and reductions run in sample order.
"""
from dataclasses import dataclass, field

import numpy as np

from .energy import barrier
from .errors import InvalidInputError
from .kinematics import area_ratio

__all__ = [
    "JointConvexityReport",
    "RankOneWitness",
    "RankOneReport",
    "check_joint_convexity",
    "find_rank_one_violation",
    "verify_witness",
    "membrane_energy",
    "planar_membrane_energy",
    "blowup_scan",
]

TS = (0.25, 0.5, 0.75)


@dataclass
class JointConvexityReport:
    samples: int
    violations: int
    max_violation: float
    redraws: int
    slack: float
    worst: dict = field(default=None)

    def to_dict(self):
        return {"samples": self.samples, "violations": self.violations,
                "max_violation": self.max_violation, "redraws": self.redraws,
                "slack": self.slack, "worst": self.worst}


def check_joint_convexity(phi, samples, seed=0, dim=25, positive_index=12, ts=TS,
                          slack=1e-12, bound=2.0, positive_range=(0.1, 3.0)):
    """Midpoint-type convexity test of ``phi`` on random segments.

    Endpoints have entries uniform in ``[-bound, bound]`` except entry
    ``positive_index`` (the Jacobian slot), drawn from ``positive_range``.
    At each interior parameter ``t`` the defect

        phi((1-t) x + t y) - (1-t) phi(x) - t phi(y)

    is compared with ``slack * (1 + |(1-t) phi(x) + t phi(y)|)``. Segments
    whose interior leaves ``phi < inf`` (possible only for custom ranges) are
    discarded and redrawn.

    Returns a :class:`JointConvexityReport`; ``max_violation`` is the largest
    defect seen (negative when every sample is strictly convex).
    """
    if samples < 1:
        raise InvalidInputError("samples must be >= 1")
    ts = np.asarray(ts, dtype=float)
    if np.any((ts <= 0) | (ts >= 1)):
        raise InvalidInputError("interpolation parameters must lie in (0, 1)")
    rng = np.random.default_rng(seed)

    def draw(n):
        x = rng.uniform(-bound, bound, size=(n, dim))
        if positive_index is not None:
            x[:, positive_index] = rng.uniform(*positive_range, size=n)
        return x

    xs, ys = [], []
    redraws = 0
    need = samples
    while need:
        x, y = draw(need), draw(need)
        ok = np.ones(need, dtype=bool)
        if positive_index is not None:
            for t in ts:
                ok &= ((1 - t) * x[:, positive_index] + t * y[:, positive_index]) > 0
        ok &= np.isfinite(phi(x)) & np.isfinite(phi(y))
        xs.append(x[ok])
        ys.append(y[ok])
        redraws += int(np.count_nonzero(~ok))
        need = int(np.count_nonzero(~ok))
    x = np.concatenate(xs)
    y = np.concatenate(ys)

    px, py = phi(x), phi(y)
    defects = np.empty((len(ts), samples))
    tol = np.empty_like(defects)
    for k, t in enumerate(ts):
        chord = (1 - t) * px + t * py
        defects[k] = phi((1 - t) * x + t * y) - chord
        tol[k] = slack * (1.0 + np.abs(chord))
    bad = defects > tol
    k, i = np.unravel_index(int(np.argmax(defects)), defects.shape)
    worst = {"t": float(ts[k]), "x": x[i].tolist(), "y": y[i].tolist(),
             "defect": float(defects[k, i])}
    return JointConvexityReport(samples, int(np.count_nonzero(bad.any(axis=0))),
                                float(defects.max()), redraws, slack, worst)


# --- rank-one probe -----------------------------------------------------------

def membrane_energy(params):
    """``F -> a1 |F|^p + gamma(|f,1 x f,2|)`` on stacks of 3x2 gradients (``inf`` if the area vanishes)."""
    def W(F):
        F = np.asarray(F, dtype=float)
        J = area_ratio(F)
        nF2 = np.sum(F * F, axis=(-2, -1))
        with np.errstate(divide="ignore", invalid="ignore"):
            g, _ = barrier(J, params.c1, params.c2)
        return np.where(J > 0, params.a1 * nF2 ** (params.p / 2) + g + params.offset, np.inf)
    return W


def planar_membrane_energy(params):
    """Planar restriction: ``a1 |F|^p + gamma(det F)`` on the upper 2x2 block (``inf`` if ``det <= 0``)."""
    def W(F):
        F = np.asarray(F, dtype=float)
        det = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        nF2 = np.sum(F * F, axis=(-2, -1))
        with np.errstate(divide="ignore", invalid="ignore"):
            g, _ = barrier(det, params.c1, params.c2)
        return np.where(det > 0, params.a1 * nF2 ** (params.p / 2) + g + params.offset, np.inf)
    return W


@dataclass
class RankOneWitness:
    """Line ``F + t a b^T`` with a midpoint defect on ``[t_minus, t_plus]``.

    ``violation`` is the positive magnitude of
    ``W(mid) - (W(t_minus) + W(t_plus)) / 2``.
    """

    F: np.ndarray
    a: np.ndarray
    b: np.ndarray
    t_minus: float
    t_plus: float
    violation: float

    def to_dict(self):
        return {"F": self.F.tolist(), "a": self.a.tolist(), "b": self.b.tolist(),
                "t_minus": self.t_minus, "t_plus": self.t_plus, "violation": self.violation}


@dataclass
class RankOneReport:
    attempts: int
    candidates: int
    witness: RankOneWitness = None
    planar: bool = False

    @property
    def found(self):
        return self.witness is not None

    def to_dict(self):
        return {"attempts": self.attempts, "candidates": self.candidates, "planar": self.planar,
                "found": self.found,
                "witness": None if self.witness is None else self.witness.to_dict()}


def _defect(W, F, a, b, tm, tp):
    """``(W(tm) + W(tp)) / 2 - W(mid)`` along ``F + t a b^T``; broadcasts over leading axes."""
    ab = a[..., :, None] * b[..., None, :]
    tm = np.asarray(tm, dtype=float)[..., None, None]
    tp = np.asarray(tp, dtype=float)[..., None, None]
    w0 = W(F + tm * ab)
    w1 = W(F + tp * ab)
    wm = W(F + 0.5 * (tm + tp) * ab)
    with np.errstate(invalid="ignore"):
        return 0.5 * (w0 + w1) - wm, wm


def verify_witness(W, witness, rtol=1e-10):
    """Recompute the three values of a witness; True if the defect is reproduced."""
    d, _ = _defect(W, witness.F, witness.a, witness.b, witness.t_minus, witness.t_plus)
    d = float(d)
    return np.isfinite(d) and d < 0 and abs(-d - witness.violation) <= rtol * max(abs(d), 1e-300)


def _draw_lines(rng, n, planar, bound, det_range):
    F = rng.uniform(-bound, bound, size=(n, 3, 2))
    a = rng.standard_normal((n, 3))
    b = rng.standard_normal((n, 2))
    if planar:
        F[:, 2, :] = 0.0
        a[:, 2] = 0.0
        # redraw blocks until det lies in the sampling range
        det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
        bad = ~((det >= det_range[0]) & (det <= det_range[1]))
        while np.any(bad):
            k = int(np.count_nonzero(bad))
            F[bad, :2, :] = rng.uniform(-bound, bound, size=(k, 2, 2))
            det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
            bad = ~((det >= det_range[0]) & (det <= det_range[1]))
    a /= np.linalg.norm(a, axis=1)[:, None]
    b /= np.linalg.norm(b, axis=1)[:, None]
    return F, a, b


def _refine(W, F, a, b, tm, tp, iters=60):
    """Bisection-style search over interval center and half-width for the largest defect."""
    c, r = 0.5 * (tm + tp), 0.5 * (tp - tm)
    best, _ = _defect(W, F, a, b, c - r, c + r)
    best = float(best)
    step = 0.5 * r
    for _ in range(iters):
        improved = False
        for cc, rr in ((c - step, r), (c + step, r), (c, r - step), (c, r + step)):
            if rr <= 0:
                continue
            d, _ = _defect(W, F, a, b, cc - rr, cc + rr)
            d = float(d)
            if np.isfinite(d) and d < best:
                best, c, r, improved = d, cc, rr, True
        if not improved:
            step *= 0.5
            if step < 1e-12:
                break
    return c - r, c + r, best


def find_rank_one_violation(W, attempts, seed=0, planar=False, grid=41, span=1.0,
                            bound=2.0, det_range=(0.1, 3.0), rtol=1e-12, chunk=4096):
    """Random search for a rank-one convexity defect of ``W``.

    Each attempt draws a line ``F + t a b^T`` (``F`` entries uniform in
    ``[-bound, bound]``, unit ``a`` and ``b``) and scans ``grid`` points of
    ``t`` in ``[-span, span]``. A discrete second difference below
    ``-rtol (1 + |W|)`` marks a candidate. In planar mode the third row of
    ``F`` and ``a_3`` vanish and ``det`` of the upper block is drawn in
    ``det_range``.

    The candidate with the largest normalized defect is refined by
    interval bisection and re-verified from scratch before it is returned.
    """
    if attempts < 1:
        raise InvalidInputError("attempts must be >= 1")
    if grid < 3:
        raise InvalidInputError("grid must have at least 3 points")
    rng = np.random.default_rng(seed)
    ts = np.linspace(-span, span, grid)
    n_cand = 0
    best = None
    # all lines are drawn first so the result does not depend on the chunk size
    F_all, a_all, b_all = _draw_lines(rng, attempts, planar, bound, det_range)
    for done in range(0, attempts, chunk):
        F, a, b = (v[done:done + chunk] for v in (F_all, a_all, b_all))
        ab = a[:, None, :, None] * b[:, None, None, :]
        w = W(F[:, None] + ts[None, :, None, None] * ab)
        with np.errstate(invalid="ignore"):
            d2 = w[:, :-2] - 2.0 * w[:, 1:-1] + w[:, 2:]
        scale = 1.0 + np.abs(w[:, 1:-1])
        ok = np.isfinite(d2)
        score = np.where(ok, d2 / scale, 0.0)
        hit = score < -rtol
        n_cand += int(np.count_nonzero(hit.any(axis=1)))
        if np.any(hit):
            i, j = np.unravel_index(int(np.argmin(score)), score.shape)
            if best is None or score[i, j] < best[0]:
                best = (float(score[i, j]), F[i].copy(), a[i].copy(), b[i].copy(), ts[j], ts[j + 2])

    witness = None
    if best is not None:
        _, F, a, b, tm, tp = best
        tm, tp, d = _refine(W, F, a, b, tm, tp)
        cand = RankOneWitness(F, a, b, float(tm), float(tp), -d)
        if d < 0 and verify_witness(W, cand):
            witness = cand
    return RankOneReport(attempts, n_cand, witness, planar)


def blowup_scan(c1=1.0, c2=1.0, k_max=8):
    """Table ``[(10^-k, gamma(10^-k)) for k = 0..k_max]``."""
    if not c2 > 0:
        raise InvalidInputError("c2 must be positive")
    if int(k_max) != k_max or k_max < 0:
        raise InvalidInputError("k_max must be a non-negative integer")
    J = 10.0 ** -np.arange(int(k_max) + 1, dtype=float)
    g, _ = barrier(J, c1, c2)
    return [(float(j), float(v)) for j, v in zip(J, g)]
