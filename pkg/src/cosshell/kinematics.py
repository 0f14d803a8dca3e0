"""Pointwise kinematic quantities of a director shell.

A gradient is stored as a ``(3, 2)`` array whose columns are the partial
derivatives ``f,1`` and ``f,2``; every function also accepts stacks of
shape ``(..., 3, 2)`` (and ``(..., 3)`` for directors) and broadcasts over
the leading axes.
"""
import numpy as np

from .errors import InvalidInputError

__all__ = [
    "minors",
    "orientation_J",
    "area_ratio",
    "rotate",
    "is_rotation",
    "random_rotation",
    "MINOR_ROW_PAIRS",
]

# Row pairs (block, row) of the 2x6 matrix [F^T | G^T] for m_1 ... m_15.
# ("F", i) is row i of F (0-based), i.e. the i-th column of [F^T | G^T].
MINOR_ROW_PAIRS = (
    (("F", 1), ("F", 2)),
    (("F", 2), ("F", 0)),
    (("F", 0), ("F", 1)),
    (("F", 0), ("G", 0)),
    (("F", 0), ("G", 1)),
    (("F", 0), ("G", 2)),
    (("F", 1), ("G", 0)),
    (("F", 1), ("G", 1)),
    (("F", 1), ("G", 2)),
    (("F", 2), ("G", 0)),
    (("F", 2), ("G", 1)),
    (("F", 2), ("G", 2)),
    (("G", 1), ("G", 2)),
    (("G", 2), ("G", 0)),
    (("G", 0), ("G", 1)),
)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("non-finite entry in kinematic input")


def _as_grad(A, name):
    A = np.asarray(A, dtype=float)
    if A.shape[-2:] != (3, 2):
        raise InvalidInputError(f"{name} must have trailing shape (3, 2), got {A.shape}")
    return A


def minors(F, G):
    """All fifteen 2x2 minors of ``[F^T | G^T]``.

    The ordering is the conventional one: ``m[..., 0:3]`` are the components
    of ``f,1 x f,2``, ``m[..., 3:12]`` mix one row of ``F`` with one row of
    ``G`` (``m_4 = F11 G12 - F12 G11`` and so on, ``F`` row-major outer),
    and ``m[..., 12:15]`` are the components of ``d,1 x d,2``.

    Returns an array of shape ``(..., 15)``.
    """
    F = _as_grad(F, "F")
    G = _as_grad(G, "G")
    _check_finite(F, G)
    F, G = np.broadcast_arrays(F, G)
    m = np.empty(F.shape[:-2] + (15,))
    m[..., 0:3] = np.cross(F[..., :, 0], F[..., :, 1])
    # mixed block: m[3 + 3 i + j] = F_i1 G_j2 - F_i2 G_j1
    mixed = (F[..., :, None, 0] * G[..., None, :, 1]
             - F[..., :, None, 1] * G[..., None, :, 0])
    m[..., 3:12] = mixed.reshape(F.shape[:-2] + (9,))
    m[..., 12:15] = np.cross(G[..., :, 0], G[..., :, 1])
    return m


def orientation_J(d, F):
    """Orientation functional ``d . (f,1 x f,2)``; negative values are returned as-is."""
    F = _as_grad(F, "F")
    d = np.asarray(d, dtype=float)
    _check_finite(d, F)
    return np.einsum("...i,...i->...", d, np.cross(F[..., :, 0], F[..., :, 1]))


def area_ratio(F):
    """Local area ratio ``sqrt(det(F^T F))``, computed as ``|f,1 x f,2|``."""
    F = _as_grad(F, "F")
    _check_finite(F)
    return np.linalg.norm(np.cross(F[..., :, 0], F[..., :, 1]), axis=-1)


def is_rotation(Q, tol=1e-12):
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (3, 3) or not np.all(np.isfinite(Q)):
        return False
    return (np.max(np.abs(Q.T @ Q - np.eye(3))) <= tol
            and abs(np.linalg.det(Q) - 1.0) <= tol)


def rotate(Q, d, F, G):
    """Act with a proper rotation: ``(Q d, Q F, Q G)``."""
    if not is_rotation(Q):
        raise InvalidInputError("Q is not a proper rotation (Q^T Q = I, det Q = 1 to 1e-12)")
    Q = np.asarray(Q, dtype=float)
    d = np.asarray(d, dtype=float)
    F = _as_grad(F, "F")
    G = _as_grad(G, "G")
    _check_finite(d, F, G)
    return (np.einsum("ij,...j->...i", Q, d),
            np.einsum("ij,...jk->...ik", Q, F),
            np.einsum("ij,...jk->...ik", Q, G))


def random_rotation(rng):
    """Uniformly distributed rotation from a unit quaternion."""
    q = rng.normal(size=4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
