"""NumPy implementation of the pointwise density kernels.

Both kernels take stacked inputs (``n`` points) plus per-point coefficient
arrays of shape ``(n,)`` and return the density value together with its
partial derivatives. Feasibility (J > 0) is checked by the caller.
"""
import numpy as np


def _power_and_slope(x2, e):
    """Return ``x2**(e/2)`` and ``e * x2**(e/2 - 1)`` with the slope set to 0 at x2 = 0."""
    val = x2 ** (0.5 * e)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(x2 > 0.0, e * x2 ** (0.5 * e - 1.0), 0.0)
    return val, slope


def _barrier(J, c1, c2):
    val = c1 * (J - 1.0) ** 2 + c2 * (1.0 / J + J - 2.0)
    slope = 2.0 * c1 * (J - 1.0) + c2 * (1.0 - 1.0 / (J * J))
    return val, slope


def reference_density(d, F, G, a1, a2, a3, c1, c2, p, q, s, offset):
    f1, f2 = F[:, :, 0], F[:, :, 1]
    g1, g2 = G[:, :, 0], G[:, :, 1]

    nF2 = np.einsum("nij,nij->n", F, F)
    nG2 = np.einsum("nij,nij->n", G, G)
    vF, sF = _power_and_slope(nF2, p)
    vG, sG = _power_and_slope(nG2, q)

    # mixed minors M[n, i, j] = f1_i g2_j - f2_i g1_j and d,1 x d,2
    M = f1[:, :, None] * g2[:, None, :] - f2[:, :, None] * g1[:, None, :]
    cg = np.cross(g1, g2)
    S = np.einsum("nij,nij->n", M, M) + np.einsum("ni,ni->n", cg, cg)
    # S^(s/2): the same helper with x2 = S
    vS, sS = _power_and_slope(S, s)
    kS = a3 * 0.5 * sS

    cross = np.cross(f1, f2)
    J = np.einsum("ni,ni->n", d, cross)
    vB, sB = _barrier(J, c1, c2)

    W = a1 * vF + a2 * vG + a3 * vS + vB + offset

    dd = sB[:, None] * cross

    dF = (a1 * sF)[:, None, None] * F
    dF[:, :, 0] += sB[:, None] * np.cross(f2, d)
    dF[:, :, 1] += sB[:, None] * np.cross(d, f1)
    dF[:, :, 0] += (2.0 * kS)[:, None] * np.einsum("nij,nj->ni", M, g2)
    dF[:, :, 1] -= (2.0 * kS)[:, None] * np.einsum("nij,nj->ni", M, g1)

    dG = (a2 * sG)[:, None, None] * G
    dG[:, :, 1] += (2.0 * kS)[:, None] * np.einsum("nij,ni->nj", M, f1)
    dG[:, :, 0] -= (2.0 * kS)[:, None] * np.einsum("nij,ni->nj", M, f2)
    dG[:, :, 0] += (2.0 * kS)[:, None] * np.cross(g2, cg)
    dG[:, :, 1] += (2.0 * kS)[:, None] * np.cross(cg, g1)
    return W, dd, dF, dG


def membrane_density(F, a1, c1, c2, p, offset):
    f1, f2 = F[:, :, 0], F[:, :, 1]
    nF2 = np.einsum("nij,nij->n", F, F)
    vF, sF = _power_and_slope(nF2, p)
    cross = np.cross(f1, f2)
    J = np.sqrt(np.einsum("ni,ni->n", cross, cross))
    vB, sB = _barrier(J, c1, c2)
    n = cross / J[:, None]
    W = a1 * vF + vB + offset
    dF = (a1 * sF)[:, None, None] * F
    dF[:, :, 0] += sB[:, None] * np.cross(f2, n)
    dF[:, :, 1] += sB[:, None] * np.cross(n, f1)
    return W, dF
