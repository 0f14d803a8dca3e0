# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise density kernels (same contract as ``_kernels_py``)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt

cnp.import_array()


cdef inline void _power_and_slope(double x2, double e, double* val, double* slope) noexcept nogil:
    if x2 > 0.0:
        val[0] = pow(x2, 0.5 * e)
        slope[0] = e * pow(x2, 0.5 * e - 1.0)
    else:
        val[0] = 0.0
        slope[0] = 0.0


def reference_density(double[:, ::1] d, double[:, :, ::1] F, double[:, :, ::1] G,
                      double[::1] a1, double[::1] a2, double[::1] a3,
                      double[::1] c1, double[::1] c2,
                      double p, double q, double s, double offset):
    cdef Py_ssize_t n = F.shape[0]
    W_arr = np.empty(n)
    dd_arr = np.empty((n, 3))
    dF_arr = np.empty((n, 3, 2))
    dG_arr = np.empty((n, 3, 2))
    cdef double[::1] W = W_arr
    cdef double[:, ::1] dd = dd_arr
    cdef double[:, :, ::1] dF = dF_arr
    cdef double[:, :, ::1] dG = dG_arr

    cdef Py_ssize_t k, i, j
    cdef double f1[3]
    cdef double f2[3]
    cdef double g1[3]
    cdef double g2[3]
    cdef double M[3][3]
    cdef double cg[3]
    cdef double cr[3]
    cdef double nF2, nG2, S, vF, sF, vG, sG, vS, sS, kS, J, vB, sB, acc

    with nogil:
        for k in range(n):
            nF2 = 0.0
            nG2 = 0.0
            for i in range(3):
                f1[i] = F[k, i, 0]
                f2[i] = F[k, i, 1]
                g1[i] = G[k, i, 0]
                g2[i] = G[k, i, 1]
                nF2 = nF2 + f1[i] * f1[i] + f2[i] * f2[i]
                nG2 = nG2 + g1[i] * g1[i] + g2[i] * g2[i]
            _power_and_slope(nF2, p, &vF, &sF)
            _power_and_slope(nG2, q, &vG, &sG)

            S = 0.0
            for i in range(3):
                for j in range(3):
                    M[i][j] = f1[i] * g2[j] - f2[i] * g1[j]
                    S = S + M[i][j] * M[i][j]
            cg[0] = g1[1] * g2[2] - g1[2] * g2[1]
            cg[1] = g1[2] * g2[0] - g1[0] * g2[2]
            cg[2] = g1[0] * g2[1] - g1[1] * g2[0]
            S = S + cg[0] * cg[0] + cg[1] * cg[1] + cg[2] * cg[2]
            _power_and_slope(S, s, &vS, &sS)
            kS = a3[k] * sS

            cr[0] = f1[1] * f2[2] - f1[2] * f2[1]
            cr[1] = f1[2] * f2[0] - f1[0] * f2[2]
            cr[2] = f1[0] * f2[1] - f1[1] * f2[0]
            J = d[k, 0] * cr[0] + d[k, 1] * cr[1] + d[k, 2] * cr[2]
            vB = c1[k] * (J - 1.0) * (J - 1.0) + c2[k] * (1.0 / J + J - 2.0)
            sB = 2.0 * c1[k] * (J - 1.0) + c2[k] * (1.0 - 1.0 / (J * J))

            W[k] = a1[k] * vF + a2[k] * vG + a3[k] * vS + vB + offset
            for i in range(3):
                dd[k, i] = sB * cr[i]

            # f2 x d and d x f1
            dF[k, 0, 0] = a1[k] * sF * f1[0] + sB * (f2[1] * d[k, 2] - f2[2] * d[k, 1])
            dF[k, 1, 0] = a1[k] * sF * f1[1] + sB * (f2[2] * d[k, 0] - f2[0] * d[k, 2])
            dF[k, 2, 0] = a1[k] * sF * f1[2] + sB * (f2[0] * d[k, 1] - f2[1] * d[k, 0])
            dF[k, 0, 1] = a1[k] * sF * f2[0] + sB * (d[k, 1] * f1[2] - d[k, 2] * f1[1])
            dF[k, 1, 1] = a1[k] * sF * f2[1] + sB * (d[k, 2] * f1[0] - d[k, 0] * f1[2])
            dF[k, 2, 1] = a1[k] * sF * f2[2] + sB * (d[k, 0] * f1[1] - d[k, 1] * f1[0])
            for i in range(3):
                acc = 0.0
                for j in range(3):
                    acc = acc + M[i][j] * g2[j]
                dF[k, i, 0] += kS * acc
                acc = 0.0
                for j in range(3):
                    acc = acc + M[i][j] * g1[j]
                dF[k, i, 1] -= kS * acc

            for j in range(3):
                dG[k, j, 0] = a2[k] * sG * g1[j]
                dG[k, j, 1] = a2[k] * sG * g2[j]
                acc = 0.0
                for i in range(3):
                    acc = acc + M[i][j] * f1[i]
                dG[k, j, 1] += kS * acc
                acc = 0.0
                for i in range(3):
                    acc = acc + M[i][j] * f2[i]
                dG[k, j, 0] -= kS * acc
            # g2 x cg and cg x g1
            dG[k, 0, 0] += kS * (g2[1] * cg[2] - g2[2] * cg[1])
            dG[k, 1, 0] += kS * (g2[2] * cg[0] - g2[0] * cg[2])
            dG[k, 2, 0] += kS * (g2[0] * cg[1] - g2[1] * cg[0])
            dG[k, 0, 1] += kS * (cg[1] * g1[2] - cg[2] * g1[1])
            dG[k, 1, 1] += kS * (cg[2] * g1[0] - cg[0] * g1[2])
            dG[k, 2, 1] += kS * (cg[0] * g1[1] - cg[1] * g1[0])
    return W_arr, dd_arr, dF_arr, dG_arr


def membrane_density(double[:, :, ::1] F, double[::1] a1, double[::1] c1, double[::1] c2,
                     double p, double offset):
    cdef Py_ssize_t n = F.shape[0]
    W_arr = np.empty(n)
    dF_arr = np.empty((n, 3, 2))
    cdef double[::1] W = W_arr
    cdef double[:, :, ::1] dF = dF_arr
    cdef Py_ssize_t k, i
    cdef double f1[3]
    cdef double f2[3]
    cdef double nv[3]
    cdef double nF2, vF, sF, J, vB, sB

    with nogil:
        for k in range(n):
            nF2 = 0.0
            for i in range(3):
                f1[i] = F[k, i, 0]
                f2[i] = F[k, i, 1]
                nF2 = nF2 + f1[i] * f1[i] + f2[i] * f2[i]
            _power_and_slope(nF2, p, &vF, &sF)
            nv[0] = f1[1] * f2[2] - f1[2] * f2[1]
            nv[1] = f1[2] * f2[0] - f1[0] * f2[2]
            nv[2] = f1[0] * f2[1] - f1[1] * f2[0]
            J = sqrt(nv[0] * nv[0] + nv[1] * nv[1] + nv[2] * nv[2])
            for i in range(3):
                nv[i] = nv[i] / J
            vB = c1[k] * (J - 1.0) * (J - 1.0) + c2[k] * (1.0 / J + J - 2.0)
            sB = 2.0 * c1[k] * (J - 1.0) + c2[k] * (1.0 - 1.0 / (J * J))
            W[k] = a1[k] * vF + vB + offset
            dF[k, 0, 0] = a1[k] * sF * f1[0] + sB * (f2[1] * nv[2] - f2[2] * nv[1])
            dF[k, 1, 0] = a1[k] * sF * f1[1] + sB * (f2[2] * nv[0] - f2[0] * nv[2])
            dF[k, 2, 0] = a1[k] * sF * f1[2] + sB * (f2[0] * nv[1] - f2[1] * nv[0])
            dF[k, 0, 1] = a1[k] * sF * f2[0] + sB * (nv[1] * f1[2] - nv[2] * f1[1])
            dF[k, 1, 1] = a1[k] * sF * f2[1] + sB * (nv[2] * f1[0] - nv[0] * f1[2])
            dF[k, 2, 1] = a1[k] * sF * f2[2] + sB * (nv[0] * f1[1] - nv[1] * f1[0])
    return W_arr, dF_arr
