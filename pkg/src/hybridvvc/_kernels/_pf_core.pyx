# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Newton-Raphson power-flow kernel.

Same contract as ``_pf_py.newton_solve``: bus 0 is the slack, the rest are PQ,
``vm``/``va`` are updated in place.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs, isfinite, INFINITY

cnp.import_array()


cdef int _lu_solve(double[:, ::1] A, double[::1] b, int n) noexcept:
    # Gaussian elimination with partial pivoting; A and b are overwritten, b holds x.
    cdef int i, j, k, piv
    cdef double amax, t, f
    for k in range(n):
        piv = k
        amax = fabs(A[k, k])
        for i in range(k + 1, n):
            if fabs(A[i, k]) > amax:
                amax = fabs(A[i, k])
                piv = i
        if amax == 0.0:
            return -1
        if piv != k:
            for j in range(n):
                t = A[k, j]
                A[k, j] = A[piv, j]
                A[piv, j] = t
            t = b[k]
            b[k] = b[piv]
            b[piv] = t
        for i in range(k + 1, n):
            f = A[i, k] / A[k, k]
            if f != 0.0:
                for j in range(k + 1, n):
                    A[i, j] -= f * A[k, j]
                b[i] -= f * b[k]
    for i in range(n - 1, -1, -1):
        t = b[i]
        for j in range(i + 1, n):
            t -= A[i, j] * b[j]
        b[i] = t / A[i, i]
    return 0


def newton_solve(double[:, ::1] G, double[:, ::1] B, double[::1] P, double[::1] Q,
                 double[::1] vm, double[::1] va, double tol, int max_iter):
    cdef int n = G.shape[0]
    cdef int m = n - 1
    cdef int i, k, it = 0
    cdef double mis, ang, c, s, gik, bik, pi_, qi_
    if m == 0:
        return 0, 0.0, True

    Pc_arr = np.empty(n)
    Qc_arr = np.empty(n)
    J_arr = np.empty((2 * m, 2 * m))
    rhs_arr = np.empty(2 * m)
    cdef double[::1] Pc = Pc_arr
    cdef double[::1] Qc = Qc_arr
    cdef double[:, ::1] J = J_arr
    cdef double[::1] rhs = rhs_arr

    while True:
        for i in range(n):
            pi_ = 0.0
            qi_ = 0.0
            for k in range(n):
                gik = G[i, k]
                bik = B[i, k]
                if gik == 0.0 and bik == 0.0:
                    continue
                ang = va[i] - va[k]
                c = cos(ang)
                s = sin(ang)
                pi_ += vm[k] * (gik * c + bik * s)
                qi_ += vm[k] * (gik * s - bik * c)
            Pc[i] = vm[i] * pi_
            Qc[i] = vm[i] * qi_

        mis = 0.0
        for i in range(1, n):
            rhs[i - 1] = P[i] - Pc[i]
            rhs[m + i - 1] = Q[i] - Qc[i]
            if not isfinite(rhs[i - 1]) or not isfinite(rhs[m + i - 1]):
                return it, INFINITY, False
            if fabs(rhs[i - 1]) > mis:
                mis = fabs(rhs[i - 1])
            if fabs(rhs[m + i - 1]) > mis:
                mis = fabs(rhs[m + i - 1])
        if mis < tol:
            return it, mis, True
        if it >= max_iter:
            return it, mis, False

        for i in range(1, n):
            for k in range(1, n):
                if i == k:
                    J[i - 1, k - 1] = -Qc[i] - B[i, i] * vm[i] * vm[i]
                    J[i - 1, m + k - 1] = Pc[i] / vm[i] + G[i, i] * vm[i]
                    J[m + i - 1, k - 1] = Pc[i] - G[i, i] * vm[i] * vm[i]
                    J[m + i - 1, m + k - 1] = Qc[i] / vm[i] - B[i, i] * vm[i]
                else:
                    gik = G[i, k]
                    bik = B[i, k]
                    if gik == 0.0 and bik == 0.0:
                        J[i - 1, k - 1] = 0.0
                        J[i - 1, m + k - 1] = 0.0
                        J[m + i - 1, k - 1] = 0.0
                        J[m + i - 1, m + k - 1] = 0.0
                        continue
                    ang = va[i] - va[k]
                    c = cos(ang)
                    s = sin(ang)
                    J[i - 1, k - 1] = vm[i] * vm[k] * (gik * s - bik * c)
                    J[i - 1, m + k - 1] = vm[i] * (gik * c + bik * s)
                    J[m + i - 1, k - 1] = -vm[i] * vm[k] * (gik * c + bik * s)
                    J[m + i - 1, m + k - 1] = vm[i] * (gik * s - bik * c)

        if _lu_solve(J, rhs, 2 * m) != 0:
            return it, mis, False
        for i in range(1, n):
            va[i] += rhs[i - 1]
            vm[i] += rhs[m + i - 1]
        it += 1
