"""Pure-numpy Newton-Raphson power-flow kernel.

Polar formulation over a dense admittance matrix ``Y = G + jB``. Bus 0 of the
passed matrices is the slack; every other bus is PQ.
"""
import numpy as np


def newton_solve(G, B, P, Q, vm, va, tol, max_iter):
    """Solve in place for ``vm``/``va``; return ``(iterations, mismatch, converged)``.

    ``P``/``Q`` are net specified injections (pu). ``vm[0]``/``va[0]`` are held.
    """
    n = G.shape[0]
    m = n - 1
    if m == 0:
        return 0, 0.0, True
    Y = G + 1j * B
    V = vm * np.exp(1j * va)
    it = 0
    while True:
        S = V * np.conj(Y @ V)
        dP = P[1:] - S.real[1:]
        dQ = Q[1:] - S.imag[1:]
        mis = max(np.max(np.abs(dP)), np.max(np.abs(dQ)))
        if not np.isfinite(mis):
            return it, float("inf"), False
        if mis < tol:
            return it, float(mis), True
        if it >= max_iter:
            return it, float(mis), False

        Ibus = Y @ V
        Vn = V / np.abs(V)
        dS_dVm = V[:, None] * np.conj(Y * Vn[None, :]) + np.diag(np.conj(Ibus) * Vn)
        dS_dVa = 1j * V[:, None] * np.conj(np.diag(Ibus) - Y * V[None, :])
        J = np.empty((2 * m, 2 * m))
        J[:m, :m] = dS_dVa.real[1:, 1:]
        J[:m, m:] = dS_dVm.real[1:, 1:]
        J[m:, :m] = dS_dVa.imag[1:, 1:]
        J[m:, m:] = dS_dVm.imag[1:, 1:]
        try:
            dx = np.linalg.solve(J, np.concatenate((dP, dQ)))
        except np.linalg.LinAlgError:
            return it, float(mis), False
        va[1:] += dx[:m]
        vm[1:] += dx[m:]
        V = vm * np.exp(1j * va)
        it += 1
