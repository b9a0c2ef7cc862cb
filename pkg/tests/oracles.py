"""Reference implementations that share no code with the package under test."""
import numpy as np


def gauss_seidel(lines, s_inj, n_buses, v_slack=1.0 + 0j, tol=1e-13, max_iter=200_000):
    """Complex Gauss-Seidel power flow; bus 0 is the slack.

    ``lines`` is ``[(i, j, r, x), ...]`` and ``s_inj`` the net complex
    injection per bus in pu. Returns the complex bus voltages.
    """
    Y = np.zeros((n_buses, n_buses), dtype=complex)
    for i, j, r, x in lines:
        y = 1.0 / complex(r, x)
        Y[i, i] += y
        Y[j, j] += y
        Y[i, j] -= y
        Y[j, i] -= y
    V = np.ones(n_buses, dtype=complex)
    V[0] = v_slack
    for _ in range(max_iter):
        biggest = 0.0
        for k in range(1, n_buses):
            sigma = Y[k] @ V - Y[k, k] * V[k]
            new = (np.conj(s_inj[k]) / np.conj(V[k]) - sigma) / Y[k, k]
            biggest = max(biggest, abs(new - V[k]))
            V[k] = new
        if biggest < tol:
            return V
    raise RuntimeError("Gauss-Seidel did not converge")


def finite_difference(f, x, h=1e-6):
    """Central differences of scalar ``f`` w.r.t. every entry of array ``x``."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2.0 * h)
    return g


def pt1_trace(inputs, T, y0=None):
    """Plain-loop first-order lag: first input copied, then y += (u - y) / T."""
    out = []
    y = y0
    for u in inputs:
        y = u if y is None else y + (u - y) / T
        out.append(y)
    return out


def select_trace(rules_inputs, adaptive_inputs, T):
    """Policy choices obtained by iterating the lag on both input streams."""
    yr = pt1_trace(rules_inputs, T)
    ya = pt1_trace(adaptive_inputs, T)
    return ["adaptive" if a > r else "rules" for r, a in zip(yr, ya)]
