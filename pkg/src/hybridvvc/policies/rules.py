"""Deterministic volt-VAr droop controller."""
from __future__ import annotations

import numpy as np

from ..powergrid import Grid, SetpointProposal


def droop_step(q, v, step_sizes, q_lo, q_hi):
    """``clip(q - D (v - 1), q_lo, q_hi)`` with ``D`` diagonal."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.shape != v.shape:
        raise ValueError(f"q has shape {q.shape} but v has shape {v.shape}")
    return np.clip(q - np.asarray(step_sizes) * (v - 1.0), q_lo, q_hi)


class RulesPolicy:
    """Droop control on the net reactive injection of every controlled node.

    The nodal command is split equally over the node's actuators (generators
    inject it, loads absorb its negative). Real-power setpoints are held at
    their last applied values.
    """

    def __init__(self, grid: Grid, step_size=0.1):
        self.n_nodes = grid.n_nodes
        self.n_actuators = grid.n_actuators
        self.node = grid.actuator_node.copy()
        self.sign = grid.actuator_sign.copy()
        counts = np.bincount(self.node, minlength=self.n_nodes).astype(float)
        self.share = self.sign / counts[self.node]
        # command c is feasible iff every share * c lies in its actuator's q range
        lo_a = np.where(self.sign > 0, grid.q_lo, -grid.q_hi) * counts[self.node]
        hi_a = np.where(self.sign > 0, grid.q_hi, -grid.q_lo) * counts[self.node]
        self.q_lo = np.full(self.n_nodes, -np.inf)
        self.q_hi = np.full(self.n_nodes, np.inf)
        np.maximum.at(self.q_lo, self.node, lo_a)
        np.minimum.at(self.q_hi, self.node, hi_a)
        self.step_sizes = np.broadcast_to(np.asarray(step_size, dtype=float), (self.n_nodes,)).copy()
        if np.any(self.step_sizes <= 0):
            raise ValueError("droop step sizes must be positive")
        self.q_prev = np.zeros(self.n_nodes)
        self.p_prev = np.zeros(self.n_actuators)

    def command(self, voltages) -> np.ndarray:
        """Next nodal reactive command. Nodes reading 0 pu (tripped) hold."""
        v = np.asarray(voltages, dtype=float)
        if v.shape != self.q_prev.shape:
            raise ValueError(
                f"expected {self.q_prev.shape[0]} controlled-bus voltages, got {v.shape}"
            )
        v = np.where(v > 0.0, v, 1.0)
        return droop_step(self.q_prev, v, self.step_sizes, self.q_lo, self.q_hi)

    def propose(self, voltages) -> SetpointProposal:
        c = self.command(voltages)
        return SetpointProposal(self.p_prev.copy(), self.share * c[self.node])

    def commit(self, applied: SetpointProposal):
        """Remember the setpoints that were actually applied to the grid."""
        net = np.zeros(self.n_nodes)
        np.add.at(net, self.node, self.sign * applied.q)
        self.q_prev = np.clip(net, self.q_lo, self.q_hi)
        self.p_prev = applied.p.copy()
