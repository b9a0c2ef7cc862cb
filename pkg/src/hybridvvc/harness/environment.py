"""Simulated distribution grid with a seeded demand profile and grid-code trips."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..powergrid import (ConfigError, Grid, GridState, PowerFlowError, SetpointProposal,
                         collapsed_state, enforce_grid_code, solve_power_flow)
from ..reward import PerformanceWeights, state_performance


@dataclass
class ScenarioConfig:
    """Uncontrolled base demand: a daily cycle plus per-node AR(1) noise.

    ``base_load`` is the mean real demand per node in MW; ``amplitude`` and
    ``noise`` are relative to it. One step is 15 minutes, so ``period=96``
    is one day.
    """

    base_load: float = 0.03
    amplitude: float = 0.5
    period: float = 96.0
    noise: float = 0.1
    noise_corr: float = 0.95
    power_factor: float = 0.95
    spread: float = 0.3
    # start of the cycle as a fraction of the period, plus a uniform random offset
    phase: float = 0.0
    phase_jitter: float = 1.0

    def validate(self) -> "ScenarioConfig":
        if min(self.base_load, self.amplitude, self.noise, self.spread, self.phase_jitter) < 0:
            raise ConfigError("scenario magnitudes must be >= 0")
        if self.period <= 0 or not 0 < self.power_factor <= 1 or not 0 <= self.noise_corr < 1:
            raise ConfigError("need period > 0, 0 < power_factor <= 1, 0 <= noise_corr < 1")
        return self

    @classmethod
    def from_mapping(cls, kv: dict) -> "ScenarioConfig":
        cfg = cls()
        names = {f.name for f in fields(cls)}
        for key, raw in kv.items():
            if key not in names:
                raise ConfigError(f"unknown scenario key {key!r}")
            setattr(cfg, key, float(raw))
        return cfg.validate()


class DemandProfile:
    """Precomputed per-bus demand for ``steps`` steps, bounded by the load maxima."""

    def __init__(self, grid: Grid, config: ScenarioConfig, steps: int, rng: np.random.Generator):
        cfg = config.validate()
        n = grid.n_buses
        nodes = grid.node_bus_index
        weight = 1.0 + cfg.spread * rng.uniform(-1.0, 1.0, size=len(nodes))
        phase = 2.0 * np.pi * (cfg.phase + cfg.phase_jitter * rng.uniform())
        t = np.arange(steps + 1)
        daily = 1.0 + cfg.amplitude * np.sin(2.0 * np.pi * t / cfg.period + phase)
        ar = np.zeros((steps + 1, len(nodes)))
        innov = rng.standard_normal((steps + 1, len(nodes)))
        scale = cfg.noise * np.sqrt(1.0 - cfg.noise_corr**2)
        ar[0] = cfg.noise * innov[0]
        for k in range(1, steps + 1):
            ar[k] = cfg.noise_corr * ar[k - 1] + scale * innov[k]
        p_nodes = cfg.base_load * weight[None, :] * (daily[:, None] + ar)
        p_nodes = np.clip(p_nodes, 0.0, grid.config.load_p_max)
        tan_phi = np.tan(np.arccos(cfg.power_factor))
        q_nodes = np.clip(p_nodes * tan_phi, 0.0, grid.config.load_q_max)
        self.p = np.zeros((steps + 1, n))
        self.q = np.zeros((steps + 1, n))
        self.p[:, nodes] = p_nodes
        self.q[:, nodes] = q_nodes

    def at(self, step):
        k = min(step, self.p.shape[0] - 1)
        return self.p[k], self.q[k]


@dataclass
class ApplyResult:
    state: GridState
    performance: float
    newly_disconnected: frozenset
    converged: bool


class VoltageControlEnv:
    """Applies setpoints, enforces the grid code and publishes the next state.

    Each step: the agent sees ``state`` (current demand, previous setpoints),
    ``apply`` solves with the new setpoints, trips nodes outside the band,
    re-solves, scores the result, then moves the demand on by one step and
    re-solves with the held setpoints to publish the next ``state``.
    """

    def __init__(self, grid: Grid, profile: DemandProfile, observed_bus_ids=None,
                 weights: PerformanceWeights = PerformanceWeights()):
        self.grid = grid
        self.profile = profile
        self.observed_bus_ids = (
            tuple(range(grid.n_buses)) if observed_bus_ids is None else tuple(observed_bus_ids)
        )
        self.weights = weights
        self.applied = SetpointProposal.zeros(grid.n_actuators)
        self.t = 0
        self.violation_count = 0
        self.solver_failures = 0
        self.grid.set_demand(*profile.at(0))
        self.state = self._solve(self.applied)
        self.last_post = self.state

    @property
    def obs_dim(self) -> int:
        return 3 * len(self.observed_bus_ids)

    def observation_vector(self, state: GridState) -> np.ndarray:
        """Learner input: voltage deviations (x20) and demand (x10) at observed buses."""
        ids = list(self.observed_bus_ids)
        dp = state.demand_p if state.demand_p is not None else np.zeros(self.grid.n_buses)
        dq = state.demand_q if state.demand_q is not None else np.zeros(self.grid.n_buses)
        v = np.where(state.voltages[ids] > 0.0, state.voltages[ids] - 1.0, -0.2)
        return np.concatenate([20.0 * v, 10.0 * dp[ids], 10.0 * dq[ids]])

    def performance(self, state: GridState) -> float:
        return state_performance(state, self.observed_bus_ids, self.weights)

    def _solve(self, setpoints) -> GridState:
        try:
            return solve_power_flow(self.grid, setpoints, self.t)
        except PowerFlowError:
            self.solver_failures += 1
            return collapsed_state(self.grid, setpoints, self.t)

    def apply(self, proposal: SetpointProposal) -> ApplyResult:
        proposal = self.grid.project(proposal)
        state = self._solve(proposal)
        converged = state.converged
        state, newly = enforce_grid_code(self.grid, state)
        if newly:
            state = self._solve(proposal)
        self.violation_count += len(newly)
        perf = self.performance(state) if converged else 0.0
        self.applied = proposal
        self.last_post = post = state
        self.t += 1
        self.grid.reconnect_due(self.t)
        self.grid.set_demand(*self.profile.at(self.t))
        self.state = self._solve(self.applied)
        return ApplyResult(post, perf, newly, converged)
