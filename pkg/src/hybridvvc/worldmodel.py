"""Agent-internal grid replica used to score proposals before they are applied.

The replica knows topology, bounds and the published demand, but not the grid
code: every controlled node is treated as in service and nothing is tripped.
"""
from __future__ import annotations

from .powergrid import (Grid, GridState, PowerFlowError, SetpointProposal,
                        collapsed_state, solve_power_flow)
from .reward import PerformanceWeights, state_performance


class WorldModel:
    def __init__(self, grid: Grid, observed_bus_ids=None,
                 weights: PerformanceWeights = PerformanceWeights()):
        self._grid = grid.copy()
        for bus in self._grid.buses:
            bus.in_service = True
        self._grid.disconnected_at[:] = -1
        self._grid._sync_actuators()
        self.observed_bus_ids = observed_bus_ids
        self.weights = weights
        self.last_observation: GridState | None = None

    def synchronize(self, env_state: GridState):
        if env_state.demand_p is not None:
            self._grid.set_demand(env_state.demand_p, env_state.demand_q)
        self.last_observation = env_state.copy()

    def project(self, proposal: SetpointProposal) -> tuple[GridState, float]:
        """Projected next state and its performance; 0.0 if the solve fails."""
        if self.last_observation is None:
            raise RuntimeError("world model used before synchronize()")
        step = self.last_observation.step
        try:
            state = solve_power_flow(self._grid, proposal, step)
        except PowerFlowError:
            return collapsed_state(self._grid, proposal, step), 0.0
        return state, state_performance(state, self.observed_bus_ids, self.weights)
