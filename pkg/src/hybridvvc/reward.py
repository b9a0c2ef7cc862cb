"""Normalized agent utility built from Gaussian-shaped voltage scores."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OMEGA_MU = 1.0
OMEGA_SIGMA = 0.032
OMEGA_C = 0.0
OMEGA_A = 1.0


@dataclass(frozen=True)
class PerformanceWeights:
    alpha: float = 1.0 / 3.0
    beta: float = 1.0 / 3.0
    gamma: float = 1.0 / 3.0

    def __post_init__(self):
        ws = (self.alpha, self.beta, self.gamma)
        if any(w < 0 for w in ws):
            raise ValueError(f"performance weights must be >= 0, got {ws}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ValueError(f"performance weights must sum to 1, got {sum(ws)}")


@dataclass(frozen=True)
class Observation:
    """Voltages at the subset of buses the agent can see."""

    observed_bus_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        if len(self.observed_bus_ids) == 0:
            raise ValueError("observation must cover at least one bus")
        if len(self.observed_bus_ids) != len(self.values):
            raise ValueError("observed_bus_ids and values differ in length")

    @classmethod
    def of(cls, voltages, bus_ids=None) -> "Observation":
        voltages = np.asarray(voltages, dtype=float)
        if bus_ids is None:
            bus_ids = range(len(voltages))
        bus_ids = tuple(int(b) for b in bus_ids)
        return cls(bus_ids, voltages[list(bus_ids)].copy())


def gaussian_score(x, A=OMEGA_A, mu=OMEGA_MU, C=OMEGA_C, sigma=OMEGA_SIGMA) -> float:
    """Mean of ``A * exp(-(x - mu)^2 / (2 sigma^2) - C)`` over the entries of ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 0:
        raise ValueError("gaussian_score needs at least one value")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return float(A / x.size * np.sum(np.exp(-((x - mu) ** 2) / (2.0 * sigma**2) - C)))


def g_omega(x) -> float:
    return gaussian_score(x, OMEGA_A, OMEGA_MU, OMEGA_C, OMEGA_SIGMA)


def performance(voltages, observation: Observation, in_service_flags,
                weights: PerformanceWeights = PerformanceWeights()) -> float:
    """Weighted sum of the grid-wide score, the observed-bus score and the
    fraction of controlled nodes still in service. Lies in ``[0, 1]``.

    Tripped buses enter the first two terms with their 0 pu voltage.
    """
    flags = np.asarray(in_service_flags, dtype=bool)
    healthy = float(np.count_nonzero(flags)) / flags.size if flags.size else 1.0
    return (
        weights.alpha * g_omega(voltages)
        + weights.beta * g_omega(observation.values)
        + weights.gamma * healthy
    )


def state_performance(state, observed_bus_ids=None,
                      weights: PerformanceWeights = PerformanceWeights()) -> float:
    """:func:`performance` for a solved ``GridState``."""
    obs = Observation.of(state.voltages, observed_bus_ids)
    return performance(state.voltages, obs, state.in_service_flags, weights)
