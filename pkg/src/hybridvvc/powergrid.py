"""Grid data model, AC power flow and grid-code enforcement.

All electrical quantities handed to the solver are per-unit on ``s_base_mva``
(default 1 MVA, so MW/MVar values map 1:1 to pu). Injections are positive
into the bus: generators add their setpoints, loads and base demand subtract.
"""
from __future__ import annotations

import configparser
import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import newton_solve

SLACK = "slack"
PQ = "pq"
LOAD = "load"
GENERATOR = "generator"


class ConfigError(ValueError):
    """Invalid grid or agent configuration."""


class PowerFlowError(RuntimeError):
    """Newton-Raphson did not converge."""

    def __init__(self, mismatch, iterations):
        super().__init__(
            f"power flow did not converge after {iterations} iterations "
            f"(max mismatch {mismatch:.3e} pu)"
        )
        self.mismatch = mismatch
        self.iterations = iterations


@dataclass
class Bus:
    id: int
    kind: str = PQ
    voltage_mag: float = 1.0
    voltage_ang: float = 0.0
    in_service: bool = True


@dataclass
class Line:
    from_bus: int
    to_bus: int
    resistance: float
    reactance: float
    in_service: bool = True

    def __post_init__(self):
        if self.resistance < 0 or self.reactance <= 0:
            raise ConfigError(
                f"line {self.from_bus}-{self.to_bus}: need r >= 0 and x > 0, "
                f"got r={self.resistance}, x={self.reactance}"
            )


@dataclass
class Actuator:
    id: int
    bus_id: int
    kind: str
    p_bounds: tuple[float, float]
    q_bounds: tuple[float, float]
    p_set: float = 0.0
    q_set: float = 0.0
    in_service: bool = True


@dataclass
class GridState:
    """Solved snapshot of the grid.

    ``voltages`` has one entry per bus and is exactly 0.0 for de-energized or
    out-of-service buses. ``in_service_flags`` has one entry per controlled node.
    ``p_injection``/``q_injection`` are the net specified bus injections in pu;
    ``demand_p``/``demand_q`` the uncontrolled base demand (MW/MVar) per bus.
    """

    voltages: np.ndarray
    angles: np.ndarray
    in_service_flags: np.ndarray
    p_injection: np.ndarray
    q_injection: np.ndarray
    step: int = 0
    converged: bool = True
    mismatch: float = 0.0
    demand_p: np.ndarray | None = None
    demand_q: np.ndarray | None = None

    def copy(self) -> "GridState":
        return copy.deepcopy(self)

    @property
    def n_in_service(self) -> int:
        return int(np.count_nonzero(self.in_service_flags))


@dataclass
class SetpointProposal:
    """Real and reactive setpoints for every actuator, ordered by actuator id."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if self.p.shape != self.q.shape or self.p.ndim != 1:
            raise ValueError("p and q must be 1-D arrays of equal length")

    def __len__(self):
        return self.p.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "SetpointProposal":
        return cls(np.zeros(n), np.zeros(n))

    def as_vector(self) -> np.ndarray:
        """Interleaved ``[p0, q0, p1, q1, ...]``."""
        out = np.empty(2 * len(self))
        out[0::2] = self.p
        out[1::2] = self.q
        return out

    @classmethod
    def from_vector(cls, vec) -> "SetpointProposal":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[0::2].copy(), vec[1::2].copy())

    def copy(self) -> "SetpointProposal":
        return SetpointProposal(self.p.copy(), self.q.copy())


@dataclass
class GridConfig:
    node_count: int = 15
    resistance: float = 0.01
    reactance: float = 0.03
    load_p_max: float = 1.4
    load_q_max: float = 0.46
    gen_p_max: float = 0.8
    gen_q_max: float = 0.46
    band: tuple[float, float] = (0.90, 1.10)
    reconnect_after: int | None = None
    s_base_mva: float = 1.0
    v_base_kv: float = 20.0
    tolerance: float = 1e-8
    max_iter: int = 50

    def validate(self) -> "GridConfig":
        if self.node_count < 2:
            raise ConfigError("node_count must be >= 2 (slack plus at least one PQ bus)")
        for name in ("load_p_max", "load_q_max", "gen_p_max", "gen_q_max"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0 (min > max)")
        lo, hi = self.band
        if not lo < hi:
            raise ConfigError(f"voltage band lower edge {lo} must be below upper edge {hi}")
        if self.reactance <= 0 or self.resistance < 0:
            raise ConfigError("need resistance >= 0 and reactance > 0")
        if self.reconnect_after is not None and self.reconnect_after < 1:
            raise ConfigError("reconnect_after must be >= 1 or 'never'")
        if self.s_base_mva <= 0 or self.tolerance <= 0 or self.max_iter < 1:
            raise ConfigError("s_base_mva, tolerance and max_iter must be positive")
        return self

    @classmethod
    def from_file(cls, path) -> "GridConfig":
        """Read a ``key = value`` file (``#`` comments, no section header)."""
        text = Path(path).read_text(encoding="utf-8")
        return cls.from_mapping(_read_kv(text, path))

    @classmethod
    def from_mapping(cls, kv: dict) -> "GridConfig":
        cfg = cls()
        for key, raw in kv.items():
            if key == "band":
                parts = [p for p in raw.replace(",", " ").split() if p]
                if len(parts) != 2:
                    raise ConfigError(f"band needs two values, got {raw!r}")
                cfg.band = (float(parts[0]), float(parts[1]))
            elif key == "reconnect_after":
                cfg.reconnect_after = (
                    None if raw.lower() in ("never", "inf", "none", "") else int(raw)
                )
            elif key in ("node_count", "max_iter"):
                setattr(cfg, key, int(raw))
            elif hasattr(cfg, key):
                setattr(cfg, key, float(raw))
            else:
                raise ConfigError(f"unknown grid config key {key!r}")
        return cfg.validate()


def _read_kv(text, source="<string>") -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[root]\n" + text, source=str(source))
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return dict(parser["root"])


class Grid:
    """Buses, lines and actuators plus the per-bus uncontrolled base demand.

    A *controlled node* is a non-slack bus carrying actuators. Tripping a node
    takes its bus out of service; buses cut off from the slack are
    de-energized with it.
    """

    def __init__(self, buses, lines, actuators, config: GridConfig | None = None):
        self.config = config or GridConfig()
        self.buses = list(buses)
        self.lines = list(lines)
        self.actuators = sorted(actuators, key=lambda a: a.id)
        slack = [b for b in self.buses if b.kind == SLACK]
        if len(slack) != 1:
            raise ConfigError(f"grid needs exactly one slack bus, found {len(slack)}")
        self.slack = slack[0].id
        self._index = {b.id: i for i, b in enumerate(self.buses)}
        for line in self.lines:
            if line.from_bus not in self._index or line.to_bus not in self._index:
                raise ConfigError(f"line {line.from_bus}-{line.to_bus} references unknown bus")
        for act in self.actuators:
            for lo, hi in (act.p_bounds, act.q_bounds):
                if lo > hi:
                    raise ConfigError(f"actuator {act.id}: bound min {lo} > max {hi}")
        self.node_bus_ids = sorted({a.bus_id for a in self.actuators})
        if self.slack in self.node_bus_ids:
            raise ConfigError("actuators on the slack bus are not supported")
        self._node_of_bus = {b: k for k, b in enumerate(self.node_bus_ids)}
        self.actuator_node = np.array([self._node_of_bus[a.bus_id] for a in self.actuators])
        self.actuator_bus = np.array([self._index[a.bus_id] for a in self.actuators])
        self.actuator_sign = np.array(
            [1.0 if a.kind == GENERATOR else -1.0 for a in self.actuators]
        )
        self.p_lo = np.array([a.p_bounds[0] for a in self.actuators], dtype=float)
        self.p_hi = np.array([a.p_bounds[1] for a in self.actuators], dtype=float)
        self.q_lo = np.array([a.q_bounds[0] for a in self.actuators], dtype=float)
        self.q_hi = np.array([a.q_bounds[1] for a in self.actuators], dtype=float)
        self.demand_p = np.zeros(len(self.buses))
        self.demand_q = np.zeros(len(self.buses))
        self.disconnected_at = np.full(len(self.node_bus_ids), -1, dtype=int)
        self._ybus_cache: dict = {}
        if not self._energized().all():
            raise ConfigError("grid is not connected to the slack bus at construction")

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_nodes(self) -> int:
        return len(self.node_bus_ids)

    @property
    def n_actuators(self) -> int:
        return len(self.actuators)

    @property
    def node_bus_index(self) -> np.ndarray:
        return np.array([self._index[b] for b in self.node_bus_ids], dtype=int)

    def node_flags(self) -> np.ndarray:
        return np.array([self.buses[self._index[b]].in_service for b in self.node_bus_ids])

    def actuator_flags(self) -> np.ndarray:
        return self.node_flags()[self.actuator_node]

    def copy(self) -> "Grid":
        return copy.deepcopy(self)

    def set_demand(self, p_mw, q_mvar):
        self.demand_p = np.asarray(p_mw, dtype=float).copy()
        self.demand_q = np.asarray(q_mvar, dtype=float).copy()

    def project(self, setpoints: SetpointProposal) -> SetpointProposal:
        """Clamp setpoints into actuator bounds."""
        return SetpointProposal(
            np.clip(setpoints.p, self.p_lo, self.p_hi),
            np.clip(setpoints.q, self.q_lo, self.q_hi),
        )

    def within_bounds(self, setpoints: SetpointProposal, atol=1e-12) -> bool:
        return bool(
            np.all(setpoints.p >= self.p_lo - atol)
            and np.all(setpoints.p <= self.p_hi + atol)
            and np.all(setpoints.q >= self.q_lo - atol)
            and np.all(setpoints.q <= self.q_hi + atol)
        )

    def injections(self, setpoints: SetpointProposal):
        """Net specified bus injections in pu (in-service actuators only)."""
        s_base = self.config.s_base_mva
        flags = self.actuator_flags()
        p = -self.demand_p.copy()
        q = -self.demand_q.copy()
        np.add.at(p, self.actuator_bus, np.where(flags, self.actuator_sign * setpoints.p, 0.0))
        np.add.at(q, self.actuator_bus, np.where(flags, self.actuator_sign * setpoints.q, 0.0))
        for i, bus in enumerate(self.buses):
            if not bus.in_service:
                p[i] = q[i] = 0.0
        return p / s_base, q / s_base

    def _energized(self) -> np.ndarray:
        alive = np.array([b.in_service for b in self.buses])
        adj: dict[int, list[int]] = {i: [] for i in range(self.n_buses)}
        for line in self.lines:
            if not line.in_service:
                continue
            i, j = self._index[line.from_bus], self._index[line.to_bus]
            if alive[i] and alive[j]:
                adj[i].append(j)
                adj[j].append(i)
        seen = np.zeros(self.n_buses, dtype=bool)
        root = self._index[self.slack]
        if not alive[root]:
            return seen
        stack = [root]
        seen[root] = True
        while stack:
            i = stack.pop()
            for j in adj[i]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return seen

    def _ybus(self, order: tuple):
        cached = self._ybus_cache.get(order)
        if cached is not None:
            return cached
        pos = {bus_idx: k for k, bus_idx in enumerate(order)}
        n = len(order)
        Y = np.zeros((n, n), dtype=complex)
        for line in self.lines:
            if not line.in_service:
                continue
            i, j = pos.get(self._index[line.from_bus]), pos.get(self._index[line.to_bus])
            if i is None or j is None:
                continue
            y = 1.0 / complex(line.resistance, line.reactance)
            Y[i, i] += y
            Y[j, j] += y
            Y[i, j] -= y
            Y[j, i] -= y
        result = (np.ascontiguousarray(Y.real), np.ascontiguousarray(Y.imag))
        self._ybus_cache[order] = result
        return result

    def reconnect_due(self, step: int) -> list[int]:
        """Bring back nodes whose grid-code cooldown has expired."""
        after = self.config.reconnect_after
        if after is None:
            return []
        back = []
        for k, t in enumerate(self.disconnected_at):
            if t >= 0 and step - t >= after:
                self.buses[self._index[self.node_bus_ids[k]]].in_service = True
                self.disconnected_at[k] = -1
                back.append(k)
        self._sync_actuators()
        return back

    def trip_nodes(self, nodes, step: int):
        for k in nodes:
            self.buses[self._index[self.node_bus_ids[k]]].in_service = False
            self.disconnected_at[k] = step
        self._sync_actuators()

    def _sync_actuators(self):
        flags = self.actuator_flags()
        for act, flag in zip(self.actuators, flags):
            act.in_service = bool(flag)


def build_benchmark_grid(config: GridConfig | None = None) -> Grid:
    """Radial MV feeder: slack bus 0 feeding buses 1..n-1 in a chain.

    Every PQ bus carries one load and one generator actuator. Load ``p`` is
    consumption in ``[0, load_p_max]``; generator ``p`` is injection in
    ``[0, gen_p_max]``; both reactive ranges are symmetric.
    """
    config = (config or GridConfig()).validate()
    n = config.node_count
    buses = [Bus(0, SLACK)] + [Bus(i, PQ) for i in range(1, n)]
    lines = [Line(i - 1, i, config.resistance, config.reactance) for i in range(1, n)]
    actuators = []
    for i in range(1, n):
        actuators.append(
            Actuator(
                id=len(actuators), bus_id=i, kind=LOAD,
                p_bounds=(0.0, config.load_p_max),
                q_bounds=(-config.load_q_max, config.load_q_max),
            )
        )
        actuators.append(
            Actuator(
                id=len(actuators), bus_id=i, kind=GENERATOR,
                p_bounds=(0.0, config.gen_p_max),
                q_bounds=(-config.gen_q_max, config.gen_q_max),
            )
        )
    return Grid(buses, lines, actuators, config)


def solve_power_flow(grid: Grid, setpoints: SetpointProposal, step: int = 0) -> GridState:
    """Newton-Raphson from a flat start over the energized part of ``grid``.

    Raises :class:`PowerFlowError` when the mismatch does not drop below
    ``config.tolerance`` within ``config.max_iter`` iterations.
    """
    if len(setpoints) != grid.n_actuators:
        raise ValueError(
            f"setpoint length {len(setpoints)} != actuator count {grid.n_actuators}"
        )
    if not grid.within_bounds(setpoints):
        raise ValueError("setpoints outside actuator bounds; project them first")
    energized = grid._energized()
    root = grid._index[grid.slack]
    order = (root,) + tuple(int(i) for i in np.flatnonzero(energized) if i != root)
    p_all, q_all = grid.injections(setpoints)
    idx = np.array(order, dtype=int)
    P = np.ascontiguousarray(p_all[idx])
    Q = np.ascontiguousarray(q_all[idx])
    vm = np.ones(len(order))
    va = np.zeros(len(order))
    vm[0] = 1.0
    va[0] = 0.0
    if energized[root]:
        G, B = grid._ybus(order)
        iters, mis, ok = newton_solve(
            G, B, P, Q, vm, va, grid.config.tolerance, grid.config.max_iter
        )
        if not ok or not np.all(np.isfinite(vm)) or np.any(vm <= 0):
            raise PowerFlowError(mis, iters)
    else:
        mis = 0.0
    voltages = np.zeros(grid.n_buses)
    angles = np.zeros(grid.n_buses)
    if energized[root]:
        voltages[idx] = vm
        angles[idx] = va
    return GridState(
        voltages=voltages,
        angles=angles,
        in_service_flags=grid.node_flags(),
        p_injection=p_all,
        q_injection=q_all,
        step=step,
        converged=True,
        mismatch=float(mis),
        demand_p=grid.demand_p.copy(),
        demand_q=grid.demand_q.copy(),
    )


def collapsed_state(grid: Grid, setpoints: SetpointProposal, step: int = 0) -> GridState:
    """State reported when the network cannot be solved: PQ buses at 0 pu."""
    voltages = np.zeros(grid.n_buses)
    voltages[grid._index[grid.slack]] = 1.0
    p_all, q_all = grid.injections(setpoints)
    return GridState(
        voltages=voltages,
        angles=np.zeros(grid.n_buses),
        in_service_flags=grid.node_flags(),
        p_injection=p_all,
        q_injection=q_all,
        step=step,
        converged=False,
        mismatch=math.inf,
        demand_p=grid.demand_p.copy(),
        demand_q=grid.demand_q.copy(),
    )


def enforce_grid_code(grid: Grid, state: GridState, band=None):
    """Trip every in-service node whose bus voltage leaves the closed ``band``.

    Nodes cut off from the slack by a trip are tripped with it. Mutates
    ``grid`` and returns ``(updated_state, newly_disconnected_node_indices)``;
    voltages in the returned state are those of ``state``, re-solve to see
    the post-trip network.
    """
    lo, hi = band if band is not None else grid.config.band
    flags = grid.node_flags()
    v = state.voltages[grid.node_bus_index]
    violating = [k for k in range(grid.n_nodes) if flags[k] and (v[k] < lo or v[k] > hi)]
    if not violating:
        return state, frozenset()
    grid.trip_nodes(violating, state.step)
    energized = grid._energized()
    bus_idx = grid.node_bus_index
    islanded = [
        k for k in range(grid.n_nodes)
        if grid.node_flags()[k] and not energized[bus_idx[k]]
    ]
    grid.trip_nodes(islanded, state.step)
    updated = state.copy()
    updated.in_service_flags = grid.node_flags()
    return updated, frozenset(violating) | frozenset(islanded)
