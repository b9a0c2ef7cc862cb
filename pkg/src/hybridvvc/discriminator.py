"""Per-step arbiter between the droop controller and the SAC policy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .policies import Experience, RulesPolicy, SacPolicy
from .powergrid import SetpointProposal
from .worldmodel import WorldModel

RULES = "rules"
ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class TrackedEstimate:
    value: float = 0.0
    update_count: int = 0
    time_constant: float = 10.0


def pt1_update(est: TrackedEstimate, u: float, running_mean: bool = False) -> TrackedEstimate:
    """First-order lag: the first update copies ``u``, later ones move
    ``1/T`` of the way towards it.

    With ``running_mean`` the divisor is the update count instead of ``T``,
    which turns the filter into a cumulative average.
    """
    if not math.isfinite(u):
        raise ValueError(f"pt1 input must be finite, got {u}")
    if est.update_count == 0:
        value = float(u)
    else:
        t = est.update_count + 1 if running_mean else est.time_constant
        value = est.value + (u - est.value) / t
    return replace(est, value=value, update_count=est.update_count + 1)


def switch_latency_bound(delta: float, time_constant: float, gap: float = 0.0):
    """Updates until a tracker fed ``u`` overtakes a rival fed ``u - delta``.

    Both trackers start equal except for the rival's lead ``gap``; the answer
    is the smallest ``n`` with ``delta * (1 - (1 - 1/T)^n) > gap``. Returns
    ``math.inf`` when the lead can never be closed (``gap >= delta``).
    """
    if time_constant < 1:
        raise ValueError("time constant must be >= 1")
    if delta <= gap:
        return math.inf
    if gap <= 0 or time_constant == 1:
        return 1
    decay = 1.0 - 1.0 / time_constant
    n = max(1, math.ceil(math.log(1.0 - gap / delta) / math.log(decay)))
    # guard the boundary against rounding in the logarithms
    while delta * (1.0 - decay**n) <= gap:
        n += 1
    while n > 1 and delta * (1.0 - decay ** (n - 1)) > gap:
        n -= 1
    return n


@dataclass
class StepOutcome:
    step: int
    chosen: str
    proposal_rules: SetpointProposal
    proposal_adaptive: SetpointProposal
    projected_perf_rules: float
    projected_perf_adaptive: float
    tracked_rules: float
    tracked_adaptive: float
    actual_perf: float
    violations: frozenset = field(default_factory=frozenset)
    warmup: bool = False


class Discriminator:
    """Projects both proposals through the world model, filters their scores
    and applies the proposal whose tracked score is strictly higher (the
    droop controller wins ties). Every step feeds three transitions to the
    learner: both projections and the real outcome.
    """

    def __init__(self, env, rules: RulesPolicy, adaptive: SacPolicy,
                 world_model: WorldModel, time_constant: float = 10.0,
                 running_mean: bool = False, adaptive_mode: str = "train"):
        if time_constant < 1:
            raise ValueError("time constant must be >= 1")
        self.env = env
        self.rules = rules
        self.adaptive = adaptive
        self.world_model = world_model
        self.running_mean = running_mean
        self.adaptive_mode = adaptive_mode
        self.tracked = {
            RULES: TrackedEstimate(time_constant=time_constant),
            ADAPTIVE: TrackedEstimate(time_constant=time_constant),
        }

    def select(self) -> str:
        if self.tracked[ADAPTIVE].value > self.tracked[RULES].value:
            return ADAPTIVE
        return RULES

    def track(self, perf_rules: float, perf_adaptive: float) -> str:
        self.tracked[RULES] = pt1_update(self.tracked[RULES], perf_rules, self.running_mean)
        self.tracked[ADAPTIVE] = pt1_update(self.tracked[ADAPTIVE], perf_adaptive,
                                            self.running_mean)
        return self.select()

    def step(self, done: bool = False) -> StepOutcome:
        env = self.env
        state = env.state
        self.world_model.synchronize(state)
        obs = env.observation_vector(state)
        p_rules = self.rules.propose(state.voltages[env.grid.node_bus_index])
        p_adapt, a_adapt = self.adaptive.propose(obs, self.adaptive_mode)
        if len(p_rules) != len(p_adapt) or len(p_rules) != env.grid.n_actuators:
            raise ValueError("policy proposals do not match the actuator count")

        proj_rules, perf_rules = self.world_model.project(p_rules)
        proj_adapt, perf_adapt = self.world_model.project(p_adapt)
        chosen = self.track(perf_rules, perf_adapt)
        applied = p_rules if chosen == RULES else p_adapt
        result = env.apply(applied)
        self.rules.commit(applied)

        learner = self.adaptive.learner
        amap = self.adaptive.action_map
        a_rules = amap.to_action(p_rules)
        a_chosen = a_rules if chosen == RULES else a_adapt
        learner.record(Experience(obs, a_rules, perf_rules,
                                  env.observation_vector(proj_rules), done))
        learner.record(Experience(obs, a_adapt, perf_adapt,
                                  env.observation_vector(proj_adapt), done))
        learner.record(Experience(obs, a_chosen, result.performance,
                                  env.observation_vector(result.state), done))

        return StepOutcome(
            step=result.state.step,
            chosen=chosen,
            proposal_rules=p_rules,
            proposal_adaptive=p_adapt,
            projected_perf_rules=perf_rules,
            projected_perf_adaptive=perf_adapt,
            tracked_rules=self.tracked[RULES].value,
            tracked_adaptive=self.tracked[ADAPTIVE].value,
            actual_perf=result.performance,
            violations=result.newly_disconnected,
            warmup=learner.updates == 0,
        )
