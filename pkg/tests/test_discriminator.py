import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hybridvvc.discriminator import (ADAPTIVE, RULES, Discriminator, TrackedEstimate,
                                     pt1_update, switch_latency_bound)
from hybridvvc.harness import DemandProfile, ScenarioConfig, VoltageControlEnv
from hybridvvc.policies import ActionMap, RulesPolicy, SacConfig, SacLearner, SacPolicy
from hybridvvc.powergrid import SetpointProposal, build_benchmark_grid
from hybridvvc.worldmodel import WorldModel
from oracles import pt1_trace, select_trace

unit = st.floats(0.0, 1.0)


# -- pt1 ----------------------------------------------------------------------

def test_pt1_examples():
    assert pt1_update(TrackedEstimate(), 0.7).value == 0.7
    assert pt1_update(TrackedEstimate(0.0, 1, 2.0), 1.0).value == 0.5
    for T in (1.0, 3.0, 10.0, 250.0):
        assert pt1_update(TrackedEstimate(0.5, 4, T), 0.5).value == 0.5


def test_pt1_rejects_non_finite():
    with pytest.raises(ValueError):
        pt1_update(TrackedEstimate(), math.nan)


def test_pt1_constant_input_converges():
    est = pt1_update(TrackedEstimate(time_constant=10.0), 0.0)
    for _ in range(100):
        est = pt1_update(est, 1.0)
    assert abs(est.value - 1.0) < 1e-4
    assert est.value == pytest.approx(1.0 - 0.9**100, abs=1e-15)


@given(st.lists(unit, min_size=1, max_size=60), st.floats(1.0, 50.0))
def test_pt1_matches_loop_oracle_and_stays_in_unit_interval(inputs, T):
    est = TrackedEstimate(time_constant=T)
    for u, expected in zip(inputs, pt1_trace(inputs, T)):
        est = pt1_update(est, u)
        assert est.value == expected
        assert 0.0 <= est.value <= 1.0
    assert est.update_count == len(inputs)


def test_running_mean_mode():
    est = TrackedEstimate()
    for u in (0.2, 0.4, 0.9):
        est = pt1_update(est, u, running_mean=True)
    assert est.value == pytest.approx(0.5)


# -- switch latency -----------------------------------------------------------

def test_latency_examples():
    assert switch_latency_bound(0.2, 10, 0.0) == 1
    assert switch_latency_bound(0.2, 10, 0.1) == 7
    assert switch_latency_bound(0.2, 1, 0.15) == 1
    assert switch_latency_bound(0.1, 10, 0.1) == math.inf


@given(st.floats(0.01, 1.0), st.floats(1.0, 40.0), st.floats(0.0, 0.99))
def test_latency_agrees_with_iteration(delta, T, frac):
    gap = frac * delta
    n = 1
    while not delta * (1.0 - (1.0 - 1.0 / T) ** n) > gap:
        n += 1
    assert switch_latency_bound(delta, T, gap) == n

    # the tracker itself: start at u - delta, feed u, rival held at u - delta + gap
    rise = [delta * (1.0 - (1.0 - 1.0 / T) ** m) - gap for m in (n - 1, n)]
    assume(min(abs(r) for r in rise) > 1e-9)
    u = 1.0
    est = TrackedEstimate(u - delta, 1, T)
    k = 0
    while not est.value > u - delta + gap:
        est = pt1_update(est, u)
        k += 1
    assert max(k, 1) == n


# -- selection ----------------------------------------------------------------

class ScriptedWorld:
    """World model stand-in returning scripted projected performances."""

    def __init__(self, rules_perf, adaptive_perf, rules_policy_q):
        self.r = list(rules_perf)
        self.a = list(adaptive_perf)
        self.marker = rules_policy_q
        self.state = None

    def synchronize(self, state):
        self.state = state

    def project(self, proposal):
        is_adaptive = bool(np.any(proposal.p != self.marker.p_prev))
        return self.state, (self.a if is_adaptive else self.r).pop(0)


class FixedAdaptive:
    """Adaptive stub proposing a fixed setpoint vector."""

    def __init__(self, learner, action_map, proposal):
        self.learner = learner
        self.action_map = action_map
        self.proposal = proposal

    def propose(self, obs, mode="train"):
        return self.proposal.copy(), self.action_map.to_action(self.proposal)


def build(seed=0, adaptive=None, capacity=100_000, world=None, **disc_kw):
    grid = build_benchmark_grid()
    env = VoltageControlEnv(grid, DemandProfile(grid, ScenarioConfig(), 400,
                                                np.random.default_rng(seed)))
    rules = RulesPolicy(grid)
    amap = ActionMap.for_grid(grid)
    learner = SacLearner(env.obs_dim, amap.dim, SacConfig(buffer_capacity=capacity, batch_size=8),
                         seed=seed)
    policy = SacPolicy(learner, amap) if adaptive is None else adaptive(learner, amap)
    wm = world(rules) if world else WorldModel(grid, env.observed_bus_ids, env.weights)
    return env, rules, Discriminator(env, rules, policy, wm, **disc_kw)


def test_argmax_and_tie_rule():
    _, _, disc = build()
    disc.tracked[RULES] = TrackedEstimate(0.8, 5)
    disc.tracked[ADAPTIVE] = TrackedEstimate(0.6, 5)
    assert disc.select() == RULES
    disc.tracked[ADAPTIVE] = TrackedEstimate(0.8, 5)
    assert disc.select() == RULES
    disc.tracked[ADAPTIVE] = TrackedEstimate(np.nextafter(0.8, 1), 5)
    assert disc.select() == ADAPTIVE


def test_three_samples_per_step():
    env, _, disc = build()
    for n in range(1, 31):
        disc.step()
        assert len(disc.adaptive.learner.buffer) == 3 * n


def test_buffer_growth_capped_at_capacity():
    _, _, disc = build(capacity=20)
    for n in range(1, 16):
        disc.step()
        assert len(disc.adaptive.learner.buffer) == min(3 * n, 20)


def test_experiences_carry_projections_and_actual():
    env, _, disc = build()
    out = disc.step(done=True)
    items = disc.adaptive.learner.buffer.items()
    assert [e.reward for e in items] == [out.projected_perf_rules, out.projected_perf_adaptive,
                                         out.actual_perf]
    assert all(e.done for e in items)
    amap = disc.adaptive.action_map
    assert np.allclose(items[0].action, amap.to_action(out.proposal_rules))
    chosen = out.proposal_rules if out.chosen == RULES else out.proposal_adaptive
    assert np.allclose(items[2].action, amap.to_action(chosen))


def test_chosen_proposal_is_applied():
    env, _, disc = build(seed=3)
    for _ in range(20):
        out = disc.step()
        chosen = out.proposal_rules if out.chosen == RULES else out.proposal_adaptive
        applied = env.grid.project(chosen)
        assert np.array_equal(env.applied.p, applied.p)
        assert np.array_equal(env.applied.q, applied.q)


def collapse_proposal(grid):
    sp = SetpointProposal(grid.p_hi.copy(), grid.q_lo.copy())
    sp.p[grid.actuator_sign > 0] = 0.0
    sp.q[grid.actuator_sign < 0] = grid.q_hi[grid.actuator_sign < 0]
    return sp


def test_fallback_against_adversarial_adaptive():
    grid = build_benchmark_grid()
    bad = collapse_proposal(grid)
    env, _, disc = build(adaptive=lambda lr, am: FixedAdaptive(lr, am, bad))
    for _ in range(100):
        out = disc.step()
        assert out.projected_perf_adaptive == 0.0
        assert out.chosen == RULES
    assert env.violation_count == 0


def anti_flap_trace():
    rules = [0.9] * 60
    adaptive = [0.8] * 40 + [1.0] + [0.8] * 19
    return rules, adaptive


def test_anti_flapping_matches_oracle():
    rules_in, adapt_in = anti_flap_trace()
    env, _, disc = build(world=lambda rp: ScriptedWorld(rules_in, adapt_in, rp),
                         adaptive=lambda lr, am: FixedAdaptive(
                             lr, am, SetpointProposal(np.full(28, 0.01), np.zeros(28))))
    chosen = [disc.step().chosen for _ in range(60)]
    assert chosen == select_trace(rules_in, adapt_in, 10.0)
    assert chosen == [RULES] * 60
    assert disc.tracked[ADAPTIVE].value < disc.tracked[RULES].value


def test_sustained_advantage_switches_at_predicted_step():
    rules_in = [0.9] * 40 + [0.7] * 40
    adapt_in = [0.8] * 80
    chosen = select_trace(rules_in, adapt_in, 10.0)
    disc_chosen = []
    _, _, disc = build()
    for r, a in zip(rules_in, adapt_in):
        disc_chosen.append(disc.track(r, a))
    assert disc_chosen == chosen
    first = chosen.index(ADAPTIVE)
    # at step 40 the rules tracker sits at 0.9 and adaptive at 0.8; both then move
    # towards 0.7 and 0.8 respectively
    yr, ya, k = 0.9, 0.8, 0
    while not ya > yr:
        yr += (0.7 - yr) / 10
        k += 1
    assert first == 40 + k - 1


normal_unit = st.one_of(st.just(0.0), st.floats(1e-100, 1.0))


@given(st.lists(st.tuples(normal_unit, normal_unit), min_size=1, max_size=50),
       st.integers(0, 20))
def test_selection_scale_invariant(trace, k):
    # power-of-two factors scale every intermediate value exactly
    c = 2.0**-k
    _, _, a = build()
    _, _, b = build()
    for r, ad in trace:
        assert a.track(r, ad) == b.track(c * r, c * ad)


def test_time_constant_validated():
    with pytest.raises(ValueError):
        build(time_constant=0.5)
