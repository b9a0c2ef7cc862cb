"""Seeded experiment loop: pure SAC, droop only, or the hybrid agent."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..discriminator import ADAPTIVE, RULES, Discriminator
from ..policies import ActionMap, Experience, RulesPolicy, SacConfig, SacLearner, SacPolicy
from ..powergrid import ConfigError, GridConfig, _read_kv, build_benchmark_grid
from ..worldmodel import WorldModel
from .environment import DemandProfile, ScenarioConfig, VoltageControlEnv

log = logging.getLogger(__name__)

MODES = ("pure_sac", "hybrid", "rules_only")
CSV_VERSION = 1
CSV_MAGIC = f"# hybridvvc-run v{CSV_VERSION}"
SCENARIO_PREFIX = "demand_"
FINAL_WINDOW = 200


@dataclass
class AgentConfig:
    sac: SacConfig = field(default_factory=SacConfig)
    droop_step_size: float = 0.1
    time_constant: float = 10.0
    tracker: str = "pt1"

    def validate(self) -> "AgentConfig":
        self.sac.validate()
        if self.droop_step_size <= 0:
            raise ConfigError("droop_step_size must be positive")
        if self.time_constant < 1:
            raise ConfigError("time_constant must be >= 1")
        if self.tracker not in ("pt1", "mean"):
            raise ConfigError("tracker must be 'pt1' or 'mean'")
        return self

    @classmethod
    def from_file(cls, path) -> "AgentConfig":
        kv = _read_kv(Path(path).read_text(encoding="utf-8"), path)
        cfg = cls()
        sac_kv = {}
        for key, raw in kv.items():
            if key in ("droop_step_size", "time_constant"):
                setattr(cfg, key, float(raw))
            elif key == "tracker":
                cfg.tracker = raw
            else:
                sac_kv[key] = raw
        cfg.sac = SacConfig.from_mapping(sac_kv)
        return cfg.validate()


def load_grid_file(path):
    """Split a grid config file into grid keys and ``demand_*`` scenario keys."""
    if path is None:
        return GridConfig().validate(), ScenarioConfig().validate()
    kv = _read_kv(Path(path).read_text(encoding="utf-8"), path)
    grid_kv = {k: v for k, v in kv.items() if not k.startswith(SCENARIO_PREFIX)}
    scen_kv = {k[len(SCENARIO_PREFIX):]: v for k, v in kv.items() if k.startswith(SCENARIO_PREFIX)}
    return GridConfig.from_mapping(grid_kv), ScenarioConfig.from_mapping(scen_kv)


@dataclass
class RunConfig:
    mode: str = "hybrid"
    steps: int = 5760
    seed: int = 0
    grid_config: str | None = None
    agent_config: str | None = None
    out_dir: str | None = None
    # freeze learning from this step on; None = steps // 2 for pure_sac, never for hybrid
    eval_after: int | None = None
    grid: GridConfig | None = None
    scenario: ScenarioConfig | None = None
    agent: AgentConfig | None = None

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.steps <= 0:
            raise ConfigError("steps must be positive")
        return self

    def resolved_eval_after(self) -> int | None:
        if self.eval_after is not None:
            return self.eval_after
        return self.steps // 2 if self.mode == "pure_sac" else None


@dataclass
class RunSummary:
    mode: str
    seed: int
    steps: int
    mean_performance: float
    final_performance: float
    violation_count: int
    first_violation_step: int | None
    violations_in_training: int
    solver_failures: int
    final_tracked_rules: float | None
    final_tracked_adaptive: float | None
    first_switch_step: int | None
    first_crossover_step: int | None
    adaptive_share_final: float | None
    buffer_size: int
    train_updates: int
    csv_path: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json_file(cls, path) -> "RunSummary":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def csv_header(mode, n_buses):
    cols = ["step", "mode", "chosen"]
    if mode == "hybrid":
        cols += ["projected_perf_rules", "projected_perf_adaptive",
                 "tracked_rules", "tracked_adaptive", "warmup"]
    cols += ["actual_performance"]
    cols += [f"v_{i}" for i in range(n_buses)]
    cols += ["new_disconnections", "cumulative_violations"]
    return cols


def _fmt(x):
    return format(float(x), ".9g")


class Experiment:
    """Everything a run needs, wired together from one :class:`RunConfig`."""

    def __init__(self, config: RunConfig):
        self.config = config.validate()
        grid_cfg, scen_cfg = load_grid_file(config.grid_config)
        if config.grid is not None:
            grid_cfg = config.grid.validate()
        if config.scenario is not None:
            scen_cfg = config.scenario.validate()
        agent_cfg = (
            config.agent if config.agent is not None
            else AgentConfig.from_file(config.agent_config) if config.agent_config
            else AgentConfig()
        ).validate()
        self.agent_config = agent_cfg
        scen_seed, agent_seed = np.random.SeedSequence(config.seed).spawn(2)
        grid = build_benchmark_grid(grid_cfg)
        profile = DemandProfile(grid, scen_cfg, config.steps, np.random.default_rng(scen_seed))
        self.env = VoltageControlEnv(grid, profile)
        self.rules = RulesPolicy(grid, agent_cfg.droop_step_size)
        self.action_map = ActionMap.for_grid(grid)
        self.learner = SacLearner(self.env.obs_dim, self.action_map.dim, agent_cfg.sac,
                                  seed=np.random.default_rng(agent_seed))
        self.adaptive = SacPolicy(self.learner, self.action_map)
        self.discriminator = None
        if config.mode == "hybrid":
            self.discriminator = Discriminator(
                self.env, self.rules, self.adaptive,
                WorldModel(grid, self.env.observed_bus_ids, self.env.weights),
                time_constant=agent_cfg.time_constant,
                running_mean=agent_cfg.tracker == "mean",
            )

    def _step_rules(self, t):
        env = self.env
        proposal = self.rules.propose(env.state.voltages[env.grid.node_bus_index])
        result = env.apply(proposal)
        self.rules.commit(env.applied)
        return RULES, result

    def _step_sac(self, t, learning, done):
        env = self.env
        obs = env.observation_vector(env.state)
        proposal, action = self.adaptive.propose(obs, "train" if learning else "eval")
        result = env.apply(proposal)
        if learning:
            self.learner.record(Experience(obs, action, result.performance,
                                           env.observation_vector(result.state), done))
            self.learner.maybe_train(t)
        return ADAPTIVE, result

    def run(self, progress=None) -> RunSummary:
        cfg = self.config
        env = self.env
        eval_after = cfg.resolved_eval_after()
        header = csv_header(cfg.mode, env.grid.n_buses)
        rows = []
        perfs = np.zeros(cfg.steps)
        chosen_log = []
        first_violation = None
        violations_training = 0
        first_crossover = None
        for t in range(cfg.steps):
            done = t == cfg.steps - 1
            learning = eval_after is None or t < eval_after
            extra = []
            if cfg.mode == "rules_only":
                chosen, result = self._step_rules(t)
                newly = result.newly_disconnected
                perf = result.performance
            elif cfg.mode == "pure_sac":
                chosen, result = self._step_sac(t, learning, done)
                newly = result.newly_disconnected
                perf = result.performance
            else:
                disc = self.discriminator
                disc.adaptive_mode = "train" if learning else "eval"
                out = disc.step(done)
                if learning:
                    self.learner.maybe_train(t)
                chosen, newly, perf = out.chosen, out.violations, out.actual_perf
                if first_crossover is None and out.tracked_adaptive > out.tracked_rules:
                    first_crossover = t
                extra = [_fmt(out.projected_perf_rules), _fmt(out.projected_perf_adaptive),
                         _fmt(out.tracked_rules), _fmt(out.tracked_adaptive),
                         str(int(out.warmup))]
            post_voltages = env.last_post.voltages
            if newly and first_violation is None:
                first_violation = t
            if newly and learning:
                violations_training += len(newly)
            perfs[t] = perf
            chosen_log.append(chosen)
            bus_ids = [env.grid.node_bus_ids[k] for k in sorted(newly)]
            rows.append(
                [str(t), cfg.mode, chosen] + extra + [_fmt(perf)]
                + [_fmt(v) for v in post_voltages]
                + [";".join(str(b) for b in bus_ids), str(env.violation_count)]
            )
            if progress is not None:
                progress(t)

        window = min(FINAL_WINDOW, cfg.steps)
        adaptive_share = None
        first_switch = None
        tracked_r = tracked_a = None
        if cfg.mode == "hybrid":
            tail = chosen_log[-window:]
            adaptive_share = sum(c == ADAPTIVE for c in tail) / len(tail)
            first_switch = next((i for i, c in enumerate(chosen_log) if c == ADAPTIVE), None)
            tracked_r = self.discriminator.tracked[RULES].value
            tracked_a = self.discriminator.tracked[ADAPTIVE].value

        csv_path = None
        if cfg.out_dir is not None:
            out = Path(cfg.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            csv_path = out / "run.csv"
            with open(csv_path, "w", newline="", encoding="utf-8") as fh:
                fh.write(CSV_MAGIC + "\n")
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        summary = RunSummary(
            mode=cfg.mode,
            seed=cfg.seed,
            steps=cfg.steps,
            mean_performance=float(perfs.mean()),
            final_performance=float(perfs[-window:].mean()),
            violation_count=env.violation_count,
            first_violation_step=first_violation,
            violations_in_training=violations_training,
            solver_failures=env.solver_failures,
            final_tracked_rules=tracked_r,
            final_tracked_adaptive=tracked_a,
            first_switch_step=first_switch,
            first_crossover_step=first_crossover,
            adaptive_share_final=adaptive_share,
            buffer_size=len(self.learner.buffer),
            train_updates=self.learner.updates,
            csv_path=str(csv_path) if csv_path is not None else None,
        )
        if cfg.out_dir is not None:
            (Path(cfg.out_dir) / "summary.json").write_text(summary.to_json() + "\n",
                                                            encoding="utf-8")
        return summary


def run(config: RunConfig, progress=None) -> RunSummary:
    return Experiment(config).run(progress)
