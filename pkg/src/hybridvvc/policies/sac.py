"""Soft actor-critic on numpy: tanh-squashed Gaussian actor, twin critics
with target copies, fixed entropy temperature.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..nn import Adam, init_mlp, mlp_backward, mlp_forward
from ..powergrid import ConfigError, SetpointProposal, _read_kv
from .replay import Experience, ReplayBuffer

CHECKPOINT_MAGIC = b"HVVCSAC\n"
CHECKPOINT_VERSION = 1
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class SacConfig:
    hidden_dims: tuple = (16, 16)
    learning_rate: float = 1e-4
    warmup_steps: int = 50
    train_every: int = 5
    discount: float = 0.9
    batch_size: int = 64
    buffer_capacity: int = 100_000
    polyak: float = 0.995
    temperature: float = 0.2
    # gradient updates per training event
    updates_per_event: int = 1
    activation: str = "relu"
    log_std_bounds: tuple = (-20.0, 2.0)
    init_log_std: float = 0.0
    actor_final_scale: float = 1.0

    def validate(self) -> "SacConfig":
        if not self.hidden_dims or any(h <= 0 for h in self.hidden_dims):
            raise ConfigError("hidden_dims must be positive")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be >= 0")
        for name in ("learning_rate", "train_every", "batch_size",
                     "buffer_capacity", "updates_per_event", "actor_final_scale"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.discount < 1 or not 0 < self.polyak < 1:
            raise ConfigError("discount and polyak must lie in (0, 1)")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.batch_size > self.buffer_capacity:
            raise ConfigError("batch_size exceeds buffer_capacity")
        lo, hi = self.log_std_bounds
        if not lo < hi:
            raise ConfigError("log_std_bounds must be increasing")
        return self

    @classmethod
    def from_mapping(cls, kv: dict) -> "SacConfig":
        cfg = cls()
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in kv.items():
            if key not in types:
                raise ConfigError(f"unknown SAC config key {key!r}")
            if key in ("hidden_dims", "log_std_bounds"):
                parts = [p for p in str(raw).replace(",", " ").split() if p]
                conv = int if key == "hidden_dims" else float
                setattr(cfg, key, tuple(conv(p) for p in parts))
            elif key == "activation":
                setattr(cfg, key, str(raw))
            elif key in ("warmup_steps", "train_every", "batch_size", "buffer_capacity",
                         "updates_per_event"):
                setattr(cfg, key, int(raw))
            else:
                setattr(cfg, key, float(raw))
        return cfg.validate()

    @classmethod
    def from_file(cls, path) -> "SacConfig":
        return cls.from_mapping(_read_kv(Path(path).read_text(encoding="utf-8"), path))


@dataclass
class TrainMetrics:
    critic_loss: float
    actor_loss: float
    entropy: float
    mean_q: float


def _squash_correction(u):
    # log(1 - tanh(u)^2), stable for large |u|
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


class SacLearner:
    """Actor, twin critics, targets, optimizers and replay memory."""

    def __init__(self, obs_dim, act_dim, config: SacConfig | None = None, seed=0):
        self.config = (config or SacConfig()).validate()
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.rng = np.random.default_rng(seed)
        cfg = self.config
        hidden = tuple(cfg.hidden_dims)
        self.actor = init_mlp((obs_dim, *hidden, 2 * act_dim), self.rng, cfg.actor_final_scale)
        self.actor[-1][act_dim:] = cfg.init_log_std
        self.critics = [init_mlp((obs_dim + act_dim, *hidden, 1), self.rng) for _ in range(2)]
        self.targets = [[p.copy() for p in c] for c in self.critics]
        self.actor_opt = Adam(self.actor, cfg.learning_rate)
        self.critic_opts = [Adam(c, cfg.learning_rate) for c in self.critics]
        self.buffer = ReplayBuffer(obs_dim, act_dim, cfg.buffer_capacity)
        self.updates = 0
        self.train_events = 0

    def zero_actor(self):
        for p in self.actor:
            p[...] = 0.0

    def _actor_out(self, obs):
        out, cache = mlp_forward(self.actor, obs, self.config.activation)
        mu = out[:, : self.act_dim]
        raw = out[:, self.act_dim:]
        lo, hi = self.config.log_std_bounds
        log_std = np.clip(raw, lo, hi)
        return mu, log_std, raw, cache

    def act(self, obs, deterministic=False) -> np.ndarray:
        """Normalized action in ``[-1, 1]^act_dim`` for one observation."""
        obs = np.asarray(obs, dtype=float)
        if obs.shape != (self.obs_dim,):
            raise ValueError(f"observation must have shape ({self.obs_dim},), got {obs.shape}")
        mu, log_std, _, _ = self._actor_out(obs[None, :])
        if deterministic:
            return np.tanh(mu[0])
        eps = self.rng.standard_normal(self.act_dim)
        return np.tanh(mu[0] + np.exp(log_std[0]) * eps)

    def log_prob(self, obs, eps):
        """Log-density of the squashed sample built from fixed noise ``eps``."""
        mu, log_std, _, _ = self._actor_out(obs)
        u = mu + np.exp(log_std) * eps
        return np.sum(-0.5 * eps**2 - log_std - _HALF_LOG_2PI - _squash_correction(u), axis=1)

    def record(self, exp: Experience):
        self.buffer.add(exp)

    def should_train(self, step) -> bool:
        cfg = self.config
        return (
            step >= cfg.warmup_steps
            and step % cfg.train_every == 0
            and len(self.buffer) >= cfg.batch_size
        )

    def maybe_train(self, step) -> list:
        """Run a training event if the schedule fires at ``step``."""
        if not self.should_train(step):
            return []
        self.train_events += 1
        return [self.train_step() for _ in range(self.config.updates_per_event)]

    def _q(self, params, obs, act):
        return mlp_forward(params, np.concatenate([obs, act], axis=1), self.config.activation)

    def actor_loss_grad(self, s, eps):
        """``mean(alpha * log pi(a|s) - min Q(s, a))`` with ``a`` reparameterized
        from the fixed noise ``eps``, and its gradient w.r.t. the actor.
        """
        cfg = self.config
        alpha = cfg.temperature
        B = s.shape[0]
        mu, log_std, raw, cache = self._actor_out(s)
        std = np.exp(log_std)
        u = mu + std * eps
        at = np.tanh(u)
        logp = np.sum(-0.5 * eps**2 - log_std - _HALF_LOG_2PI - _squash_correction(u), axis=1)
        q1, c1 = self._q(self.critics[0], s, at)
        q2, c2 = self._q(self.critics[1], s, at)
        use1 = (q1[:, 0] <= q2[:, 0])[:, None].astype(float)
        qmin = np.minimum(q1[:, 0], q2[:, 0])
        loss = float(np.mean(alpha * logp - qmin))
        _, gin1 = mlp_backward(self.critics[0], c1, -use1 / B, cfg.activation)
        _, gin2 = mlp_backward(self.critics[1], c2, -(1.0 - use1) / B, cfg.activation)
        d_at = gin1[:, self.obs_dim:] + gin2[:, self.obs_dim:]
        # d log(1 - tanh^2) / du = -2 tanh
        d_u = d_at * (1.0 - at * at) + (alpha / B) * 2.0 * at
        lo, hi = cfg.log_std_bounds
        d_ls = (d_u * std * eps - alpha / B) * ((raw >= lo) & (raw <= hi))
        grads, _ = mlp_backward(self.actor, cache, np.concatenate([d_u, d_ls], axis=1),
                                cfg.activation)
        return loss, grads, logp, qmin

    def train_step(self) -> TrainMetrics | None:
        """One gradient update of both critics, the actor and the targets.

        Returns ``None`` (no-op) while the buffer holds fewer than a batch.
        """
        cfg = self.config
        B = cfg.batch_size
        if len(self.buffer) < B:
            return None
        alpha = cfg.temperature
        act_fn = cfg.activation
        s, a, r, s2, d = self.buffer.sample(B, self.rng)

        mu2, ls2, _, _ = self._actor_out(s2)
        eps2 = self.rng.standard_normal(mu2.shape)
        u2 = mu2 + np.exp(ls2) * eps2
        a2 = np.tanh(u2)
        logp2 = np.sum(-0.5 * eps2**2 - ls2 - _HALF_LOG_2PI - _squash_correction(u2), axis=1)
        q_targ = np.minimum(self._q(self.targets[0], s2, a2)[0][:, 0],
                            self._q(self.targets[1], s2, a2)[0][:, 0])
        y = r + cfg.discount * (1.0 - d) * (q_targ - alpha * logp2)

        critic_loss = 0.0
        for params, opt in zip(self.critics, self.critic_opts):
            q, cache = self._q(params, s, a)
            diff = q[:, 0] - y
            critic_loss += float(np.mean(diff**2))
            grads, _ = mlp_backward(params, cache, (2.0 / B) * diff[:, None], act_fn)
            opt.step(params, grads)

        eps = self.rng.standard_normal((B, self.act_dim))
        actor_loss, grads, logp, qmin = self.actor_loss_grad(s, eps)
        self.actor_opt.step(self.actor, grads)

        rho = cfg.polyak
        for crit, targ in zip(self.critics, self.targets):
            for p, pt in zip(crit, targ):
                pt *= rho
                pt += (1.0 - rho) * p
        self.updates += 1
        return TrainMetrics(
            critic_loss=critic_loss / 2.0,
            actor_loss=actor_loss,
            entropy=float(-np.mean(logp)),
            mean_q=float(np.mean(qmin)),
        )

    # -- checkpoints ----------------------------------------------------------

    def _tensors(self):
        yield from self.actor
        for c in self.critics:
            yield from c
        for t in self.targets:
            yield from t

    def save(self, path):
        """Write a checkpoint: magic line, one JSON header line, raw float64 LE.

        The header lists tensor shapes in storage order (actor, critic 1,
        critic 2, target 1, target 2) plus buffer metadata; the buffer
        contents themselves are not stored.
        """
        tensors = list(self._tensors())
        cfg = asdict(self.config)
        header = {
            "version": CHECKPOINT_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "config": cfg,
            "shapes": [list(t.shape) for t in tensors],
            "updates": self.updates,
            "buffer": {"size": len(self.buffer), "ptr": self.buffer.ptr,
                       "capacity": self.buffer.capacity, "total": self.buffer.total},
        }
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
            for t in tensors:
                fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path, seed=0) -> "SacLearner":
        with open(path, "rb") as fh:
            if fh.readline() != CHECKPOINT_MAGIC:
                raise ValueError(f"{path}: not a SAC checkpoint")
            header = json.loads(fh.readline().decode("utf-8"))
            if header.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
            blob = fh.read()
        cfg = header["config"]
        cfg["hidden_dims"] = tuple(cfg["hidden_dims"])
        cfg["log_std_bounds"] = tuple(cfg["log_std_bounds"])
        learner = cls(header["obs_dim"], header["act_dim"], SacConfig(**cfg), seed=seed)
        flat = np.frombuffer(blob, dtype="<f8")
        offset = 0
        tensors = list(learner._tensors())
        if [list(t.shape) for t in tensors] != header["shapes"]:
            raise ValueError(f"{path}: tensor shapes do not match the stored config")
        for t in tensors:
            n = t.size
            t[...] = flat[offset: offset + n].reshape(t.shape)
            offset += n
        if offset != flat.size:
            raise ValueError(f"{path}: trailing or missing parameter data")
        learner.updates = header["updates"]
        return learner


class ActionMap:
    """Affine map between ``[-1, 1]`` and interleaved ``(p, q)`` actuator bounds."""

    def __init__(self, p_lo, p_hi, q_lo, q_hi):
        lo = np.empty(2 * len(p_lo))
        hi = np.empty(2 * len(p_lo))
        lo[0::2], lo[1::2] = p_lo, q_lo
        hi[0::2], hi[1::2] = p_hi, q_hi
        self.lo, self.hi = lo, hi
        self.mid = 0.5 * (lo + hi)
        self.half = 0.5 * (hi - lo)

    @classmethod
    def for_grid(cls, grid) -> "ActionMap":
        return cls(grid.p_lo, grid.p_hi, grid.q_lo, grid.q_hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def to_setpoints(self, action) -> SetpointProposal:
        a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        return SetpointProposal.from_vector(np.clip(self.mid + self.half * a, self.lo, self.hi))

    def to_action(self, proposal: SetpointProposal) -> np.ndarray:
        half = np.where(self.half > 0, self.half, 1.0)
        a = np.where(self.half > 0, (proposal.as_vector() - self.mid) / half, 0.0)
        return np.clip(a, -1.0, 1.0)


class SacPolicy:
    """Adaptive policy: the SAC learner behind the actuator action map."""

    def __init__(self, learner: SacLearner, action_map: ActionMap):
        if learner.act_dim != action_map.dim:
            raise ValueError("learner action size does not match the actuator map")
        self.learner = learner
        self.action_map = action_map

    def propose(self, obs_vector, mode="train") -> tuple[SetpointProposal, np.ndarray]:
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        a = self.learner.act(obs_vector, deterministic=(mode == "eval"))
        return self.action_map.to_setpoints(a), a
