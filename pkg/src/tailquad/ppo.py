"""Proximal policy optimization with generalized advantage estimation.

Collection fills a fixed-capacity rollout buffer from a vectorized
environment (horizon steps from every parallel instance, auto-resetting on
episode end), GAE turns it into advantages and value targets, and the update
maximizes the clipped surrogate with Adam. The learning rate adapts by
doubling/halving when the measured KL leaves [kl_low, kl_high]. A non-finite
loss aborts the update and restores the pre-update parameters.

Environment protocol (see envs module): ``reset(seed) -> obs``,
``step(actions) -> (obs, reward, done, info)`` with boolean ``terminated`` /
``truncated`` arrays and ``final_obs`` (pre-reset observations, valid where
done) in the info dict.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields

import numpy as np
import torch

from .control import PolicyNetwork, RunningNorm, ValueNetwork, gaussian_log_prob


@dataclass
class PpoConfig:
    clip_ratio: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    learning_rate: float = 3e-4
    epochs: int = 4
    minibatches: int = 4
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 1.0
    kl_low: float = 0.004
    kl_high: float = 0.02
    lr_min: float = 1e-6
    lr_max: float = 1e-2
    adaptive_lr: bool = True
    horizon: int = 100
    n_envs: int = 256

    def __post_init__(self):
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError("clip ratio must lie in (0, 1)")
        for name in ("gamma", "lam"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "PpoConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown ppo config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class RolloutBuffer:
    """Fixed-capacity on-policy storage, (horizon, n_envs, ...) arrays."""

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    next_values: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    term_tags: np.ndarray        # small int code per step, 0 = none
    extras: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, horizon: int, n_envs: int, obs_dim: int, act_dim: int) -> "RolloutBuffer":
        return cls(
            obs=np.zeros((horizon, n_envs, obs_dim)),
            actions=np.zeros((horizon, n_envs, act_dim)),
            log_probs=np.zeros((horizon, n_envs)),
            rewards=np.zeros((horizon, n_envs)),
            values=np.zeros((horizon, n_envs)),
            next_values=np.zeros((horizon, n_envs)),
            terminated=np.zeros((horizon, n_envs), dtype=bool),
            truncated=np.zeros((horizon, n_envs), dtype=bool),
            term_tags=np.zeros((horizon, n_envs), dtype=np.int8),
        )

    @property
    def horizon(self) -> int:
        return self.obs.shape[0]

    @property
    def n_envs(self) -> int:
        return self.obs.shape[1]


def evaluate_values(value_net: ValueNetwork, obs: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        return value_net(torch.as_tensor(obs, dtype=torch.float64)).numpy()


def collect_rollouts(env, policy: PolicyNetwork, value_net: ValueNetwork,
                     obs_norm: RunningNorm, horizon: int,
                     generator: torch.Generator, start_obs: np.ndarray | None = None):
    """Gather horizon steps from every parallel environment.

    Returns (buffer, final raw observation) so collection can resume
    mid-episode on the next iteration. Deterministic given the generator
    state, the environment's internal seeding, and start_obs.
    """
    obs = env.reset() if start_obs is None else start_obs
    buf = RolloutBuffer.empty(horizon, env.n_envs, env.obs_dim, env.act_dim)
    raw_obs = np.zeros((horizon, env.n_envs, env.obs_dim))
    for t in range(horizon):
        raw_obs[t] = obs
        norm_obs = obs_norm.normalize(obs)
        obs_t = torch.as_tensor(norm_obs, dtype=torch.float64)
        with torch.no_grad():
            mean = policy(obs_t)
            noise = torch.randn(mean.shape, generator=generator, dtype=torch.float64)
            action_t = mean + torch.exp(policy.log_std) * noise
            logp = gaussian_log_prob(mean, policy.log_std, action_t)
        action = action_t.numpy()
        next_obs, reward, done, info = env.step(action)
        buf.obs[t] = norm_obs
        buf.actions[t] = action
        buf.log_probs[t] = logp.numpy()
        buf.rewards[t] = reward
        buf.values[t] = evaluate_values(value_net, norm_obs)
        buf.terminated[t] = info["terminated"]
        buf.truncated[t] = info["truncated"]
        if "term_tags" in info:
            buf.term_tags[t] = info["term_tags"]
        for key, val in info.items():
            if key.startswith("reward/"):
                buf.extras.setdefault(key, np.zeros((horizon, env.n_envs)))[t] = val
        # bootstrap target: value of the true successor state (pre-reset at
        # episode boundaries), zeroed later where the episode terminated
        if done.any():
            boundary_obs = obs_norm.normalize(info["final_obs"][done])
            vals = np.zeros(env.n_envs)
            vals[done] = evaluate_values(value_net, boundary_obs)
            live = ~done
            if live.any():
                vals[live] = evaluate_values(value_net, obs_norm.normalize(next_obs[live]))
            buf.next_values[t] = vals
        else:
            buf.next_values[t] = evaluate_values(value_net, obs_norm.normalize(next_obs))
        obs = next_obs
    obs_norm.update(raw_obs.reshape(-1, env.obs_dim))
    return buf, obs


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float):
    """Within-episode advantages A_t = sum_k (gamma lam)^k delta_{t+k} and targets.

    Termination cuts the bootstrap; truncation bootstraps the final value but
    still breaks the accumulation chain.
    """
    T, N = buffer.rewards.shape
    adv = np.zeros((T, N))
    running = np.zeros(N)
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - buffer.terminated[t].astype(float)
        chain = 1.0 - (buffer.terminated[t] | buffer.truncated[t]).astype(float)
        delta = buffer.rewards[t] + gamma * buffer.next_values[t] * nonterminal - buffer.values[t]
        running = delta + gamma * lam * chain * running
        adv[t] = running
    targets = adv + buffer.values
    return adv, targets


def surrogate_loss(policy: PolicyNetwork, obs: torch.Tensor, actions: torch.Tensor,
                   old_log_probs: torch.Tensor, advantages: torch.Tensor,
                   clip_ratio: float) -> torch.Tensor:
    """Negative clipped surrogate objective (to be minimized)."""
    mean = policy(obs)
    logp = gaussian_log_prob(mean, policy.log_std, actions)
    ratio = torch.exp(logp - old_log_probs)
    clipped = torch.clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio)
    return -torch.min(ratio * advantages, clipped * advantages).mean()


@dataclass
class UpdateStats:
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    kl: float = 0.0
    clip_fraction: float = 0.0
    learning_rate: float = 0.0
    aborted: bool = False


def ppo_update(policy: PolicyNetwork, value_net: ValueNetwork,
               optimizer: torch.optim.Optimizer, buffer: RolloutBuffer,
               config: PpoConfig, generator: torch.Generator) -> UpdateStats:
    """Run the clipped-surrogate epochs over shuffled minibatches."""
    adv, targets = compute_gae(buffer, config.gamma, config.lam)
    flat = lambda a: a.reshape(-1, *a.shape[2:])
    adv_f = flat(adv)
    adv_f = (adv_f - adv_f.mean()) / (adv_f.std() + 1e-8)
    obs = torch.as_tensor(flat(buffer.obs), dtype=torch.float64)
    actions = torch.as_tensor(flat(buffer.actions), dtype=torch.float64)
    old_logp = torch.as_tensor(flat(buffer.log_probs), dtype=torch.float64)
    advantages = torch.as_tensor(adv_f, dtype=torch.float64)
    value_targets = torch.as_tensor(flat(targets), dtype=torch.float64)

    snapshot = (copy.deepcopy(policy.state_dict()), copy.deepcopy(value_net.state_dict()))
    total = obs.shape[0]
    mb_size = total // config.minibatches
    stats = UpdateStats(learning_rate=optimizer.param_groups[0]["lr"])
    kls, clips, p_losses, v_losses, entropies = [], [], [], [], []
    for _ in range(config.epochs):
        perm = torch.randperm(total, generator=generator)
        for mb in range(config.minibatches):
            idx = perm[mb * mb_size:(mb + 1) * mb_size]
            mean = policy(obs[idx])
            logp = gaussian_log_prob(mean, policy.log_std, actions[idx])
            ratio = torch.exp(logp - old_logp[idx])
            clipped = torch.clamp(ratio, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio)
            policy_loss = -torch.min(ratio * advantages[idx], clipped * advantages[idx]).mean()
            values = value_net(obs[idx])
            value_loss = ((values - value_targets[idx]) ** 2).mean()
            entropy = (policy.log_std + 0.5 * np.log(2.0 * np.pi * np.e)).sum()
            loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy
            if not torch.isfinite(loss):
                policy.load_state_dict(snapshot[0])
                value_net.load_state_dict(snapshot[1])
                stats.aborted = True
                return stats
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(
                list(policy.parameters()) + list(value_net.parameters()),
                config.max_grad_norm)
            optimizer.step()
            with torch.no_grad():
                kls.append(((ratio - 1.0) - torch.log(ratio)).mean().item())
                clips.append((torch.abs(ratio - 1.0) > config.clip_ratio).double().mean().item())
                p_losses.append(policy_loss.item())
                v_losses.append(value_loss.item())
                entropies.append(entropy.item())
    stats.policy_loss = float(np.mean(p_losses))
    stats.value_loss = float(np.mean(v_losses))
    stats.entropy = float(np.mean(entropies))
    stats.kl = float(np.mean(kls))
    stats.clip_fraction = float(np.mean(clips))
    if config.adaptive_lr:
        lr = optimizer.param_groups[0]["lr"]
        if stats.kl > config.kl_high:
            lr = max(config.lr_min, lr / 2.0)
        elif stats.kl < config.kl_low:
            lr = min(config.lr_max, lr * 2.0)
        for group in optimizer.param_groups:
            group["lr"] = lr
        stats.learning_rate = lr
    return stats
