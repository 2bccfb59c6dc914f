"""The action path: observation assembly, policy MLPs, action scaling, PD torques.

Observations concatenate joint state, two steps of joint-position history,
body-frame base velocities, the base orientation as its x- and z-axes in
world coordinates, and (for commanded tasks) the command segment: planar
velocity command plus the commanded heading encoded relative to the current
body heading as sin/cos. The reorientation task runs commandless, so its
command segment has length zero.

Policy output is a Gaussian with a state-independent learned log-std; the
mean comes from an MLP. Actions scale by a fixed factor (0.3) and offset the
nominal joint configuration before the PD controller (Kp 17, Kd 0.4) turns
the target into torques.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .dynamics import SimState
from .mathutils import quat_conjugate, quat_rotate, quat_to_matrix, quat_yaw

ACTION_FACTOR = 0.3
INIT_LOG_STD = float(np.log(0.8))


@dataclass(frozen=True)
class PDGains:
    kp: float = 17.0   # N*m/rad
    kd: float = 0.4    # N*m*s/rad

    def __post_init__(self):
        if not (self.kp > 0.0 and self.kd > 0.0):
            raise ValueError("PD gains must be positive")


@dataclass
class ObservationLayout:
    """Fixed segment offsets; commanded tasks append a 4-value command block."""

    n_joints: int
    with_command: bool

    @property
    def segments(self) -> dict[str, tuple[int, int]]:
        nj = self.n_joints
        sizes = [("joint_pos", nj), ("joint_vel", nj), ("hist_prev", nj),
                 ("hist_prev2", nj), ("ang_vel", 3), ("lin_vel", 3),
                 ("orientation", 6), ("command", 4 if self.with_command else 0)]
        out, off = {}, 0
        for name, size in sizes:
            out[name] = (off, off + size)
            off += size
        return out

    @property
    def size(self) -> int:
        return max(end for _, end in self.segments.values())


@dataclass
class JointHistory:
    """Joint positions at the two preceding control steps, (N, 2, nj)."""

    buffer: np.ndarray

    @classmethod
    def reset_to(cls, joint_pos: np.ndarray) -> "JointHistory":
        return cls(np.stack([joint_pos, joint_pos], axis=1).copy())

    def push(self, joint_pos: np.ndarray) -> None:
        self.buffer[:, 1] = self.buffer[:, 0]
        self.buffer[:, 0] = joint_pos

    def reset_rows(self, idx, joint_pos: np.ndarray) -> None:
        self.buffer[idx, 0] = joint_pos
        self.buffer[idx, 1] = joint_pos


def build_observation(state: SimState, history: JointHistory,
                      command: dict | None, layout: ObservationLayout) -> np.ndarray:
    """Assemble the observation matrix (N, layout.size) in the documented order."""
    if layout.with_command and command is None:
        raise ValueError("layout expects a command segment")
    q_inv = quat_conjugate(state.base_quat)
    omega_body = state.base_ang_vel
    vel_body = quat_rotate(q_inv, state.base_vel)
    rot = quat_to_matrix(state.base_quat)
    parts = [
        state.joint_pos,
        state.joint_vel,
        history.buffer[:, 0],
        history.buffer[:, 1],
        omega_body,
        vel_body,
        rot[:, :, 0],   # body x-axis in world
        rot[:, :, 2],   # body z-axis in world
    ]
    if layout.with_command:
        yaw = quat_yaw(state.base_quat)
        rel = np.asarray(command["heading"], dtype=float) - yaw
        parts.append(np.stack([
            np.asarray(command["v_x"], dtype=float) * np.ones(state.n),
            np.asarray(command["v_y"], dtype=float) * np.ones(state.n),
            np.sin(rel), np.cos(rel)], axis=-1))
    obs = np.concatenate(parts, axis=-1)
    if obs.shape[-1] != layout.size:
        raise ValueError(f"observation width {obs.shape[-1]} != layout {layout.size}")
    return obs


def scale_action(action: np.ndarray, q_nominal: np.ndarray,
                 joint_limits: np.ndarray, sigma: float = ACTION_FACTOR) -> np.ndarray:
    """q_des = clip(q_nominal + sigma * action, joint limits)."""
    action = np.asarray(action, dtype=float)
    if action.shape[-1] != len(q_nominal):
        raise ValueError("action size does not match the joint count")
    target = q_nominal + sigma * action
    return np.clip(target, joint_limits[:, 0], joint_limits[:, 1])


def pd_torque(q_des: np.ndarray, joint_pos: np.ndarray, joint_vel: np.ndarray,
              gains: PDGains = PDGains(), torque_limit: float = 17.0) -> np.ndarray:
    """tau = clip(Kp (q_des - p) - Kd pdot, +-torque limit)."""
    q_des = np.asarray(q_des, dtype=float)
    if q_des.shape != np.shape(joint_pos):
        raise ValueError("q_des shape does not match joint_pos")
    tau = gains.kp * (q_des - joint_pos) - gains.kd * np.asarray(joint_vel, dtype=float)
    return np.clip(tau, -torque_limit, torque_limit)


class MLP(torch.nn.Module):
    """Tanh MLP in float64 with seeded orthogonal initialization."""

    def __init__(self, in_dim: int, hidden: list[int], out_dim: int,
                 seed: int = 0, out_gain: float = 0.01):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        layers = []
        prev = in_dim
        for width in hidden:
            layers.append(self._linear(prev, width, np.sqrt(2.0), gen))
            layers.append(torch.nn.Tanh())
            prev = width
        layers.append(self._linear(prev, out_dim, out_gain, gen))
        self.net = torch.nn.Sequential(*layers)

    @staticmethod
    def _linear(i, o, gain, gen):
        lin = torch.nn.Linear(i, o, dtype=torch.float64)
        w = torch.empty(o, i, dtype=torch.float64)
        torch.nn.init.orthogonal_(w, gain=gain, generator=gen)
        with torch.no_grad():
            lin.weight.copy_(w)
            lin.bias.zero_()
        return lin

    def forward(self, x):
        return self.net(x)


class PolicyNetwork(torch.nn.Module):
    """Actor: observation -> Gaussian action mean, plus learned log-std."""

    def __init__(self, obs_dim: int, act_dim: int, hidden=(512, 256, 128),
                 seed: int = 0, init_log_std: float = INIT_LOG_STD):
        super().__init__()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.mean_net = MLP(obs_dim, list(hidden), act_dim, seed=seed)
        self.log_std = torch.nn.Parameter(
            torch.full((act_dim,), float(init_log_std), dtype=torch.float64))

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        if obs.shape[-1] != self.obs_dim:
            raise ValueError(f"observation width {obs.shape[-1]} != network input {self.obs_dim}")
        return self.mean_net(obs)

    def distribution(self, obs: torch.Tensor):
        mean = self.forward(obs)
        return torch.distributions.Normal(mean, torch.exp(self.log_std))


class ValueNetwork(torch.nn.Module):
    """Critic: observation -> scalar state value."""

    def __init__(self, obs_dim: int, hidden=(512, 256, 128), seed: int = 1):
        super().__init__()
        self.obs_dim = obs_dim
        self.net = MLP(obs_dim, list(hidden), 1, seed=seed, out_gain=1.0)

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.net(obs).squeeze(-1)


def gaussian_log_prob(mean: torch.Tensor, log_std: torch.Tensor,
                      action: torch.Tensor) -> torch.Tensor:
    """Diagonal Gaussian log-density summed over action dimensions."""
    var = torch.exp(2.0 * log_std)
    return (-0.5 * ((action - mean) ** 2) / var - log_std
            - 0.5 * np.log(2.0 * np.pi)).sum(-1)


def policy_forward(network: PolicyNetwork, obs: np.ndarray,
                   generator: torch.Generator | None = None,
                   deterministic: bool = False):
    """Evaluate the policy: (mean, sampled action, log-probability of the sample).

    Sampling uses the explicit generator; deterministic mode returns the mean
    as the action.
    """
    obs_t = torch.as_tensor(np.asarray(obs), dtype=torch.float64)
    with torch.no_grad():
        mean = network(obs_t)
        if deterministic:
            action = mean
        else:
            noise = torch.randn(mean.shape, generator=generator, dtype=torch.float64)
            action = mean + torch.exp(network.log_std) * noise
        logp = gaussian_log_prob(mean, network.log_std, action)
    return mean.numpy(), action.numpy(), logp.numpy()


@dataclass
class RunningNorm:
    """Streaming mean/variance observation filter with a clipped output range."""

    mean: np.ndarray
    var: np.ndarray
    count: float = 1e-4
    clip: float = 10.0
    frozen: bool = False

    @classmethod
    def for_dim(cls, dim: int) -> "RunningNorm":
        return cls(mean=np.zeros(dim), var=np.ones(dim))

    def update(self, batch: np.ndarray) -> None:
        if self.frozen:
            return
        batch = np.asarray(batch, dtype=float).reshape(-1, self.mean.shape[0])
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        b_count = batch.shape[0]
        delta = b_mean - self.mean
        total = self.count + b_count
        self.mean = self.mean + delta * b_count / total
        m_a = self.var * self.count
        m_b = b_var * b_count
        self.var = (m_a + m_b + delta * delta * self.count * b_count / total) / total
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return np.clip((x - self.mean) / np.sqrt(self.var + 1e-8), -self.clip, self.clip)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "var": self.var.tolist(),
                "count": self.count, "clip": self.clip}

    @classmethod
    def from_dict(cls, d: dict) -> "RunningNorm":
        return cls(mean=np.array(d["mean"]), var=np.array(d["var"]),
                   count=d["count"], clip=d["clip"])
