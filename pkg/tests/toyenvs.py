"""Tiny vectorized environments implementing the trainer's env protocol."""

import numpy as np


class ToyVelocityEnv:
    """1-DoF velocity tracking: action is acceleration, reward exp(-error^2)."""

    obs_dim = 2   # current velocity, commanded velocity
    act_dim = 1

    def __init__(self, n_envs: int, seed: int = 0, horizon: int = 50):
        self.n_envs = n_envs
        self.horizon = horizon
        self.rng = np.random.default_rng(seed)
        self.v = np.zeros(n_envs)
        self.v_cmd = np.zeros(n_envs)
        self.t = np.zeros(n_envs, dtype=int)

    def _obs(self):
        return np.stack([self.v, self.v_cmd], axis=-1)

    def _reset_rows(self, idx):
        self.v[idx] = 0.0
        self.v_cmd[idx] = self.rng.uniform(-1.0, 1.0, len(idx))
        self.t[idx] = 0

    def reset(self, seed=None):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self._reset_rows(np.arange(self.n_envs))
        return self._obs()

    def step(self, action):
        a = np.clip(np.asarray(action)[:, 0], -1.0, 1.0)
        self.v = self.v + 0.2 * a
        self.t += 1
        reward = np.exp(-np.square(self.v - self.v_cmd) * 4.0)
        truncated = self.t >= self.horizon
        terminated = np.zeros(self.n_envs, dtype=bool)
        done = truncated | terminated
        info = {"terminated": terminated, "truncated": truncated,
                "final_obs": self._obs()}
        if done.any():
            self._reset_rows(np.where(done)[0])
        return self._obs(), reward, done, info


class BanditEnv:
    """One-step bandit: reward -(a - optimum)^2, fresh episode every step."""

    obs_dim = 1
    act_dim = 1

    def __init__(self, n_envs: int, optimum: float = 0.7, seed: int = 0):
        self.n_envs = n_envs
        self.optimum = optimum

    def reset(self, seed=None):
        return np.zeros((self.n_envs, 1))

    def step(self, action):
        a = np.asarray(action)[:, 0]
        reward = -np.square(a - self.optimum)
        terminated = np.ones(self.n_envs, dtype=bool)
        info = {"terminated": terminated,
                "truncated": np.zeros(self.n_envs, dtype=bool),
                "final_obs": np.zeros((self.n_envs, 1))}
        return np.zeros((self.n_envs, 1)), reward, terminated, info
