"""Single-step toy environment with an enumerable joint reward table.

Each episode is one TS: both agents act on fixed observations and the reward
is read from a table indexed by the joint action, so the best joint action is
known by enumeration.
"""

import numpy as np

from fedassoc.agents import TrainerConfig
from fedassoc.env import StepResult, Violations


class _ToyCfg:
    penalty = 0.0


class ToyEnv:
    def __init__(self, reward_table, obs_dim: int = 4, seed: int = 0):
        self.table = np.asarray(reward_table, dtype=float)
        if self.table.ndim != 2 or self.table.shape[0] != self.table.shape[1]:
            raise ValueError("reward table must be square")
        self.num_agents = 2
        self.num_actions = self.table.shape[0]
        self.obs_dim = obs_dim
        rng = np.random.default_rng(seed)
        self._obs = [rng.random(obs_dim), rng.random(obs_dim)]
        self.cfg = _ToyCfg()

    def best_joint(self) -> tuple[int, int]:
        flat = int(np.argmax(self.table))
        return flat // self.num_actions, flat % self.num_actions

    def reset(self):
        return [o.copy() for o in self._obs]

    def step(self, actions):
        a0, a1 = (int(a) for a in actions)
        r = float(self.table[a0, a1])
        return StepResult(
            reward=r,
            utilities=np.array([r, r]),
            rates=np.zeros(2),
            ho_flags=np.zeros(2, dtype=int),
            tx_powers_w=np.zeros(2),
            assoc_rsus=np.array([-1, -1]),
            violations=Violations(),
            observations=[o.copy() for o in self._obs],
            done=True,
        )


def separable_table(num_actions: int, seed: int) -> np.ndarray:
    """Additive reward table: the joint argmax is also each agent's marginal
    argmax, so independent learners can recover it exactly."""
    rng = np.random.default_rng(seed)
    row = rng.uniform(0.0, 1.0, num_actions)
    col = rng.uniform(0.0, 1.0, num_actions)
    return row[:, None] + col[None, :]


def toy_trainer_cfg(**overrides) -> TrainerConfig:
    """Annealed-exploration settings that solve the toy reliably and fast."""
    cfg = dict(
        episodes=800, batch_size=32, replay_capacity=2048, local_hidden=(32,),
        mlp_hidden=(32,), discount=0.0, share_noise_std=0.0,
        epsilon=1.0, epsilon_end=0.05, epsilon_decay_episodes=600,
        lr_start=0.05, lr_end=0.01, lr_decay_episodes=600, target_sync=25,
    )
    cfg.update(overrides)
    return TrainerConfig(**cfg)
