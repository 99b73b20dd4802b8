"""Return-conditioned causal sequence model over (return, state, action).

Each of the last K timesteps contributes three tokens; a causally masked
transformer reads the interleaved sequence and an action head predicts the
next action from every state-token position. Training is cross-entropy
against the dataset actions on uniformly sampled length-K windows; at
rollout the return slot starts at the conditioning target and decreases by
the realized rewards. Returns fed to the model are normalized by the
largest trajectory return seen in training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..dataset import Normalization, OfflineDataset
from ..events import HoCounters
from ..mro import clip_action
from ..policies import Policy
from ..tensor import (
    ParamSet,
    Tensor,
    adam_step,
    dense_init,
    embedding_init,
    load_paramset,
    save_paramset,
)
from .cql import greedy_index


@dataclass(frozen=True)
class DTConfig:
    state_dim: int
    context: int = 4
    embed: int = 64
    blocks: int = 2
    n_actions: int = 3
    max_timestep: int = 17
    rtg_scale: float = 1.0

    def to_dict(self) -> dict:
        return {
            "state_dim": self.state_dim,
            "context": self.context,
            "embed": self.embed,
            "blocks": self.blocks,
            "n_actions": self.n_actions,
            "max_timestep": self.max_timestep,
            "rtg_scale": self.rtg_scale,
        }


class DTModel:
    def __init__(self, cfg: DTConfig, normalization: Normalization, rng: np.random.Generator):
        self.cfg = cfg
        self.normalization = normalization
        p = ParamSet()
        e = cfg.embed
        p.add("rtg_w", dense_init(rng, 1, e))
        p.add("rtg_b", np.zeros(e))
        p.add("state_w", dense_init(rng, cfg.state_dim, e))
        p.add("state_b", np.zeros(e))
        p.add("act_w", dense_init(rng, cfg.n_actions, e))
        p.add("act_b", np.zeros(e))
        p.add("time_table", embedding_init(rng, cfg.max_timestep, e))
        for i in range(cfg.blocks):
            p.add(f"b{i}.ln1_g", np.ones(e))
            p.add(f"b{i}.ln1_b", np.zeros(e))
            for name in ("wq", "wk", "wv", "wo"):
                p.add(f"b{i}.{name}", dense_init(rng, e, e))
            p.add(f"b{i}.bo", np.zeros(e))
            p.add(f"b{i}.ln2_g", np.ones(e))
            p.add(f"b{i}.ln2_b", np.zeros(e))
            p.add(f"b{i}.mlp_w1", dense_init(rng, e, 4 * e))
            p.add(f"b{i}.mlp_b1", np.zeros(4 * e))
            p.add(f"b{i}.mlp_w2", dense_init(rng, 4 * e, e))
            p.add(f"b{i}.mlp_b2", np.zeros(e))
        p.add("lnf_g", np.ones(e))
        p.add("lnf_b", np.zeros(e))
        p.add("head_w", dense_init(rng, e, cfg.n_actions))
        p.add("head_b", np.zeros(cfg.n_actions))
        self.params = p

    # -- forward -----------------------------------------------------------------

    def forward(
        self,
        rtg: np.ndarray,
        states: np.ndarray,
        actions_onehot: np.ndarray,
        timesteps: np.ndarray,
    ) -> Tensor:
        """Action logits per timestep position, shape (batch, k, n_actions).

        `rtg` (batch, k) is already normalized; the action token of the
        current position is an all-zero placeholder at rollout time.
        Logits at position t only see tokens of positions <= t.
        """
        cfg = self.cfg
        b, k = rtg.shape
        if k > cfg.context:
            raise ValueError(f"context of {k} steps exceeds the model's K={cfg.context}")
        if k < 1:
            raise ValueError("empty context")
        if timesteps.max() >= cfg.max_timestep or timesteps.min() < 0:
            raise ValueError("timestep outside the embedding table")
        p = self.params
        tpos = T.embedding(p["time_table"], timesteps)
        tok_r = T.add(T.add(T.matmul(Tensor(rtg[..., None]), p["rtg_w"]), p["rtg_b"]), tpos)
        tok_s = T.add(T.add(T.matmul(Tensor(states), p["state_w"]), p["state_b"]), tpos)
        tok_a = T.add(T.add(T.matmul(Tensor(actions_onehot), p["act_w"]), p["act_b"]), tpos)

        e = cfg.embed
        seq = T.reshape(
            T.concat(
                [
                    T.reshape(tok_r, (b, k, 1, e)),
                    T.reshape(tok_s, (b, k, 1, e)),
                    T.reshape(tok_a, (b, k, 1, e)),
                ],
                axis=2,
            ),
            (b, 3 * k, e),
        )
        x = seq
        for i in range(cfg.blocks):
            h = T.layer_norm(x, p[f"b{i}.ln1_g"], p[f"b{i}.ln1_b"])
            q = T.matmul(h, p[f"b{i}.wq"])
            key = T.matmul(h, p[f"b{i}.wk"])
            v = T.matmul(h, p[f"b{i}.wv"])
            att = T.add(T.matmul(T.causal_attention(q, key, v), p[f"b{i}.wo"]), p[f"b{i}.bo"])
            x = T.add(x, att)
            h2 = T.layer_norm(x, p[f"b{i}.ln2_g"], p[f"b{i}.ln2_b"])
            m = T.gelu(T.add(T.matmul(h2, p[f"b{i}.mlp_w1"]), p[f"b{i}.mlp_b1"]))
            m = T.add(T.matmul(m, p[f"b{i}.mlp_w2"]), p[f"b{i}.mlp_b2"])
            x = T.add(x, m)
        x = T.layer_norm(x, p["lnf_g"], p["lnf_b"])
        state_positions = np.arange(k) * 3 + 1
        at_states = T.take_axis1(x, state_positions)
        return T.add(T.matmul(at_states, p["head_w"]), p["head_b"])

    def save(self, path) -> None:
        cfg = {
            "kind": "dt",
            "model": self.cfg.to_dict(),
            "normalization": self.normalization.to_dict(),
        }
        save_paramset(path, self.params, cfg)

    @classmethod
    def load(cls, path) -> "DTModel":
        params, cfg = load_paramset(path)
        if cfg.get("kind") != "dt":
            raise ValueError(f"{path} is not a sequence-model checkpoint")
        model = cls.__new__(cls)
        model.cfg = DTConfig(**cfg["model"])
        model.normalization = Normalization.from_dict(cfg["normalization"])
        model.params = params
        return model


def one_hot_actions(indices: np.ndarray, n_actions: int = 3) -> np.ndarray:
    out = np.zeros(indices.shape + (n_actions,))
    np.put_along_axis(out, indices[..., None], 1.0, axis=-1)
    return out


def dt_loss(model: DTModel, batch: dict[str, np.ndarray]) -> Tensor:
    """Cross-entropy on the action at every window position."""
    logits = model.forward(batch["rtg"], batch["states"], batch["actions_in"], batch["timesteps"])
    b, k, a = logits.data.shape
    return T.cross_entropy_with_logits(
        T.reshape(logits, (b * k, a)), batch["targets"].reshape(b * k)
    )


def train_dt(
    dataset: OfflineDataset,
    context: int = 4,
    embed: int = 64,
    blocks: int = 2,
    learning_rate: float = 1e-3,
    batch_size: int = 64,
    steps: int = 6000,
    seed: int = 0,
) -> tuple[DTModel, list[dict]]:
    """Train on uniformly sampled length-K windows; deterministic given seed."""
    t_horizon = dataset.horizon
    if context > t_horizon:
        raise ValueError(f"context K={context} exceeds the trajectory horizon T={t_horizon}")
    if context < 1:
        raise ValueError("context must be at least 1")
    seq = dataset.sequence_arrays()
    rtg_scale = max(abs(dataset.max_rtg()), 1e-9)
    rng = np.random.default_rng(seed)
    cfg = DTConfig(
        state_dim=seq["states"].shape[2],
        context=context,
        embed=embed,
        blocks=blocks,
        max_timestep=t_horizon,
        rtg_scale=rtg_scale,
    )
    model = DTModel(cfg, dataset.normalization, rng)
    n = seq["states"].shape[0]
    curve: list[dict] = []
    for step in range(steps):
        ti = rng.integers(0, n, size=batch_size)
        start = rng.integers(0, t_horizon - context + 1, size=batch_size)
        gather = start[:, None] + np.arange(context)[None, :]
        states = seq["states"][ti[:, None], gather]
        actions = seq["actions"][ti[:, None], gather]
        rtgs = seq["rtg"][ti[:, None], gather] / rtg_scale
        # teacher forcing: the action token at each position is the executed
        # action; causal masking keeps position t's logits blind to it
        batch = {
            "rtg": rtgs,
            "states": states,
            "actions_in": one_hot_actions(actions),
            "timesteps": gather,
            "targets": actions,
        }
        model.params.zero_grad()
        loss = dt_loss(model, batch)
        loss.backward()
        adam_step(model.params, learning_rate)
        curve.append({"step": step, "loss": float(loss.data)})
    return model, curve


class DTPolicy(Policy):
    """Rollout wrapper: tracks history and decrements the return target."""

    name = "dt"

    def __init__(self, model: DTModel, target_rtg: float):
        self.model = model
        self.target_rtg = float(target_rtg)

    def reset(self, rng) -> None:
        self._states: list[np.ndarray] = []
        self._actions: list[int] = []
        self._rtgs: list[float] = []
        self._remaining = self.target_rtg
        self._t = 0

    def act(self, counters: HoCounters) -> int:
        cfg = self.model.cfg
        self._states.append(self.model.normalization.transform(counters))
        self._rtgs.append(self._remaining)
        k = min(len(self._states), cfg.context)
        start = len(self._states) - k
        states = np.stack(self._states[start:])[None, ...]
        rtg = (np.array(self._rtgs[start:]) / cfg.rtg_scale)[None, ...]
        acts = np.array(self._actions[start:] + [0]) + 1
        onehot = one_hot_actions(acts)[None, ...]
        onehot[0, -1, :] = 0.0  # current action is unknown: placeholder token
        t0 = self._t - k + 1
        timesteps = np.clip(np.arange(t0, self._t + 1), 0, cfg.max_timestep - 1)[None, ...]
        logits = self.model.forward(rtg, states, onehot, timesteps).data[0, -1]
        action = clip_action(counters.cio, greedy_index(logits) - 1)
        self._actions.append(action)
        self._t += 1
        return action

    def observe(self, reward: float) -> None:
        self._remaining -= reward


def dt_rollout(
    model: DTModel,
    scenario,
    sim,
    reward_cfg,
    target_rtg: float,
    init_cio: int,
    world_seed,
    horizon: int | None = None,
):
    """One conditioned episode through the radio world."""
    from ..policies import run_episode

    if not np.isfinite(target_rtg):
        raise ValueError("target return must be finite")
    policy = DTPolicy(model, target_rtg)
    return run_episode(
        scenario=scenario,
        sim=sim,
        policy=policy,
        reward_cfg=reward_cfg,
        init_cio=init_cio,
        world_seed=world_seed,
        horizon=horizon,
    )
