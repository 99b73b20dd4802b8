"""Conservative Q-learning over a double-DQN backbone, discrete actions.

The TD target bootstraps the target network at the online network's argmax
(zero at the terminal step); the conservative penalty adds, per sample,
logsumexp over all action values minus the value of the dataset action,
which is non-negative and shrinks toward zero as the learned values
concentrate on in-distribution actions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..dataset import Normalization, OfflineDataset
from ..events import HoCounters
from ..mro import clip_action
from ..policies import Policy
from ..tensor import ParamSet, Tensor, adam_step, dense_init, load_paramset, save_paramset

#: preference order for exact value ties: keep, step down, step up
TIE_ORDER = (1, 0, 2)


def _gelu_np(x: np.ndarray) -> np.ndarray:
    from scipy.special import erf

    return x * 0.5 * (1.0 + erf(x / np.sqrt(2.0)))


def greedy_index(values: np.ndarray) -> int:
    best = values.max()
    for idx in TIE_ORDER:
        if values[idx] == best:
            return idx
    return int(values.argmax())


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class QConfig:
    state_dim: int
    hidden: int = 64
    gamma: float = 0.99
    alpha: float = 1.0
    huber_delta: float = 1.0

    def to_dict(self) -> dict:
        return {
            "state_dim": self.state_dim,
            "hidden": self.hidden,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "huber_delta": self.huber_delta,
        }


class QModel:
    """Two-hidden-layer gelu MLP from normalized state to 3 action values."""

    def __init__(self, cfg: QConfig, normalization: Normalization, rng: np.random.Generator):
        self.cfg = cfg
        self.normalization = normalization
        self.params = ParamSet()
        s, h = cfg.state_dim, cfg.hidden
        self.params.add("w1", dense_init(rng, s, h))
        self.params.add("b1", np.zeros(h))
        self.params.add("w2", dense_init(rng, h, h))
        self.params.add("b2", np.zeros(h))
        self.params.add("w3", dense_init(rng, h, 3))
        self.params.add("b3", np.zeros(3))
        self.target = self.params.copy_values()

    def q_tensor(self, states: np.ndarray) -> Tensor:
        p = self.params
        h1 = T.gelu(T.add(T.matmul(Tensor(states), p["w1"]), p["b1"]))
        h2 = T.gelu(T.add(T.matmul(h1, p["w2"]), p["b2"]))
        return T.add(T.matmul(h2, p["w3"]), p["b3"])

    def q_values(self, states: np.ndarray) -> np.ndarray:
        return self.q_tensor(states).data

    def q_target(self, states: np.ndarray) -> np.ndarray:
        t = self.target
        h1 = _gelu_np(states @ t["w1"] + t["b1"])
        h2 = _gelu_np(h1 @ t["w2"] + t["b2"])
        return h2 @ t["w3"] + t["b3"]

    def sync_target(self) -> None:
        self.target = self.params.copy_values()

    def save(self, path) -> None:
        cfg = {
            "kind": "cql",
            "model": self.cfg.to_dict(),
            "normalization": self.normalization.to_dict(),
            "target": {k: v.reshape(-1).tolist() for k, v in self.target.items()},
        }
        save_paramset(path, self.params, cfg)

    @classmethod
    def load(cls, path) -> "QModel":
        params, cfg = load_paramset(path)
        if cfg.get("kind") != "cql":
            raise ValueError(f"{path} is not a value-model checkpoint")
        model = cls.__new__(cls)
        model.cfg = QConfig(**cfg["model"])
        model.normalization = Normalization.from_dict(cfg["normalization"])
        model.params = params
        model.target = {
            k: np.asarray(v, dtype=np.float64).reshape(params.params[k].data.shape)
            for k, v in cfg["target"].items()
        }
        return model


def cql_loss(model: QModel, batch: dict[str, np.ndarray]) -> tuple[Tensor, dict]:
    """Double-DQN TD loss plus the conservative penalty; returns (loss, parts)."""
    if batch["states"].shape[0] == 0:
        raise ValueError("empty batch")
    gamma = model.cfg.gamma
    # greedy action by the online network, evaluated by the target copy
    q_next_online = model.q_values(batch["next_states"])
    a_star = q_next_online.argmax(axis=1)
    q_next_target = model.q_target(batch["next_states"])
    bootstrap = np.take_along_axis(q_next_target, a_star[:, None], axis=1).squeeze(1)
    y = batch["rewards"] + gamma * np.where(batch["terminal"], 0.0, bootstrap)

    q = model.q_tensor(batch["states"])
    q_data = T.gather_last(q, batch["actions"])
    td = T.huber(q_data, Tensor(y), delta=model.cfg.huber_delta)
    penalty = T.tmean(T.sub(T.logsumexp(q), q_data))
    loss = T.add(td, T.mul(penalty, model.cfg.alpha))
    if not np.isfinite(loss.data):
        raise TrainingDiverged("non-finite loss")
    return loss, {"td": float(td.data), "penalty": float(penalty.data)}


def train_cql(
    dataset: OfflineDataset,
    state_dim: int | None = None,
    hidden: int = 64,
    gamma: float = 0.99,
    alpha: float = 1.0,
    learning_rate: float = 1e-3,
    batch_size: int = 128,
    steps: int = 6000,
    target_sync: int = 200,
    huber_delta: float = 1.0,
    divergence_threshold: float = 1e4,
    divergence_patience: int = 50,
    seed: int = 0,
) -> tuple[QModel, list[dict]]:
    """Minibatch Adam on the conservative loss; deterministic given the seed."""
    arrays = dataset.transition_arrays()
    n = arrays["states"].shape[0]
    if n == 0:
        raise ValueError("dataset holds no transitions")
    cfg = QConfig(
        state_dim=state_dim or arrays["states"].shape[1],
        hidden=hidden,
        gamma=gamma,
        alpha=alpha,
        huber_delta=huber_delta,
    )
    rng = np.random.default_rng(seed)
    model = QModel(cfg, dataset.normalization, rng)
    model.sync_target()
    curve: list[dict] = []
    hot = 0
    for step in range(steps):
        idx = rng.integers(0, n, size=batch_size)
        batch = {
            "states": arrays["states"][idx],
            "actions": arrays["actions"][idx],
            "rewards": arrays["rewards"][idx],
            "next_states": arrays["next_states"][idx],
            "terminal": arrays["terminal"][idx],
        }
        model.params.zero_grad()
        loss, parts = cql_loss(model, batch)
        loss.backward()
        adam_step(model.params, learning_rate)
        if step % target_sync == 0 and step > 0:
            model.sync_target()
        value = float(loss.data)
        curve.append({"step": step, "loss": value, **parts})
        hot = hot + 1 if value > divergence_threshold else 0
        if hot >= divergence_patience:
            raise TrainingDiverged(
                f"loss above {divergence_threshold} for {divergence_patience} steps "
                f"(last {value:.3g} at step {step})"
            )
    return model, curve


def cql_action(model: QModel, counters: HoCounters) -> int:
    """Greedy action under the learned values, tie toward keeping the offset."""
    state = model.normalization.transform(counters)[None, :]
    q = model.q_values(state)[0]
    return clip_action(counters.cio, greedy_index(q) - 1)


class CqlPolicy(Policy):
    name = "cql"

    def __init__(self, model: QModel):
        self.model = model

    def act(self, counters: HoCounters) -> int:
        return cql_action(self.model, counters)
