"""Sequence model: causal masking, scripted-policy recovery, rollouts."""

import numpy as np
import pytest

from mrolab.agents import DTConfig, DTModel, DTPolicy, dt_loss, one_hot_actions, train_dt
from mrolab.dataset import Normalization, OfflineDataset
from mrolab.events import HoCounters
from mrolab.policies import Trajectory, Transition
from mrolab.rewards import rtg as rtg_suffix

IDENTITY_NORM = Normalization(mean=tuple([0.0] * 12), scale=tuple([1.0] * 12), n_all_ref=10.0)


def tiny_model(seed=0, state_dim=12, context=4, embed=16, blocks=2, max_timestep=17):
    cfg = DTConfig(
        state_dim=state_dim,
        context=context,
        embed=embed,
        blocks=blocks,
        max_timestep=max_timestep,
        rtg_scale=1.0,
    )
    return DTModel(cfg, IDENTITY_NORM, np.random.default_rng(seed))


def random_context(rng, k, state_dim=12):
    return {
        "rtg": rng.normal(size=(1, k)),
        "states": rng.normal(size=(1, k, state_dim)),
        "actions": one_hot_actions(rng.integers(0, 3, size=(1, k))),
        "timesteps": np.arange(k)[None, :],
    }


# -- scripted-policy fixture: move the offset toward zero ------------------------


def scripted_state(cio: int, rng) -> HoCounters:
    return HoCounters(cio=cio, n_suc=int(rng.integers(10, 30)), n_fte=1, n_ftl=1)


def scripted_action(cio: int) -> int:
    return -1 if cio > 0 else (1 if cio < 0 else 0)


def scripted_dataset(n_episodes=48, T=17, seed=0) -> OfflineDataset:
    rng = np.random.default_rng(seed)
    trajectories = []
    for ep in range(n_episodes):
        cio = int(rng.integers(-8, 9))
        transitions = []
        for t in range(T):
            a = scripted_action(cio)
            nxt = cio + a
            transitions.append(
                Transition(
                    state=scripted_state(cio, rng),
                    action=a,
                    reward=1.0,
                    next_state=scripted_state(nxt, rng),
                    terminal=(t == T - 1),
                )
            )
            cio = nxt
        trajectories.append(
            Trajectory(
                scenario_id="scripted",
                policy="scripted",
                init_cio=transitions[0].state.cio,
                episode_seed=ep,
                transitions=transitions,
                rtg=rtg_suffix([tr.reward for tr in transitions]),
            )
        )
    return OfflineDataset(trajectories, {"fixture": True})


def test_causal_mask_prefix_logits_bit_identical():
    rng = np.random.default_rng(5)
    model = tiny_model()
    for trial in range(20):
        k = int(rng.integers(2, 5))
        ctx = random_context(rng, k)
        base = model.forward(ctx["rtg"], ctx["states"], ctx["actions"], ctx["timesteps"]).data
        cut = int(rng.integers(1, k))
        pert = {key: np.copy(val) for key, val in ctx.items()}
        pert["rtg"][:, cut:] += rng.normal(size=(1, k - cut)) * 5.0
        pert["states"][:, cut:] += rng.normal(size=(1, k - cut, 12)) * 5.0
        pert["actions"][:, cut:] = one_hot_actions(rng.integers(0, 3, size=(1, k - cut)))
        out = model.forward(pert["rtg"], pert["states"], pert["actions"], pert["timesteps"]).data
        np.testing.assert_array_equal(base[:, :cut], out[:, :cut])


def test_perturbing_current_action_token_leaves_its_logits():
    # at position t the prediction may not peek at a_t itself
    rng = np.random.default_rng(7)
    model = tiny_model()
    ctx = random_context(rng, 4)
    base = model.forward(ctx["rtg"], ctx["states"], ctx["actions"], ctx["timesteps"]).data
    pert = np.copy(ctx["actions"])
    pert[:, -1] = one_hot_actions(np.array([[2]]))[:, 0]
    out = model.forward(ctx["rtg"], ctx["states"], pert, ctx["timesteps"]).data
    np.testing.assert_array_equal(base[:, -1], out[:, -1])


def test_zeroed_head_gives_uniform_logits():
    model = tiny_model()
    model.params["head_w"].data[:] = 0.0
    model.params["head_b"].data[:] = 0.0
    rng = np.random.default_rng(1)
    ctx = random_context(rng, 3)
    out = model.forward(ctx["rtg"], ctx["states"], ctx["actions"], ctx["timesteps"]).data
    np.testing.assert_array_equal(out, np.zeros_like(out))


def test_context_longer_than_k_rejected():
    model = tiny_model(context=3)
    rng = np.random.default_rng(2)
    ctx = random_context(rng, 4)
    with pytest.raises(ValueError):
        model.forward(ctx["rtg"], ctx["states"], ctx["actions"], ctx["timesteps"])


def test_k_exceeding_horizon_rejected():
    ds = scripted_dataset(n_episodes=2, T=5)
    with pytest.raises(ValueError):
        train_dt(ds, context=6, steps=1)


def test_k1_is_a_feedforward_map():
    model = tiny_model(context=1)
    rng = np.random.default_rng(3)
    ctx = random_context(rng, 1)
    a = model.forward(ctx["rtg"], ctx["states"], ctx["actions"], ctx["timesteps"]).data
    b = model.forward(ctx["rtg"], ctx["states"], ctx["actions"], ctx["timesteps"]).data
    np.testing.assert_array_equal(a, b)
    ctx2 = dict(ctx)
    ctx2["states"] = ctx["states"] + 1.0
    c = model.forward(ctx2["rtg"], ctx2["states"], ctx2["actions"], ctx2["timesteps"]).data
    assert not np.array_equal(a, c)


def test_dt_gradients_match_finite_differences():
    from mrolab.tensor import grad_check

    rng = np.random.default_rng(13)
    model = tiny_model(state_dim=4, context=3, embed=8, blocks=1)
    batch = {
        "rtg": rng.normal(size=(2, 3)),
        "states": rng.normal(size=(2, 3, 4)),
        "actions_in": one_hot_actions(rng.integers(0, 3, size=(2, 3))),
        "timesteps": np.tile(np.arange(3), (2, 1)),
        "targets": rng.integers(0, 3, size=(2, 3)),
    }

    def f():
        return dt_loss(model, batch)

    assert grad_check(f, model.params, step=1e-5) < 1e-4


def test_memorizes_a_single_trajectory():
    ds = scripted_dataset(n_episodes=1, T=17, seed=5)
    model, curve = train_dt(ds, context=4, embed=16, blocks=1, steps=400, batch_size=16, seed=0)
    assert curve[-1]["loss"] < 0.05


def test_recovers_the_scripted_policy_on_heldout_windows():
    train_ds = scripted_dataset(n_episodes=48, seed=0)
    model, _ = train_dt(train_ds, context=4, embed=32, blocks=2, steps=1200, batch_size=64, seed=0)

    held = scripted_dataset(n_episodes=16, seed=99)
    seq = held.sequence_arrays()
    # the held-out counters ride through the training normalization
    seq_states = np.stack(
        [
            train_ds.normalization.transform_many([tr.state for tr in traj.transitions])
            for traj in held.trajectories
        ]
    )
    rng = np.random.default_rng(2)
    correct = total = 0
    for _ in range(200):
        i = int(rng.integers(0, len(held)))
        start = int(rng.integers(0, held.horizon - 4 + 1))
        sl = slice(start, start + 4)
        rtgs = (seq["rtg"][i, sl] / model.cfg.rtg_scale)[None, :]
        states = seq_states[i, sl][None, :]
        acts = seq["actions"][i, sl]
        logits = model.forward(rtgs, states, one_hot_actions(acts[None, :]), np.arange(start, start + 4)[None, :]).data
        pred = logits[0].argmax(axis=-1)
        correct += int((pred == acts).sum())
        total += len(acts)
    assert correct / total >= 0.99


def test_training_is_deterministic():
    ds = scripted_dataset(n_episodes=6)
    m1, c1 = train_dt(ds, context=3, embed=8, blocks=1, steps=40, seed=7)
    m2, c2 = train_dt(ds, context=3, embed=8, blocks=1, steps=40, seed=7)
    assert [c["loss"] for c in c1] == [c["loss"] for c in c2]
    for name in m1.params.names():
        np.testing.assert_array_equal(m1.params[name].data, m2.params[name].data)


def test_policy_decrements_the_return_slot_by_rewards():
    model = tiny_model()
    pol = DTPolicy(model, target_rtg=30.0)
    pol.reset(np.random.default_rng(0))
    pol.act(HoCounters(cio=0, n_suc=10))
    pol.observe(2.5)
    pol.act(HoCounters(cio=0, n_suc=10))
    pol.observe(2.5)
    pol.act(HoCounters(cio=0, n_suc=10))
    assert pol._rtgs == [30.0, 27.5, 25.0]


def test_policy_respects_offset_bounds():
    model = tiny_model()
    model.params["head_w"].data[:] = 0.0
    model.params["head_b"].data[:] = np.array([0.0, 0.0, 99.0])  # always +1
    pol = DTPolicy(model, target_rtg=10.0)
    pol.reset(np.random.default_rng(0))
    assert pol.act(HoCounters(cio=8, n_suc=10)) == 0


def test_checkpoint_roundtrip(tmp_path):
    ds = scripted_dataset(n_episodes=4)
    model, _ = train_dt(ds, context=3, embed=8, blocks=1, steps=30, seed=1)
    path = tmp_path / "dt.json"
    model.save(path)
    loaded = DTModel.load(path)
    rng = np.random.default_rng(4)
    ctx = random_context(rng, 3)
    np.testing.assert_array_equal(
        model.forward(ctx["rtg"], ctx["states"], ctx["actions"], ctx["timesteps"]).data,
        loaded.forward(ctx["rtg"], ctx["states"], ctx["actions"], ctx["timesteps"]).data,
    )
    assert loaded.cfg == model.cfg
