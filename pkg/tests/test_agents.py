import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compute_rl.agents import (
    AgentConfig,
    NeuralAgent,
    ReplayBuffer,
    TabularAgent,
    TabularQ,
    fixed_rate_baseline,
    load_checkpoint,
    make_agent,
    save_checkpoint,
    select_option,
    smdp_value_iteration,
    td_error,
    td_target,
)
from compute_rl.agents import network as nn
from compute_rl.agents.td import EpsilonSchedule
from compute_rl.core import ComputeCostModel, UsageError, option_set
from compute_rl.envs import ChainMDP, make_env
from compute_rl.execution import OptionTransition, run_episode


def chain_q(values):
    q = TabularQ(len(values), len(values[0]))
    q.table = [list(map(float, row)) for row in values]
    return q


def drive(agent, env, decisions, tick_cap=200, seed=0):
    """Train ``agent`` online for exactly ``decisions`` decisions."""
    rng = random.Random(seed)

    def on_transition(tr, _):
        if agent.decisions < decisions:
            agent.observe(tr)

    while agent.decisions < decisions:
        run_episode(
            env,
            agent.act,
            agent.options,
            agent.config.gamma,
            ComputeCostModel(0.0),
            tick_cap,
            seed=rng.getrandbits(32),
            on_transition=on_transition,
            keep_trace=False,
        )


# td target / error


def test_terminal_target_is_reward_sum():
    q = chain_q([[5.0, 5.0]] * 3)
    tr = OptionTransition(0, 1, 1.0 - 0.2, 2, 2, True)
    assert td_target(tr, q, 0.9) == 1.0 - 0.2


def test_one_step_target_is_q_learning():
    q = chain_q([[0.0, 0.0], [0.3, 0.7]])
    tr = OptionTransition(0, 1, 0.5, 1, 1, False)
    assert td_target(tr, q, 0.9) == 0.5 + 0.9 * 0.7


def test_chain_hand_computed_target():
    # chain of 6, option (right, 2) from state 1 lands in state 3 with no reward
    # and cost 0.1; target = -0.1 + 0.9**2 * max Q(3, .)
    q = chain_q([[0.0] * 8] * 6)
    q.table[3] = [0.1, 0.2, 0.3, 0.4, 0.81, 0.9, 0.9, 0.9]
    tr = OptionTransition(1, 5, 0.0 - 0.1, 2, 3, False)
    assert abs(td_target(tr, q, 0.9) - (-0.1 + 0.81 * 0.9)) <= 1e-12


def test_td_error_zero_at_fixed_point():
    q = chain_q([[0.0, 0.0], [1.0, 2.0]])
    tr = OptionTransition(0, 0, 0.25, 1, 1, False)
    q.table[0][0] = td_target(tr, q, 0.5)
    assert td_error(tr, q, q, 0.5) == 0.0


@given(st.floats(0.01, 1.0), st.floats(-5, 5), st.floats(-5, 5))
def test_tabular_update_contracts_at_one_minus_alpha(alpha, start, reward):
    agent = TabularAgent(2, option_set(1, (1,)), AgentConfig(learning_rate=alpha, gamma=0.9))
    agent.q.table[0][0] = start
    tr = OptionTransition(0, 0, reward, 1, 1, True)
    for k in range(1, 6):
        agent.train_step([tr])
        expected = reward + (1 - alpha) ** k * (start - reward)
        assert agent.q.table[0][0] == pytest.approx(expected, abs=1e-9)


def test_tabular_update_is_local():
    agent = TabularAgent(4, option_set(2), AgentConfig(learning_rate=0.3, gamma=0.9))
    rng = random.Random(0)
    agent.q.table = [[rng.uniform(-1, 1) for _ in range(8)] for _ in range(4)]
    before = agent.q.copy()
    tr = OptionTransition(1, 6, 0.4, 4, 2, False)
    delta = td_error(tr, before, before, 0.9)
    agent.train_step([tr])
    for s in range(4):
        for o in range(8):
            if (s, o) == (1, 6):
                assert agent.q.table[s][o] == before.table[s][o] + 0.3 * delta
            else:
                assert agent.q.table[s][o] == before.table[s][o]


def test_baseline_ignores_cost_in_learning():
    agent = fixed_rate_baseline("tabular", ChainMDP(3), AgentConfig(learning_rate=1.0))
    assert [o.duration for o in agent.options] == [1, 1]
    agent.observe(OptionTransition(0, 1, 0.0 - 5.0, 1, 1, False, 0.0))
    assert agent.q.table[0][1] == 0.0


# option selection


def test_greedy_selection_and_ties():
    q = chain_q([[0.1, 0.9, 0.3], [0.5, 0.5, 0.5]])
    rng = random.Random(0)
    assert select_option(0, q, 0.0, rng) == 1
    assert select_option(1, q, 0.0, rng) == 0


def test_longest_tie_break():
    opts = option_set(2)
    agent = TabularAgent(1, opts, AgentConfig(tie_break="longest"))
    assert agent.options[agent.greedy(0)].duration == 8
    assert agent.options[agent.greedy(0)].action == 0


def test_uniform_exploration():
    q = chain_q([[0.0] * 12])
    rng = random.Random(1)
    n = 100_000
    counts = np.bincount([select_option(0, q, 1.0, rng) for _ in range(n)], minlength=12)
    assert np.all(np.abs(counts / n - 1 / 12) <= 0.01)


def test_epsilon_schedule():
    sched = EpsilonSchedule(1.0, 0.1, 100)
    assert sched(0) == 1.0
    assert sched(50) == pytest.approx(0.55)
    assert sched(100) == sched(10**6) == 0.1
    with pytest.raises(UsageError):
        select_option(0, chain_q([[0.0]]), 1.5, random.Random())
    with pytest.raises(UsageError):
        AgentConfig(epsilon_end=2.0)
    with pytest.raises(UsageError):
        AgentConfig(learning_rate=0.0)


# replay


def _random_transition(rng, n_states=10, n_options=4):
    return OptionTransition(
        rng.randrange(n_states), rng.randrange(n_options), rng.uniform(-1, 1), rng.randint(1, 8), rng.randrange(n_states), rng.random() < 0.1
    )


def test_replay_capacity_and_determinism():
    rng = random.Random(0)
    trs = [_random_transition(rng) for _ in range(50)]
    a, b = ReplayBuffer(20, seed=3), ReplayBuffer(20, seed=3)
    for tr in trs:
        a.add(tr)
        b.add(tr)
    assert len(a) == 20
    assert a.sample(8).transitions() == b.sample(8).transitions()
    assert set(a.sample(500).transitions()) <= set(trs[30:])
    small = ReplayBuffer(10)
    small.add(trs[0])
    assert len(small.sample(32)) == 1


# neural


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    params = nn.init_mlp((3, 10, 6), rng)
    assert nn.n_parameters(params) == 106
    for _ in range(10):
        params = [(rng.normal(size=w.shape), rng.normal(size=b.shape)) for w, b in params]
        obs = rng.uniform(size=(5, 3))
        opts = rng.integers(0, 6, size=5)
        targets = rng.normal(size=5)
        _, grads, _ = nn.td_loss_and_grad(params, obs, opts, targets)
        analytic = nn.flatten(grads)
        flat = nn.flatten(params)
        numeric = np.empty_like(flat)
        h = 1e-5
        for i in range(flat.size):
            up, down = flat.copy(), flat.copy()
            up[i] += h
            down[i] -= h
            lp = nn.td_loss_and_grad(nn.unflatten(up, params), obs, opts, targets)[0]
            lm = nn.td_loss_and_grad(nn.unflatten(down, params), obs, opts, targets)[0]
            numeric[i] = (lp - lm) / (2 * h)
        rel = np.linalg.norm(analytic - numeric) / (np.linalg.norm(analytic) + np.linalg.norm(numeric))
        assert rel <= 1e-4


def test_target_sync_copies_online_values():
    env = make_env("linetrack")
    cfg = AgentConfig(learning_rate=1e-2, hidden=(16,), batch_size=8, learning_starts=8, target_sync_period=10**6)
    agent = make_agent("neural", env, cfg, seed=0)
    rng = random.Random(0)
    for _ in range(50):
        agent.observe(_random_transition(rng, env.n_states, agent.n_options))
    states = np.arange(0, env.n_states, 7)
    assert not np.allclose(agent.q.batch_values(states), agent.q_target.batch_values(states))
    agent.sync_target()
    assert np.array_equal(agent.q.batch_values(states), agent.q_target.batch_values(states))


def test_neural_outputs_cover_option_set():
    env = make_env("wavecollect")
    agent = make_agent("neural", env, AgentConfig(hidden=(8,)), seed=1)
    assert isinstance(agent, NeuralAgent)
    assert len(agent.q.values(0)) == 3 * 4
    assert np.all(np.isfinite(agent.q.batch_values(np.arange(env.n_states))))


def test_neural_train_step_reduces_loss_on_fixed_batch():
    env = make_env("chain")
    agent = make_agent("neural", env, AgentConfig(learning_rate=1e-2, hidden=(16,)), seed=0)
    batch = [OptionTransition(s, 1, 1.0 if s == 4 else 0.0, 1, s + 1, s == 4) for s in range(5)]
    first = agent.train_step(batch)
    for _ in range(300):
        last = agent.train_step(batch)
    assert last < first


# value iteration


def test_oracle_chain_values():
    env = ChainMDP(6)
    opts = option_set(2)
    q = smdp_value_iteration(env, opts, 0.9, ComputeCostModel(0.0))
    right4 = opts.index(next(o for o in opts if o.action == 1 and o.duration == 4))
    # (right, 4) from state 0 reaches state 4; one more step right earns 1
    assert q.table[0][right4] == pytest.approx(0.9**4, abs=1e-12)
    right1 = opts.index(next(o for o in opts if o.action == 1 and o.duration == 1))
    for s in range(5):
        assert max(q.table[s]) == pytest.approx(0.9 ** (4 - s), abs=1e-12)
        assert q.table[s][right1] == pytest.approx(0.9 ** (4 - s), abs=1e-12)
    assert q.table[5] == [0.0] * 8


def test_oracle_high_cost_prefers_longest_option():
    env = ChainMDP(6)
    opts = option_set(2)
    for c in (0.5, 1.0, 5.0):
        q = smdp_value_iteration(env, opts, 0.9, ComputeCostModel(c))
        for s in range(5):
            longest = [i for i, o in enumerate(opts) if o.duration == 8]
            assert max(q.table[s][i] for i in longest) == pytest.approx(max(q.table[s]), abs=1e-12)


def test_oracle_zero_cost_net_equals_task_value():
    env = ChainMDP(6)
    opts = option_set(2, (1,))
    q = smdp_value_iteration(env, opts, 0.9, ComputeCostModel(0.0))
    for s in range(5):
        assert max(q.table[s]) == pytest.approx(0.9 ** (4 - s), abs=1e-12)


def test_oracle_rejects_non_enumerable_env():
    with pytest.raises(UsageError):
        smdp_value_iteration(make_env("linetrack"), option_set(3), 0.9, ComputeCostModel(0.0))


# learning


def test_baseline_learns_chain_within_budget():
    env = ChainMDP(6)
    cfg = AgentConfig(gamma=0.9, learning_rate=0.5, epsilon_decay=5000)
    agent = fixed_rate_baseline("tabular", env, cfg, seed=0)
    drive(agent, env, 10_000)
    assert agent.decisions == 10_000
    rec = run_episode(env, lambda s: agent.act(s, greedy=True), agent.options, 0.9, ComputeCostModel(0.0), 50)
    assert rec.terminal and rec.ticks == env.length - 1
    oracle = smdp_value_iteration(env, agent.options, 0.9, ComputeCostModel(0.0))
    assert all(agent.greedy(s) == oracle.table[s].index(max(oracle.table[s])) for s in range(5))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.floats(0.01, 0.5))
def test_uniform_cost_shift_keeps_greedy_policy(seed, c):
    """With one-tick options every tick pays c, so learning on r - c leaves the argmax unchanged."""
    env = ChainMDP(5)
    cfg = AgentConfig(gamma=0.9, learning_rate=0.5, epsilon_start=0.3, epsilon_end=0.3)
    plain = TabularAgent(env.n_states, option_set(2, (1,)), cfg, seed)
    shifted = TabularAgent(env.n_states, option_set(2, (1,)), cfg, seed)
    rng = random.Random(seed)
    env.reset()
    for _ in range(3000):
        s = env.state
        a = rng.randrange(2)
        nxt, r, done = env.step(a)
        plain.observe(OptionTransition(s, a, r, 1, nxt, done))
        shifted.observe(OptionTransition(s, a, r - c, 1, nxt, done))
        if done:
            env.reset()
    # the shifted values converge to Q - c / (1 - gamma) on non-terminal rows
    for s in range(env.n_states - 1):
        if max(plain.q.table[s]) - min(plain.q.table[s]) > 1e-6:
            assert plain.greedy(s) == shifted.greedy(s)


# checkpointing


@pytest.mark.parametrize("kind", ["tabular", "neural"])
def test_checkpoint_resume_is_bit_exact(kind, tmp_path):
    env = make_env("linetrack", sticky=0.25)
    cfg = AgentConfig(learning_rate=0.3 if kind == "tabular" else 1e-3, hidden=(16,), learning_starts=50, target_sync_period=100)
    if kind == "tabular":
        cfg = replace(cfg, replay=True, batch_size=4)
    straight = make_agent(kind, env, cfg, seed=5)
    drive(straight, env, 300, seed=1)
    path = tmp_path / "ckpt.json"
    save_checkpoint(straight, path)
    resumed = load_checkpoint(path)

    drive(straight, env, 600, seed=2)
    drive(resumed, make_env("linetrack", sticky=0.25), 600, seed=2)
    assert straight.decisions == resumed.decisions == 600
    if kind == "tabular":
        assert straight.q.table == resumed.q.table
    else:
        assert all(np.array_equal(a, b) for pa, pb in zip(straight.q.params, resumed.q.params) for a, b in zip(pa, pb))
    assert straight.rng.getstate() == resumed.rng.getstate()


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_checkpoint(path)
