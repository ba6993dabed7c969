import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compute_rl.core import ComputeCostModel, ControlOption, UsageError, discounted_sum, option_set
from compute_rl.envs import ChainMDP, LineTrack, StepOutcome, WaveCollect, make_env
from compute_rl.execution import execute_option, read_trace_jsonl, run_episode, trace_to_jsonl


class ScriptedEnv:
    """Plays back a fixed reward list and terminates after it."""

    def __init__(self, rewards):
        self.rewards = list(rewards)
        self.reset()

    def reset(self, seed=0):
        self.tick = 0
        self.state = 0
        self.terminal = False
        self.last_action = -1
        self.phase = ""
        return 0

    def step(self, action):
        r = self.rewards[self.tick]
        self.tick += 1
        self.state = self.tick
        self.last_action = action
        self.terminal = self.tick == len(self.rewards)
        return StepOutcome(self.state, r, self.terminal)


def test_one_tick_option():
    env = ScriptedEnv([0.7, 0.0])
    tr, trace = execute_option(env, ControlOption(0, 1), 0.9, ComputeCostModel(0.2), index=0)
    assert tr.reward_sum == 0.7 - 0.2
    assert tr.task_reward == 0.7
    assert tr.tau_effective == 1 and not tr.terminal
    assert [t.decision for t in trace] == [True]


def test_truncated_option_on_termination():
    gamma, c = 0.9, 0.05
    env = ScriptedEnv([0.0, 1.0])
    tr, trace = execute_option(env, ControlOption(1, 4), gamma, ComputeCostModel(c), index=5)
    assert tr.reward_sum == discounted_sum([0.0, 1.0], gamma) - c
    assert tr.reward_sum == pytest.approx(gamma * 1.0 - c, abs=1e-15)
    assert tr.tau_effective == 2 and tr.terminal
    assert tr.option == 5
    assert [t.cost for t in trace] == [c, 0.0]


def test_chain_long_option_walkthrough():
    gamma, c = 0.9, 0.1
    env = ChainMDP(6)
    env.reset()
    tr, trace = execute_option(env, ControlOption(1, 8), gamma, ComputeCostModel(c))
    assert tr.tau_effective == 5 and tr.terminal and tr.next_state == 5
    assert tr.reward_sum == pytest.approx(gamma**4 - c, abs=1e-15)
    assert [t.tick for t in trace] == [0, 1, 2, 3, 4]


def test_execute_on_terminal_env_errors():
    env = ChainMDP(2)
    env.reset()
    env.step(1)
    with pytest.raises(UsageError):
        execute_option(env, ControlOption(1, 1), 0.9, ComputeCostModel(0.0))


def test_tick_cap_truncation_is_not_terminal():
    env = ChainMDP(50)
    env.reset()
    tr, _ = execute_option(env, ControlOption(1, 8), 0.9, ComputeCostModel(0.0), max_ticks=3)
    assert tr.tau_effective == 3 and not tr.terminal


def test_run_episode_long_options_on_24_ticks():
    env = LineTrack(max_misses=100)
    opts = option_set(3)
    rec = run_episode(env, lambda s: 7, opts, 0.99, ComputeCostModel(0.3), tick_cap=24)
    assert opts[7].duration == 8
    assert rec.decisions == 3 and rec.ticks == 24
    assert rec.total_cost == 0.3 * 3
    assert not rec.terminal


def test_run_episode_primitive_policy_decides_every_tick():
    env = LineTrack()
    opts = option_set(3, (1,))
    rec = run_episode(env, lambda s: 1, opts, 0.99, ComputeCostModel(0.01), tick_cap=4000)
    assert rec.decisions == rec.ticks
    assert all(t.decision for t in rec.trace)


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["linetrack", "wavecollect", "chain"]),
    st.integers(0, 10**6),
    st.floats(0.0, 2.0),
    st.floats(0.0, 0.5),
    st.integers(5, 600),
)
def test_episode_accounting_invariants(name, seed, c, sticky, cap):
    env = make_env(name, sticky=sticky)
    opts = option_set(env.n_actions)
    rng = random.Random(seed)
    rec = run_episode(env, lambda s: rng.randrange(len(opts)), opts, 0.97, ComputeCostModel(c), cap, seed=seed)
    decision_ticks = [t for t in rec.trace if t.decision]
    assert len(decision_ticks) == len(rec.transitions) == rec.decisions
    assert sum(tr.tau_effective for tr in rec.transitions) == rec.ticks == len(rec.trace)
    assert rec.total_cost == c * rec.decisions
    assert all(t.cost == (c if t.decision else 0.0) for t in rec.trace)
    assert rec.net_return == rec.task_return - c * rec.decisions
    assert [t.tick for t in rec.trace] == list(range(rec.ticks))
    for tr in rec.transitions[:-1]:
        assert tr.tau_effective == opts[tr.option].duration
        assert not tr.terminal
    last = rec.transitions[-1]
    assert last.terminal == rec.terminal
    if not last.terminal:
        assert rec.ticks == cap


def test_primitive_zero_cost_episode_matches_plain_rollout():
    env = WaveCollect()
    opts = option_set(3, (1,))
    rng = random.Random(4)
    actions = [rng.randrange(3) for _ in range(2000)]
    it = iter(actions)
    rec = run_episode(env, lambda s: next(it), opts, 0.99, ComputeCostModel(0.0), 4000, seed=12)

    plain = WaveCollect()
    s = plain.reset(12)
    rows = []
    for a in actions[: rec.ticks]:
        nxt, r, done = plain.step(a)
        rows.append((s, a, r, nxt, done))
        s = nxt
    got = [(tr.state, tr.option, tr.reward_sum, tr.next_state, tr.terminal) for tr in rec.transitions]
    assert got == rows


def test_trace_jsonl_roundtrip():
    env = make_env("wavecollect", sticky=0.25)
    opts = option_set(3)
    rng = random.Random(0)
    recs = [
        run_episode(env, lambda s: rng.randrange(12), opts, 0.99, ComputeCostModel(0.1), 400, seed=k) for k in range(2)
    ]
    fh = io.StringIO()
    for k, rec in enumerate(recs):
        trace_to_jsonl(rec.trace, fh, seed=3, episode=k)
    fh.seek(0)
    back = list(read_trace_jsonl(fh))
    assert [tags for tags, _ in back] == [{"seed": 3, "episode": 0}, {"seed": 3, "episode": 1}]
    assert [tr for _, tr in back] == [rec.trace for rec in recs]
