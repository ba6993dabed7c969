import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from compute_rl.core import (
    ComputeCostModel,
    ControlOption,
    ExactSum,
    UsageError,
    bootstrap_discount,
    cost_at_tick,
    discounted_sum,
    option_set,
    validate_durations,
)

rewards = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=30)
gammas = st.floats(0.0, 1.0)


def naive_discounted(rs, gamma):
    return sum(gamma**i * r for i, r in enumerate(rs))


def test_discounted_sum_examples():
    assert discounted_sum([5.0], 0.9) == 5.0
    assert discounted_sum([1, 1, 1], 0.5) == 1.75
    rs = [2, -1, 3, 0.5]
    expected = 2 - 0.97 + 3 * 0.97**2 + 0.5 * 0.97**3
    assert abs(discounted_sum(rs, 0.97) - expected) <= 1e-12


def test_discounted_sum_exact_at_gamma_extremes():
    rs = [0.1, 0.2, 0.3]
    assert discounted_sum(rs, 1.0) == math.fsum(rs)
    assert discounted_sum(rs, 0.0) == 0.1


def test_discounted_sum_errors():
    with pytest.raises(UsageError):
        discounted_sum([], 0.9)
    with pytest.raises(UsageError):
        discounted_sum([1.0], 1.5)


@given(rewards, gammas)
def test_horner_matches_power_form(rs, gamma):
    assert discounted_sum(rs, gamma) == pytest.approx(naive_discounted(rs, gamma), abs=1e-9)


@given(rewards, rewards, st.floats(0.0, 0.999))
def test_split_identity(a, b, gamma):
    joined = discounted_sum(a + b, gamma)
    split = discounted_sum(a, gamma) + gamma ** len(a) * discounted_sum(b, gamma)
    assert joined == pytest.approx(split, abs=1e-9)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=30), st.floats(0.0, 0.99))
def test_discounted_sum_bounds(rs, gamma):
    lo, hi = min(rs), max(rs)
    geom = (1 - gamma ** len(rs)) / (1 - gamma)
    v = discounted_sum(rs, gamma)
    assert lo * geom - 1e-12 <= v <= hi * geom + 1e-12


def test_cost_at_tick():
    assert cost_at_tick(True, ComputeCostModel(0.3)) == 0.3
    assert cost_at_tick(False, ComputeCostModel(0.3)) == 0.0
    assert cost_at_tick(True, ComputeCostModel(0.0)) == 0.0


def test_cost_model_rejects_negative():
    with pytest.raises(UsageError):
        ComputeCostModel(-0.1)
    with pytest.raises(UsageError):
        ComputeCostModel(float("nan"))


def test_bootstrap_discount():
    assert bootstrap_discount(0.99, 1, False) == 0.99
    assert bootstrap_discount(0.99, 8, False) == 0.99**8
    assert bootstrap_discount(0.99, 3, True) == 0.0
    with pytest.raises(UsageError):
        bootstrap_discount(0.99, 0, False)


@given(gammas)
def test_one_step_bootstrap_is_gamma(gamma):
    assert bootstrap_discount(gamma, 1, False) == gamma


@given(st.lists(st.booleans(), max_size=200), st.floats(0.0, 5.0))
def test_emitted_cost_is_c_times_decisions(flags, c):
    model = ComputeCostModel(c)
    total = ExactSum()
    for f in flags:
        total.add(cost_at_tick(f, model))
    assert total.value == c * sum(flags)


def test_option_set_order_and_size():
    opts = option_set(3)
    assert len(opts) == 12
    assert len(set(opts)) == 12
    assert opts[0] == ControlOption(0, 1)
    assert opts[3] == ControlOption(0, 8)
    assert opts[4] == ControlOption(1, 1)
    assert [o.duration for o in opts[:4]] == [1, 2, 4, 8]


def test_duration_validation():
    assert validate_durations([8, 1, 4]) == (1, 4, 8)
    for bad in ([], [0, 1], [2, 2]):
        with pytest.raises(UsageError):
            validate_durations(bad)
    with pytest.raises(UsageError):
        ControlOption(0, 0)


@given(st.lists(st.floats(-1e6, 1e6), max_size=50), st.lists(st.floats(-1e6, 1e6), max_size=50))
def test_exact_sum_is_correctly_rounded_and_mergeable(a, b):
    x, y = ExactSum(), ExactSum()
    for v in a:
        x.add(v)
    for v in b:
        y.add(v)
    x.merge(y)
    assert x.value == math.fsum(a + b)
