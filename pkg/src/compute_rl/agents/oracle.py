"""Exact option values by value iteration over an enumerable model."""

from __future__ import annotations

from typing import Sequence

from ..core import ComputeCostModel, ControlOption, UsageError
from .td import TabularQ

# (probability, discounted task reward, ticks elapsed, next state, terminal)
Outcome = tuple[float, float, int, int, bool]


def option_outcomes(env, state: int, option: ControlOption, gamma: float) -> list[Outcome]:
    """Enumerate every way ``option`` can play out from ``state``."""
    out: list[Outcome] = []

    def expand(s: int, k: int, prob: float, ret: float) -> None:
        for p, nxt, r, terminal in env.transitions(s, option.action):
            pk = prob * p
            if pk == 0.0:
                continue
            rk = ret + gamma**k * r
            if terminal or k + 1 == option.duration:
                out.append((pk, rk, k + 1, nxt, terminal))
            else:
                expand(nxt, k + 1, pk, rk)

    expand(state, 0, 1.0, 0.0)
    return out


def smdp_value_iteration(
    env,
    options: Sequence[ControlOption],
    gamma: float,
    cost_model: ComputeCostModel,
    tolerance: float = 1e-12,
    max_iterations: int = 100_000,
) -> TabularQ:
    """Iterate ``Q(s,o) <- E[r - c + gamma**tau * max Q(s', .)]`` to a fixed point.

    Terminal states keep value 0. ``env`` must expose ``states()``,
    ``is_terminal_state(s)`` and ``transitions(s, a)``.
    """
    if not all(hasattr(env, name) for name in ("states", "transitions", "is_terminal_state")):
        raise UsageError(f"{getattr(env, 'name', env)!r} has no enumerable model for value iteration")
    if not 0.0 <= gamma < 1.0:
        raise UsageError(f"value iteration needs gamma in [0, 1), got {gamma}")
    states = list(env.states())
    n_states = max(states) + 1
    q = TabularQ(n_states, len(options))
    c = cost_model.c
    models = {
        (s, i): option_outcomes(env, s, o, gamma)
        for s in states
        if not env.is_terminal_state(s)
        for i, o in enumerate(options)
    }
    for _ in range(max_iterations):
        best = [max(row) for row in q.table]
        change = 0.0
        for (s, i), outcomes in models.items():
            v = -c
            for p, r, tau, nxt, terminal in outcomes:
                v += p * (r if terminal else r + gamma**tau * best[nxt])
            change = max(change, abs(v - q.table[s][i]))
            q.table[s][i] = v
        if change < tolerance:
            return q
    raise RuntimeError(f"value iteration did not reach tolerance {tolerance} in {max_iterations} sweeps")
