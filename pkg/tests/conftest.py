import numpy as np
import pytest

from momentum_sa import mdp

_criteria_lines: list[str] = []


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _criteria_lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criteria_lines:
            terminalreporter.write_line(line)


def one_state_mdp(cost: float = 1.0, beta: float = 0.5) -> mdp.Mdp:
    return mdp.Mdp(1, np.array([0]), np.array([0]), np.array([[1.0]]), np.array([cost]), beta,
                   (np.array([0]),))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def q_reference(kind, m: mdp.Mdp, pairs, nxt, theta0, exploration, zeta=1.0, snapshots=()):
    """Python reference run of a Q-learning algorithm over a fixed event list."""
    from momentum_sa import rl_algos
    from momentum_sa.sa_core import GainSchedule, IterateState

    state = IterateState.initial(theta0)
    opts = rl_algos.QOptions(exploration=exploration, zeta=zeta)
    out = {}
    if 0 in snapshots:
        out[0] = state.theta
    for p, y in zip(pairs, nxt):
        ev = mdp.Event(int(m.pair_state[p]), int(m.pair_action[p]), int(y), int(p))
        state = rl_algos.q_step(kind, state, ev, m, GainSchedule(), opts)
        if state.n in snapshots:
            out[state.n] = state.theta
    return state, out


def q_events(m: mdp.Mdp, exploration: str, n: int, seed: int):
    """Event arrays ``(pairs, next_states)`` as the harness draws them."""
    from momentum_sa import kernels

    rng = np.random.default_rng(seed)
    u = mdp.draw_uniforms(exploration, rng, n)
    if exploration == "clock":
        return kernels.clock_events(m.cumulative(), u, 0)
    starts = m.non_goal_states() if m.goal is not None else np.arange(m.n_states)
    goal = -1 if m.goal is None else m.goal
    return kernels.async_events(m.first_pair, m.n_actions, m.cumulative(), goal, starts, u, 0)
