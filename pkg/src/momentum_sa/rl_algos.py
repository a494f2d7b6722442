"""Tabular Q-learning and TD(0)-family algorithms as linear SA instances.

For an observed triple ``(x, u, x')`` with pair index ``i`` and greedy pair
``j = argmin_u' theta(x', u')`` the sample is::

    A = e_i (beta e_j - e_i)^T        b = -c(x, u) e_i

so ``f(theta) = A theta - b`` is the temporal-difference term
``c + beta min Q(x', .) - Q(x, u)`` placed at coordinate ``i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from . import sa_core
from .mdp import Event, Mdp, pinned_cdf
from .sa_core import GainSchedule, IterateState, LinearSample, PolsaMode


class QAlgorithm(str, enum.Enum):
    WATKINS = "Watkins"
    SNR = "SNR"
    POLSA = "PolSA"
    POLSA_D = "PolSA_D"
    NESA = "NeSA"

    @classmethod
    def parse(cls, name: str) -> "QAlgorithm":
        key = name.replace("-", "_").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown Q-learning algorithm {name!r}")


Q_ALGORITHMS = tuple(QAlgorithm)


@dataclass(frozen=True)
class QOptions:
    exploration: str = "async"
    zeta: float = 1.0
    pinv_tol: float = 1e-8


def greedy_pair(mdp: Mdp, theta: np.ndarray, x: int) -> int:
    pairs = mdp.state_pairs[x]
    return int(pairs[np.argmin(theta[pairs])])


def q_sample(mdp: Mdp, event: Event, theta: np.ndarray) -> LinearSample:
    d = mdp.d
    i = event.pair
    j = greedy_pair(mdp, theta, event.x_next)
    a = np.zeros((d, d))
    a[i, j] += mdp.beta
    a[i, i] -= 1.0
    b = np.zeros(d)
    b[i] = -mdp.cost[i]
    return LinearSample(a, b)


@dataclass(frozen=True)
class DiagonalGain:
    counts: np.ndarray
    n: int = 0

    @classmethod
    def empty(cls, d: int) -> "DiagonalGain":
        return cls(np.zeros(d, dtype=np.int64), 0)

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.counts.size)
        seen = self.counts > 0
        out[seen] = self.n / self.counts[seen]
        return out


def update_diagonal_gain(gain: DiagonalGain, event: Event) -> DiagonalGain:
    counts = gain.counts.copy()
    counts[event.pair] += 1
    return DiagonalGain(counts, gain.n + 1)


def diagonal_gain(counts: np.ndarray, n: int, exploration: str) -> np.ndarray:
    """``D_hat`` after ``n`` events: ``n / count_i`` (0 for unvisited pairs).

    Watkins under clock sampling uses the constant ``d`` instead; see ``watkins_gain``.
    """
    return DiagonalGain(counts, n).diagonal()


def watkins_gain(counts: np.ndarray, n: int, exploration: str) -> np.ndarray:
    if exploration == "clock":
        return np.full(counts.size, float(counts.size))
    return diagonal_gain(counts, n, exploration)


def q_step(kind: QAlgorithm | str, state: IterateState, event: Event, mdp: Mdp,
           schedule: GainSchedule, options: QOptions = QOptions()) -> IterateState:
    kind = QAlgorithm.parse(kind) if isinstance(kind, str) else kind
    sample = q_sample(mdp, event, state.theta)
    counts = state.d_counts.copy()
    counts[event.pair] += 1
    dg = diagonal_gain(counts, state.n + 1, options.exploration)
    if kind is QAlgorithm.WATKINS:
        wg = watkins_gain(counts, state.n + 1, options.exploration)
        new = sa_core.step_sa(state, sample, np.diag(wg), schedule)
    elif kind is QAlgorithm.SNR:
        new = sa_core.step_snr(state, sample, schedule, options.pinv_tol)
    elif kind is QAlgorithm.POLSA:
        new = sa_core.step_polsa(state, sample, schedule, PolsaMode.ESTIMATED, zeta=options.zeta)
    elif kind is QAlgorithm.POLSA_D:
        new = sa_core.step_polsa(state, sample, schedule, PolsaMode.DIAGONAL, diag_gain=dg)
    else:
        new = sa_core.step_nesa_matrix(state, sample, schedule, options.zeta)
    if kind in (QAlgorithm.WATKINS, QAlgorithm.NESA):
        # estimate kept current for every kind so states stay comparable
        new = replace(new, a_hat=state.a_hat + (sample.a - state.a_hat) / (state.n + 1))
    return replace(new, d_counts=counts)


# TD(0) family ----------------------------------------------------------------

class TdAlgorithm(str, enum.Enum):
    TD0 = "TD0"
    LSTD0 = "LSTD0"
    POLSA_TD0 = "PolSA_TD0"
    NESA_TD0 = "NeSA_TD0"

    @classmethod
    def parse(cls, name: str) -> "TdAlgorithm":
        key = name.replace("-", "_").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown TD algorithm {name!r}")


TD_ALGORITHMS = tuple(TdAlgorithm)


@dataclass(frozen=True)
class TdModel:
    features: np.ndarray     # (n_states, d): row x is psi(x)
    cost: np.ndarray         # (n_states,)
    beta: float
    transitions: np.ndarray  # (n_states, n_states)
    td0_gain: float = 1.0
    name: str = ""

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_states(self) -> int:
        return self.features.shape[0]

    def stationary(self) -> np.ndarray:
        w, v = np.linalg.eig(self.transitions.T)
        k = int(np.argmin(np.abs(w - 1.0)))
        pi = np.real(v[:, k])
        return pi / pi.sum()

    def value_function(self) -> np.ndarray:
        """``h = (I - beta P)^{-1} c``."""
        return np.linalg.solve(np.eye(self.n_states) - self.beta * self.transitions, self.cost)

    def mean_linear_system(self) -> tuple[np.ndarray, np.ndarray]:
        """Steady-state means ``(A, b)`` of the TD samples."""
        pi = self.stationary()
        psi = self.features
        a = psi.T @ (pi[:, None] * (self.beta * self.transitions @ psi - psi))
        b = -psi.T @ (pi * self.cost)
        return a, b

    def theta_star(self) -> np.ndarray:
        a, b = self.mean_linear_system()
        return np.linalg.solve(a, b)


def cycle_chain(n_states: int = 4, beta: float = 0.5, stay_prob: float = 1.0 / 3.0,
                cost=None) -> TdModel:
    """Lazy uniform random walk on a cycle with one-hot features.

    The default cost is ``1 + 0.2 cos(2 pi x / n)``. With one-hot features the
    TD root is the value function exactly.
    """
    p = np.zeros((n_states, n_states))
    for x in range(n_states):
        p[x, x] += stay_prob
        p[x, (x + 1) % n_states] += (1.0 - stay_prob) / 2
        p[x, (x - 1) % n_states] += (1.0 - stay_prob) / 2
    if cost is None:
        cost = 1.0 + 0.2 * np.cos(2 * np.pi * np.arange(n_states) / n_states)
    return TdModel(np.eye(n_states), np.asarray(cost, dtype=float), beta, p,
                   td0_gain=n_states / (1.0 - beta), name=f"cycle-{n_states}")


def td_sample(model: TdModel, x_prev: int, x: int, theta=None) -> LinearSample:
    """Sample for the transition ``x_prev -> x``; the cost is charged at ``x_prev``."""
    psi_prev = model.features[x_prev]
    a = np.outer(psi_prev, model.beta * model.features[x] - psi_prev)
    b = -psi_prev * model.cost[x_prev]
    return LinearSample(a, b)


def td_step(kind: TdAlgorithm | str, state: IterateState, sample: LinearSample,
            schedule: GainSchedule, zeta: float = 1.0) -> IterateState:
    kind = TdAlgorithm.parse(kind) if isinstance(kind, str) else kind
    if kind is TdAlgorithm.TD0:
        return sa_core.step_sa(state, sample, np.eye(state.dim), schedule)
    if kind is TdAlgorithm.LSTD0:
        return sa_core.step_snr(state, sample, schedule)
    if kind is TdAlgorithm.POLSA_TD0:
        return sa_core.step_polsa(state, sample, schedule, PolsaMode.ESTIMATED, zeta=zeta)
    return sa_core.step_nesa(state, sample, schedule, zeta)


def simulate_chain(model: TdModel, rng: np.random.Generator, n: int, x0: int = 0) -> np.ndarray:
    """States ``X_0 .. X_n`` of the chain (length n + 1)."""
    cum = pinned_cdf(model.transitions)
    u = rng.random(n)
    xs = np.empty(n + 1, dtype=np.int64)
    xs[0] = x0
    for k in range(n):
        xs[k + 1] = np.searchsorted(cum[xs[k]], u[k], side="right")
    return xs
