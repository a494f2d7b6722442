"""Stochastic-approximation steppers for linear root-finding problems.

Every algorithm consumes one :class:`LinearSample` ``(a, b)`` per step and
evaluates the noisy root-finding function as ``f(theta) = a @ theta - b``.
Steppers are pure: they return a new :class:`IterateState`.

Algorithms (``alpha`` is the step size for the step being taken)::

    SA      dtheta' = alpha G f(theta)
    SNR     dtheta' = -alpha pinv(A_hat') f(theta)
    PolSA   dtheta' = (I + zeta A_hat') dtheta + alpha zeta f(theta)
    PolSA-D dtheta' = (I + D' A_hat') dtheta + alpha D' f(theta)
    NeSA    dtheta' = dtheta + zeta [f(theta) - f(theta_prev)] + zeta alpha f(theta)

The matrix estimate ``A_hat`` (and the diagonal gain ``D``) are always
updated with the current sample *before* the parameter update.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .linalg import pseudo_inverse

DIVERGENCE_BOUND = 1e12


class DivergenceError(RuntimeError):
    """An iterate became non-finite or left the ball of radius 1e12."""

    def __init__(self, step: int, norm: float):
        super().__init__(f"iterate diverged at step {step} (|theta| = {norm:.3g})")
        self.step = step
        self.norm = norm


class AlgorithmKind(str, enum.Enum):
    SA = "SA"
    SNR = "SNR"
    POLSA = "PolSA"
    POLSA_D = "PolSA_D"
    NESA = "NeSA"

    @classmethod
    def parse(cls, name: str) -> "AlgorithmKind":
        key = name.replace("-", "_").lower()
        for kind in cls:
            if kind.value.lower() == key or kind.name.lower() == key:
                return kind
        raise ValueError(f"unknown algorithm {name!r}")


class PolsaMode(str, enum.Enum):
    ESTIMATED = "estimated"
    FIXED = "fixed"
    DIAGONAL = "diagonal"


@dataclass(frozen=True)
class LinearSample:
    a: np.ndarray
    b: np.ndarray

    def f(self, theta: np.ndarray) -> np.ndarray:
        return self.a @ theta - self.b


@dataclass(frozen=True)
class GainSchedule:
    """Step sizes ``alpha_n = g / (n + n0)`` for n >= 1."""

    g: float = 1.0
    n0: int = 0

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("gain g must be positive")
        if self.n0 < 0:
            raise ValueError("offset n0 must be non-negative")

    def alpha(self, n: int) -> float:
        return self.g / (n + self.n0)


@dataclass(frozen=True)
class IterateState:
    n: int
    theta: np.ndarray
    dtheta: np.ndarray
    a_hat: np.ndarray
    d_counts: np.ndarray = field(default=None)  # type: ignore[assignment]

    @classmethod
    def initial(cls, theta0) -> "IterateState":
        theta0 = np.array(theta0, dtype=float).reshape(-1)
        d = theta0.size
        return cls(0, theta0, np.zeros(d), np.zeros((d, d)), np.zeros(d, dtype=np.int64))

    @property
    def dim(self) -> int:
        return self.theta.size


def _advance(state: IterateState, dtheta: np.ndarray, **changes) -> IterateState:
    theta = state.theta + dtheta
    norm = float(np.max(np.abs(theta))) if theta.size else 0.0
    if not np.isfinite(norm) or norm > DIVERGENCE_BOUND:
        raise DivergenceError(state.n + 1, norm)
    return replace(state, n=state.n + 1, theta=theta, dtheta=dtheta, **changes)


def update_matrix_estimate(state: IterateState, sample: LinearSample) -> IterateState:
    """Running mean ``A_hat' = A_hat + (A - A_hat) / (n + 1)``; does not advance ``n``."""
    a_hat = state.a_hat + (sample.a - state.a_hat) / (state.n + 1)
    return replace(state, a_hat=a_hat)


def step_sa(state: IterateState, sample: LinearSample, gain_matrix,
            schedule: GainSchedule) -> IterateState:
    alpha = schedule.alpha(state.n + 1)
    dtheta = alpha * (np.asarray(gain_matrix) @ sample.f(state.theta))
    return _advance(state, dtheta)


def step_snr(state: IterateState, sample: LinearSample, schedule: GainSchedule,
             pinv_tol: float | None = None) -> IterateState:
    """SNR step with the running-mean matrix estimate.

    ``pinv_tol`` is relative to the largest singular value of ``A_hat``.
    """
    state = update_matrix_estimate(state, sample)
    alpha = schedule.alpha(state.n + 1)
    gain = pseudo_inverse(state.a_hat, rtol=pinv_tol)
    dtheta = -alpha * (gain @ sample.f(state.theta))
    return _advance(state, dtheta)


def step_snr_idealized(state: IterateState, sample: LinearSample, a_inv,
                       schedule: GainSchedule) -> IterateState:
    alpha = schedule.alpha(state.n + 1)
    dtheta = -alpha * (np.asarray(a_inv) @ sample.f(state.theta))
    return _advance(state, dtheta)


def step_polsa(state: IterateState, sample: LinearSample, schedule: GainSchedule,
               mode: PolsaMode | str = PolsaMode.ESTIMATED, *, zeta: float = 1.0,
               a_fixed=None, diag_gain=None) -> IterateState:
    """Matrix-momentum (PolSA) step.

    ``mode="fixed"`` uses the model mean ``a_fixed`` as momentum matrix.
    ``mode="diagonal"`` is PolSA-D: ``diag_gain`` holds the diagonal of
    ``D_hat`` already updated with this step's event; ``zeta`` is unused.
    """
    mode = PolsaMode(mode)
    alpha = schedule.alpha(state.n + 1)
    f = sample.f(state.theta)
    if mode is PolsaMode.FIXED:
        if a_fixed is None:
            raise ValueError("fixed mode needs a_fixed")
        momentum = state.dtheta + zeta * (np.asarray(a_fixed) @ state.dtheta)
        return _advance(state, momentum + alpha * zeta * f)
    state = update_matrix_estimate(state, sample)
    if mode is PolsaMode.ESTIMATED:
        dtheta = state.dtheta + zeta * (state.a_hat @ state.dtheta) + alpha * zeta * f
    else:
        if diag_gain is None:
            raise ValueError("diagonal mode needs diag_gain")
        dg = np.asarray(diag_gain, dtype=float)
        dtheta = state.dtheta + dg * (state.a_hat @ state.dtheta) + alpha * dg * f
    return _advance(state, dtheta)


def step_nesa(state: IterateState, sample: LinearSample, schedule: GainSchedule,
              zeta: float = 1.0) -> IterateState:
    """Nesterov SA, evaluated with two calls of this step's ``f``."""
    alpha = schedule.alpha(state.n + 1)
    theta_prev = state.theta - state.dtheta
    f_now = sample.f(state.theta)
    dtheta = state.dtheta + zeta * (f_now - sample.f(theta_prev)) + zeta * alpha * f_now
    return _advance(state, dtheta)


def step_nesa_matrix(state: IterateState, sample: LinearSample, schedule: GainSchedule,
                     zeta: float = 1.0) -> IterateState:
    """Matrix-momentum form of NeSA: ``(I + zeta a) dtheta + zeta alpha f``."""
    alpha = schedule.alpha(state.n + 1)
    dtheta = state.dtheta + zeta * (sample.a @ state.dtheta) + zeta * alpha * sample.f(state.theta)
    return _advance(state, dtheta)


@dataclass(frozen=True)
class Algorithm:
    """One configured stepper for linear streams.

    ``a_inv`` is required by idealized SNR, ``a_fixed`` by fixed-matrix PolSA.
    """

    kind: AlgorithmKind
    zeta: float = 1.0
    gain_matrix: np.ndarray | None = None
    idealized: bool = False
    a_inv: np.ndarray | None = None
    a_fixed: np.ndarray | None = None
    pinv_tol: float | None = None

    def step(self, state: IterateState, sample: LinearSample,
             schedule: GainSchedule) -> IterateState:
        kind = self.kind
        if kind is AlgorithmKind.SA:
            g = np.eye(state.dim) if self.gain_matrix is None else self.gain_matrix
            return step_sa(state, sample, g, schedule)
        if kind is AlgorithmKind.SNR:
            if self.idealized:
                return step_snr_idealized(state, sample, self.a_inv, schedule)
            return step_snr(state, sample, schedule, self.pinv_tol)
        if kind is AlgorithmKind.POLSA:
            if self.a_fixed is not None:
                return step_polsa(state, sample, schedule, PolsaMode.FIXED,
                                  zeta=self.zeta, a_fixed=self.a_fixed)
            return step_polsa(state, sample, schedule, zeta=self.zeta)
        if kind is AlgorithmKind.NESA:
            return step_nesa(state, sample, schedule, self.zeta)
        raise ValueError(f"{kind} needs an event-level driver (see rl_algos)")


Oracle = Callable[[np.ndarray], LinearSample]


def run(algorithm: Algorithm, oracle: Oracle, schedule: GainSchedule, n_steps: int,
        theta0, snapshot_indices: Iterable[int] = ()) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Drive ``algorithm`` for ``n_steps`` samples drawn from ``oracle(theta_n)``.

    Returns ``(n, theta_n, dtheta_n)`` for each requested ``n`` (sorted); with
    ``n_steps == 0`` the initial state is always reported.
    """
    wanted = sorted({int(k) for k in snapshot_indices if 0 <= int(k) <= n_steps})
    if n_steps == 0:
        wanted = [0]
    state = IterateState.initial(theta0)
    out = []
    pos = 0
    if wanted and wanted[0] == 0:
        out.append((0, state.theta.copy(), state.dtheta.copy()))
        pos = 1
    for _ in range(n_steps):
        state = algorithm.step(state, oracle(state.theta), schedule)
        if pos < len(wanted) and wanted[pos] == state.n:
            out.append((state.n, state.theta.copy(), state.dtheta.copy()))
            pos += 1
    return out


def geometric_grid(n_max: int, n_min: int = 100, per_decade: int = 4) -> list[int]:
    """Snapshot indices spaced evenly in log10, e.g. 100, 178, 316, 562, 1000, ..."""
    if n_max < 1:
        return [0]
    n_min = max(1, min(n_min, n_max))
    lo, hi = np.log10(n_min), np.log10(n_max)
    count = max(1, int(round((hi - lo) * per_decade))) + 1
    pts = np.unique(np.rint(np.logspace(lo, hi, count)).astype(np.int64))
    return [int(p) for p in pts]


def as_sorted_snapshots(points: Sequence[int]) -> list[int]:
    return sorted({int(p) for p in points})
