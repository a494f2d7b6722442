"""Seeded Monte-Carlo trials and the statistics computed from them.

A trial owns one random stream, derived from ``(base_seed, trial_index)``.
By default all algorithms of a trial consume the *same* stream: identical
noise and matrix draws for linear models, identical ``(x, u, x')`` events
for Q-learning, identical state trajectories for TD. Each algorithm still
builds its own samples from its own iterate. Trials run in a thread
pool (the compiled loops release the GIL); results are folded in trial
order, so the output does not depend on scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.stats

from . import kernels, rl_algos
from .linear_model import LinearModelSpec
from .mdp import Mdp, bellman_error, draw_uniforms, q_value_iteration
from .rl_algos import TdModel
from .sa_core import GainSchedule

THREADS_ENV = "MOMENTUM_SA_THREADS"
SNR_REFRESH = 1000


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def trial_rng(base_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(trial,)))


@dataclass(frozen=True)
class AlgoConfig:
    """One algorithm in a plan. ``name`` is a kernel name (see ``kernels``) or a TD kind."""

    name: str
    zeta: float = 1.0
    label: str = ""

    @property
    def key(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class TrialPlan:
    problem: object                     # LinearModelSpec, Mdp or TdModel
    algorithms: tuple
    n_steps: int
    snapshots: tuple
    trials: int = 1
    base_seed: int = 0
    exploration: str = "async"          # Q-learning only
    theta0: np.ndarray | None = None
    schedule: GainSchedule = GainSchedule()
    shared_stream: bool = True
    workers: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        snaps = tuple(int(s) for s in self.snapshots)
        if list(snaps) != sorted(set(snaps)):
            raise ValueError("snapshots must be sorted and unique")
        if snaps and (snaps[0] < 0 or snaps[-1] > self.n_steps):
            raise ValueError("snapshots must lie in [0, n_steps]")
        object.__setattr__(self, "snapshots", snaps)
        object.__setattr__(self, "algorithms", tuple(
            a if isinstance(a, AlgoConfig) else AlgoConfig(a) for a in self.algorithms))


@dataclass
class TrialResult:
    labels: list
    snapshots: np.ndarray
    theta: np.ndarray        # (T, A, K, d)
    dtheta: np.ndarray       # (T, A, K, d)
    diverged: np.ndarray     # (T, A) step of divergence, 0 if none
    theta_star: np.ndarray
    checksums: np.ndarray | None = None   # (T, A) event-stream digests
    visits: np.ndarray | None = None   # (T, d) Q-learning pair visit counts

    @property
    def trials(self) -> int:
        return self.theta.shape[0]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def divergence_count(self, label: str) -> int:
        return int(np.count_nonzero(self.diverged[:, self.index(label)]))

    def ok(self, label: str) -> np.ndarray:
        return self.diverged[:, self.index(label)] == 0


def _checksum(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def _theta0(plan: TrialPlan, d: int) -> np.ndarray:
    return np.zeros(d) if plan.theta0 is None else np.asarray(plan.theta0, dtype=float)


def _linear_stream(plan: TrialPlan, rng):
    return plan.problem.draw_stream(rng, plan.n_steps)


def _linear_run(plan: TrialPlan, algo: AlgoConfig, stream):
    spec: LinearModelSpec = plan.problem
    idx, noise = stream
    gain = {"SNR_ideal": np.linalg.inv(spec.a_mean), "PolSA_fixed": spec.a_mean}.get(
        algo.name, np.eye(spec.dim))
    return kernels.linear_run(
        kernels.LINEAR_CODES[algo.name], spec.a_mean, spec.perturbation_stack, idx, noise,
        spec.theta_star, _theta0(plan, spec.dim), algo.zeta, plan.schedule.g,
        float(plan.schedule.n0), gain, np.asarray(plan.snapshots, dtype=np.int64))


def _q_stream(plan: TrialPlan, rng):
    mdp: Mdp = plan.problem
    u = draw_uniforms(plan.exploration, rng, plan.n_steps)
    if plan.exploration == "async":
        return kernels.async_events(mdp.first_pair, mdp.n_actions, mdp.cumulative(),
                                    -1 if mdp.goal is None else mdp.goal, _starts(mdp), u, 0)
    return kernels.clock_events(mdp.cumulative(), u, 0)


def _starts(mdp: Mdp) -> np.ndarray:
    if mdp.goal is None:
        return np.arange(mdp.n_states, dtype=np.int64)
    return mdp.non_goal_states()


def _q_run(plan: TrialPlan, algo: AlgoConfig, stream):
    mdp: Mdp = plan.problem
    pairs, nxt = stream
    return kernels.qlearn_run(
        kernels.Q_CODES[algo.name], mdp.beta, mdp.cost, mdp.first_pair, mdp.n_actions,
        pairs, nxt, _theta0(plan, mdp.d), plan.exploration == "clock", algo.zeta,
        plan.schedule.g, float(plan.schedule.n0), 1e-8, SNR_REFRESH,
        np.asarray(plan.snapshots, dtype=np.int64))


def _td_stream(plan: TrialPlan, rng):
    return (rl_algos.simulate_chain(plan.problem, rng, plan.n_steps),)


_TD_CODES = {"TD0": "SA", "LSTD0": "SNR", "PolSA_TD0": "PolSA", "NeSA_TD0": "NeSA"}


def td_linear_stream(model: TdModel, xs: np.ndarray):
    """Recast a TD trajectory as a linear-model stream for ``kernels.linear_run``.

    Each observed transition ``(x, x')`` gets one perturbation
    ``A(x, x') - A_bar``; the additive noise of step k is ``f_k(theta*)``.
    Returns ``(a_bar, perturbations, idx, noise, theta_star)``.
    """
    a_bar, _ = model.mean_linear_system()
    theta_star = model.theta_star()
    codes = xs[:-1] * model.n_states + xs[1:]
    uniq, idx = np.unique(codes, return_inverse=True)
    perts = np.empty((uniq.size, model.d, model.d))
    f_star = np.empty((uniq.size, model.d))
    for u, code in enumerate(uniq):
        s = rl_algos.td_sample(model, int(code // model.n_states), int(code % model.n_states))
        perts[u] = s.a - a_bar
        f_star[u] = s.f(theta_star)
    return a_bar, perts, idx.astype(np.int64), f_star[idx], theta_star


def _td_run(plan: TrialPlan, algo: AlgoConfig, stream):
    model: TdModel = plan.problem
    (xs,) = stream
    kind = rl_algos.TdAlgorithm.parse(algo.name)
    a_bar, perts, idx, noise, theta_star = td_linear_stream(model, xs)
    gain = np.eye(model.d)
    if kind is rl_algos.TdAlgorithm.TD0:
        gain = model.td0_gain * gain
    return kernels.linear_run(
        kernels.LINEAR_CODES[_TD_CODES[kind.value]], a_bar, perts, idx, noise, theta_star,
        _theta0(plan, model.d), algo.zeta, plan.schedule.g, float(plan.schedule.n0), gain,
        np.asarray(plan.snapshots, dtype=np.int64))


def _trial(plan: TrialPlan, t: int, make_stream, run_one):
    """Run every algorithm of trial ``t``.

    With a shared stream all algorithms see the events drawn from the trial
    generator; otherwise algorithm ``a`` gets its own generator keyed ``(t, a)``.
    """
    out, sums, streams = [], [], []
    shared = make_stream(plan, trial_rng(plan.base_seed, t)) if plan.shared_stream else None
    for a, algo in enumerate(plan.algorithms):
        if shared is None:
            rng = np.random.default_rng(np.random.SeedSequence(plan.base_seed, spawn_key=(t, a)))
            stream = make_stream(plan, rng)
        else:
            stream = shared
        out.append(run_one(plan, algo, stream))
        sums.append(_checksum(*stream))
        streams.append(stream)
    visits = None
    if isinstance(plan.problem, Mdp):
        visits = np.bincount(streams[0][0], minlength=plan.problem.d) if streams else None
    return out, sums, visits


def run_trials(plan: TrialPlan) -> TrialResult:
    problem = plan.problem
    if isinstance(problem, LinearModelSpec):
        d, theta_star, parts = problem.dim, problem.theta_star, (_linear_stream, _linear_run)
    elif isinstance(problem, Mdp):
        d, theta_star, parts = problem.d, q_value_iteration(problem), (_q_stream, _q_run)
    elif isinstance(problem, TdModel):
        d, theta_star, parts = problem.d, problem.theta_star(), (_td_stream, _td_run)
    else:
        raise TypeError(f"unsupported problem type {type(problem).__name__}")

    def job(t):
        return _trial(plan, t, *parts)

    workers = plan.workers or default_workers()
    if workers > 1 and plan.trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(job, range(plan.trials)))
    else:
        per_trial = [job(t) for t in range(plan.trials)]

    n_alg, n_snap = len(plan.algorithms), len(plan.snapshots)
    theta = np.full((plan.trials, n_alg, n_snap, d), np.nan)
    dtheta = np.full_like(theta, np.nan)
    diverged = np.zeros((plan.trials, n_alg), dtype=np.int64)
    checksums = np.empty((plan.trials, n_alg), dtype=object)
    visits = np.zeros((plan.trials, d), dtype=np.int64) if isinstance(problem, Mdp) else None
    for t, (runs, checksum, vis) in enumerate(per_trial):
        for a, (ts, dts, div) in enumerate(runs):
            theta[t, a], dtheta[t, a], diverged[t, a] = ts, dts, div
        checksums[t] = checksum
        if visits is not None and vis is not None:
            visits[t] = vis
    return TrialResult([a.key for a in plan.algorithms], np.asarray(plan.snapshots, dtype=np.int64),
                       theta, dtheta, diverged, np.asarray(theta_star, dtype=float),
                       checksums, visits)


# covariance ------------------------------------------------------------------

@dataclass
class CovarianceReport:
    label: str
    snapshots: np.ndarray
    sigma11: np.ndarray      # (K, d, d)
    sigma22: np.ndarray
    sigma21: np.ndarray
    stderr11: np.ndarray
    stderr22: np.ndarray
    stderr21: np.ndarray
    trials: int
    diverged: int
    targets: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        """True when fewer than two trials were usable (standard errors are infinite)."""
        return self.trials < 2

    def block(self, name: str) -> np.ndarray:
        return {"11": self.sigma11, "22": self.sigma22, "21": self.sigma21}[name]

    def stderr(self, name: str) -> np.ndarray:
        return {"11": self.stderr11, "22": self.stderr22, "21": self.stderr21}[name]

    def relative_error(self, name: str, k: int = -1) -> float:
        target = self.targets[name]
        return float(np.linalg.norm(self.block(name)[k] - target) / np.linalg.norm(target))


def _outer_stats(x: np.ndarray, y: np.ndarray, scale: np.ndarray):
    # x, y: (T, K, d); returns mean and stderr of scale * x y^T over trials
    prods = np.einsum("tki,tkj->tkij", x, y) * scale[None, :, None, None]
    mean = prods.mean(axis=0)
    t = prods.shape[0]
    if t < 2:
        return mean, np.full_like(mean, np.inf)
    return mean, prods.std(axis=0, ddof=1) / np.sqrt(t)


def estimate_covariance(result: TrialResult, label: str, theta_star=None,
                        targets: dict | None = None) -> CovarianceReport:
    """Scaled second moments ``n E[e e^T]``, ``n^2 E[dth dth^T]``, ``n^1.5 E[dth e^T]``.

    Divergent trials are excluded and counted.
    """
    a = result.index(label)
    ok = result.ok(label)
    ts = result.theta_star if theta_star is None else np.asarray(theta_star, dtype=float)
    err = result.theta[ok, a] - ts
    dth = result.dtheta[ok, a]
    n = result.snapshots.astype(float)
    s11, e11 = _outer_stats(err, err, n)
    s22, e22 = _outer_stats(dth, dth, n ** 2)
    s21, e21 = _outer_stats(dth, err, n ** 1.5)
    s11 = 0.5 * (s11 + np.swapaxes(s11, 1, 2))
    s22 = 0.5 * (s22 + np.swapaxes(s22, 1, 2))
    return CovarianceReport(label, result.snapshots, s11, s22, s21, e11, e22, e21,
                            int(ok.sum()), int((~ok).sum()), dict(targets or {}))


# coupling --------------------------------------------------------------------

@dataclass
class CouplingCurve:
    reference: str
    labels: list
    zetas: list
    snapshots: np.ndarray
    mean: np.ndarray         # (L, K)
    median: np.ndarray
    diverged: np.ndarray     # (L,)
    raw: np.ndarray          # (L, T, K) scaled squared distances


def coupling_curve(result: TrialResult, reference: str, labels: Sequence[str],
                   zetas: Sequence[float] | None = None) -> CouplingCurve:
    """``n^2 |theta_n - theta*_n|^2`` between each labelled run and the reference run."""
    r = result.index(reference)
    n2 = result.snapshots.astype(float) ** 2
    means, medians, divs, raws = [], [], [], []
    for label in labels:
        a = result.index(label)
        ok = (result.diverged[:, a] == 0) & (result.diverged[:, r] == 0)
        dist = np.sum((result.theta[:, a] - result.theta[:, r]) ** 2, axis=-1) * n2
        raws.append(dist)
        if ok.any():
            means.append(dist[ok].mean(axis=0))
            medians.append(np.median(dist[ok], axis=0))
        else:
            means.append(np.full(n2.size, np.nan))
            medians.append(np.full(n2.size, np.nan))
        divs.append(int((~ok).sum()))
    return CouplingCurve(reference, list(labels), list(zetas or [np.nan] * len(labels)),
                         result.snapshots, np.array(means), np.array(medians),
                         np.array(divs), np.array(raws))


# histograms ------------------------------------------------------------------

def scaled_errors(result: TrialResult, label: str, coordinate: int, n: int) -> np.ndarray:
    """``sqrt(n) (theta_n - theta*)[coordinate]`` over non-divergent trials."""
    k = int(np.searchsorted(result.snapshots, n))
    if k >= result.snapshots.size or result.snapshots[k] != n:
        raise ValueError(f"n={n} is not a snapshot")
    a = result.index(label)
    ok = result.ok(label)
    return np.sqrt(n) * (result.theta[ok, a, k, coordinate] - result.theta_star[coordinate])


@dataclass
class Histogram:
    values: np.ndarray
    counts: np.ndarray
    edges: np.ndarray


def histogram(result: TrialResult, label: str, coordinate: int, n: int, bins: int = 30) -> Histogram:
    values = scaled_errors(result, label, coordinate, n)
    counts, edges = np.histogram(values, bins=bins)
    return Histogram(values, counts, edges)


def ks_distance(a, b) -> float:
    return float(scipy.stats.ks_2samp(np.asarray(a), np.asarray(b)).statistic)


# Bellman error -----------------------------------------------------------------

def bellman_trajectory(result: TrialResult, mdp: Mdp) -> dict[str, np.ndarray]:
    """Per algorithm, the Bellman error at each snapshot averaged over non-divergent trials."""
    out = {}
    for a, label in enumerate(result.labels):
        ok = result.diverged[:, a] == 0
        errs = np.array([[bellman_error(mdp, result.theta[t, a, k])
                          for k in range(result.snapshots.size)]
                         for t in np.flatnonzero(ok)])
        out[label] = errs.mean(axis=0) if errs.size else np.full(result.snapshots.size, np.nan)
    return out


# CSV output --------------------------------------------------------------------

COUPLING_COLUMNS = ("zeta", "n", "mean", "median", "diverged")
COVARIANCE_COLUMNS = ("n", "block", "i", "j", "estimate", "target", "stderr")
HIST_COLUMNS = ("trial", "coordinate", "value")
BELLMAN_COLUMNS = ("algorithm", "n", "error")


def _write(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def write_coupling_csv(path, curve: CouplingCurve) -> Path:
    rows = []
    for li, zeta in enumerate(curve.zetas):
        for k, n in enumerate(curve.snapshots):
            rows.append((float(zeta), int(n), float(curve.mean[li, k]),
                         float(curve.median[li, k]), int(curve.diverged[li])))
    return _write(path, COUPLING_COLUMNS, rows)


def write_covariance_csv(path, reports: Sequence[CovarianceReport]) -> Path:
    rows = []
    for rep in reports:
        prefix = f"{rep.label}:" if len(reports) > 1 else ""
        for k, n in enumerate(rep.snapshots):
            for name in ("11", "22", "21"):
                est, se = rep.block(name)[k], rep.stderr(name)[k]
                target = rep.targets.get(name)
                d = est.shape[0]
                for i in range(d):
                    for j in range(d):
                        tv = float(target[i, j]) if target is not None else float("nan")
                        rows.append((int(n), prefix + name, i, j, float(est[i, j]), tv,
                                     float(se[i, j])))
    return _write(path, COVARIANCE_COLUMNS, rows)


def write_hist_csv(path, values_by_coordinate: dict[int, np.ndarray]) -> Path:
    rows = [(t, int(c), float(v)) for c, vals in values_by_coordinate.items()
            for t, v in enumerate(vals)]
    return _write(path, HIST_COLUMNS, rows)


def write_bellman_csv(path, snapshots, series: dict[str, np.ndarray]) -> Path:
    rows = [(label, int(n), float(v)) for label, vals in series.items()
            for n, v in zip(snapshots, vals)]
    return _write(path, BELLMAN_COLUMNS, rows)
