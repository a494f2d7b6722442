import csv

import numpy as np
import pytest

from momentum_sa import harness, linear_model, mdp, rl_algos
from momentum_sa.harness import AlgoConfig, TrialPlan, TrialResult
from momentum_sa.linear_model import LinearModelSpec
from momentum_sa.sa_core import GainSchedule, IterateState, geometric_grid

from conftest import one_state_mdp


def _fake_result(theta, dtheta=None, theta_star=None, snapshots=None):
    theta = np.asarray(theta, dtype=float)
    t, a, k, d = theta.shape
    return TrialResult([f"alg{i}" for i in range(a)],
                       np.asarray(snapshots if snapshots is not None else np.arange(1, k + 1)),
                       theta, np.zeros_like(theta) if dtheta is None else dtheta,
                       np.zeros((t, a), dtype=np.int64),
                       np.zeros(d) if theta_star is None else np.asarray(theta_star, dtype=float))


def test_plan_validation():
    spec = linear_model.preset("scalar")
    with pytest.raises(ValueError):
        TrialPlan(spec, ["SA"], 10, (0, 10), trials=0)
    with pytest.raises(ValueError):
        TrialPlan(spec, ["SA"], 10, (10, 5))
    with pytest.raises(ValueError):
        TrialPlan(spec, ["SA"], 10, (0, 11))
    plan = TrialPlan(spec, ["SA", AlgoConfig("PolSA", 0.5, "p")], 10, [0, 10])
    assert [a.key for a in plan.algorithms] == ["SA", "p"]
    with pytest.raises(TypeError):
        harness.run_trials(TrialPlan(object(), ["SA"], 1, (1,)))


def test_zero_steps_returns_initial_snapshot():
    spec = linear_model.preset("fig2-d4")
    theta0 = np.arange(4.0)
    res = harness.run_trials(TrialPlan(spec, ["SA", "NeSA"], 0, (0,), theta0=theta0))
    assert res.theta.shape == (1, 2, 1, 4)
    assert np.array_equal(res.theta[0, 1, 0], theta0)
    assert np.array_equal(res.dtheta[0, 0, 0], np.zeros(4))


@pytest.mark.parametrize("workers", [1, 3])
def test_same_plan_is_bitwise_reproducible(workers):
    spec = linear_model.preset("mixture-d3")
    plan = TrialPlan(spec, ["SNR", "PolSA", "NeSA"], 500, (10, 100, 500), trials=5,
                     base_seed=3, workers=workers)
    a, b = harness.run_trials(plan), harness.run_trials(plan)
    assert a.theta.tobytes() == b.theta.tobytes()
    assert a.dtheta.tobytes() == b.dtheta.tobytes()
    assert np.array_equal(a.checksums, b.checksums)
    serial = harness.run_trials(TrialPlan(spec, ["SNR", "PolSA", "NeSA"], 500, (10, 100, 500),
                                          trials=5, base_seed=3, workers=1))
    assert a.theta.tobytes() == serial.theta.tobytes()


def test_trials_use_distinct_streams():
    res = harness.run_trials(TrialPlan(linear_model.preset("scalar"), ["SA"], 50, (50,), trials=3))
    assert len(set(res.checksums[:, 0])) == 3


def test_shared_stream_checksums_match_across_algorithms():
    m = mdp.six_state_mdp()
    res = harness.run_trials(TrialPlan(m, ["Watkins", "SNR", "PolSA_D"], 300, (300,), trials=2))
    for t in range(2):
        assert len(set(res.checksums[t])) == 1
    unshared = harness.run_trials(TrialPlan(m, ["Watkins", "SNR"], 300, (300,), trials=1,
                                            shared_stream=False))
    assert unshared.checksums[0, 0] != unshared.checksums[0, 1]
    assert res.visits.shape == (2, m.d) and np.all(res.visits.sum(axis=1) == 300)


def test_zero_noise_coupling_is_identically_zero():
    spec = LinearModelSpec(np.diag([-1.0, -0.5]), np.array([-1.0, 0.5]), np.zeros((2, 2)))
    plan = TrialPlan(spec, ["SNR_ideal", "PolSA_fixed", "SNR"], 200, (1, 10, 200), trials=2,
                     theta0=spec.theta_star)
    curve = harness.coupling_curve(harness.run_trials(plan), "SNR_ideal", ["PolSA_fixed", "SNR"])
    assert np.all(curve.mean == 0.0) and np.all(curve.median == 0.0)


def test_self_coupling_is_zero():
    res = harness.run_trials(TrialPlan(linear_model.preset("fig2"), ["PolSA_fixed"], 100, (10, 100)))
    curve = harness.coupling_curve(res, "PolSA_fixed", ["PolSA_fixed"])
    assert np.all(curve.mean == 0.0)


def test_coupling_bounded_on_fig2():
    spec = linear_model.preset("fig2")
    snaps = tuple(geometric_grid(20_000, 1000, 4))
    res = harness.run_trials(TrialPlan(spec, ["SNR_ideal", AlgoConfig("PolSA_fixed", 1.0)],
                                       20_000, snaps, trials=40, base_seed=1))
    curve = harness.coupling_curve(res, "SNR_ideal", ["PolSA_fixed"], [1.0])
    assert np.all(curve.mean >= 0)
    assert curve.mean[0].max() <= 10 * curve.mean[0, 0]


def test_unstable_zeta_divergence_is_recorded():
    spec = linear_model.preset("fig2")
    res = harness.run_trials(TrialPlan(spec, ["SNR_ideal", AlgoConfig("PolSA_fixed", 2.1, "z")],
                                       5000, (5000,), trials=3))
    assert res.divergence_count("z") == 3
    assert res.divergence_count("SNR_ideal") == 0
    curve = harness.coupling_curve(res, "SNR_ideal", ["z"], [2.1])
    assert curve.diverged[0] == 3 and np.isnan(curve.mean[0, 0])


def test_covariance_at_root_is_zero():
    res = _fake_result(np.ones((4, 1, 3, 2)), theta_star=np.ones(2))
    rep = harness.estimate_covariance(res, "alg0")
    for name in ("11", "22", "21"):
        assert np.all(rep.block(name) == 0.0)


def test_single_trial_has_infinite_stderr():
    res = _fake_result(np.random.default_rng(0).standard_normal((1, 1, 2, 2)))
    rep = harness.estimate_covariance(res, "alg0")
    assert rep.degenerate
    assert np.all(np.isinf(rep.stderr("11")))


def test_covariance_excludes_divergent_trials():
    theta = np.random.default_rng(1).standard_normal((5, 1, 1, 2))
    res = _fake_result(theta)
    res.diverged[2, 0] = 7
    rep = harness.estimate_covariance(res, "alg0")
    assert rep.trials == 4 and rep.diverged == 1
    keep = np.delete(theta[:, 0, 0], 2, axis=0)
    assert np.allclose(rep.sigma11[0], keep.T @ keep / 4)


def test_covariance_two_halves_aggregate_exactly(rng):
    theta = rng.standard_normal((10, 1, 3, 3))
    dtheta = rng.standard_normal((10, 1, 3, 3))
    snaps = np.array([4, 16, 64])
    whole = harness.estimate_covariance(_fake_result(theta, dtheta, snapshots=snaps), "alg0")
    halves = [harness.estimate_covariance(_fake_result(theta[s], dtheta[s], snapshots=snaps), "alg0")
              for s in (slice(0, 5), slice(5, 10))]
    for name in ("11", "22", "21"):
        avg = 0.5 * (halves[0].block(name) + halves[1].block(name))
        assert np.allclose(avg, whole.block(name), rtol=1e-12, atol=1e-12)


def test_idealized_snr_scalar_covariance_approaches_sigma_star():
    spec = LinearModelSpec([[-1.0]], [0.0], [[1.0]])
    res = harness.run_trials(TrialPlan(spec, ["SNR_ideal"], 2000, (2000,), trials=2000, base_seed=5))
    rep = harness.estimate_covariance(res, "SNR_ideal", targets={"11": np.eye(1)})
    se = rep.stderr("11")[-1, 0, 0]
    assert abs(rep.sigma11[-1, 0, 0] - 1.0) <= 4 * se
    assert rep.relative_error("11") < 0.15


def test_histogram_and_ks():
    res = _fake_result(np.full((6, 2, 1, 2), 0.5), snapshots=[100])
    h = harness.histogram(res, "alg0", 1, 100, bins=5)
    assert np.count_nonzero(h.counts) == 1 and h.counts.sum() == 6
    assert np.allclose(h.values, 5.0)
    x = np.random.default_rng(0).standard_normal(300)
    assert harness.ks_distance(x, x) == 0.0
    assert harness.ks_distance(x, x + 10) == 1.0
    with pytest.raises(ValueError):
        harness.scaled_errors(res, "alg0", 0, 50)


def test_bellman_trajectory_at_q_star_is_flat():
    m = mdp.six_state_mdp()
    q = mdp.q_value_iteration(m)
    res = _fake_result(np.broadcast_to(q, (2, 1, 4, m.d)).copy(), snapshots=[1, 2, 3, 4])
    series = harness.bellman_trajectory(res, m)["alg0"]
    assert series.shape == (4,)
    assert np.all(series < 1e-10)


def test_watkins_clock_bellman_trajectory_on_one_state():
    m = one_state_mdp(beta=0.5)
    snaps = (10, 100, 1000, 10_000)
    res = harness.run_trials(TrialPlan(m, ["Watkins"], 10_000, snaps, exploration="clock"))
    series = harness.bellman_trajectory(res, m)["Watkins"]
    assert series.size == len(snaps)
    assert np.all(np.diff(series) < 0) and series[-1] < 1e-2


def test_td_trials_run_and_record_divergence_free():
    model = rl_algos.cycle_chain(4)
    res = harness.run_trials(TrialPlan(model, ["TD0", "LSTD0", "PolSA_TD0", "NeSA_TD0"], 2000,
                                       (0, 2000), trials=2))
    assert np.all(res.diverged == 0)
    assert np.allclose(res.theta_star, model.value_function())
    assert np.all(np.abs(res.theta[:, :, -1] - res.theta_star).max(axis=-1) < 0.5)


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_csv_columns(tmp_path):
    res = _fake_result(np.random.default_rng(2).standard_normal((3, 2, 2, 2)), snapshots=[10, 20])
    curve = harness.coupling_curve(res, "alg0", ["alg1"], [1.0])
    rows = _read(harness.write_coupling_csv(tmp_path / "c.csv", curve))
    assert rows[0] == ["zeta", "n", "mean", "median", "diverged"] and len(rows) == 3
    rep = harness.estimate_covariance(res, "alg0", targets={"11": np.eye(2)})
    rows = _read(harness.write_covariance_csv(tmp_path / "v.csv", [rep]))
    assert rows[0] == ["n", "block", "i", "j", "estimate", "target", "stderr"]
    assert len(rows) == 1 + 2 * 3 * 4
    rows = _read(harness.write_hist_csv(tmp_path / "h.csv", {0: np.array([1.0, 2.0])}))
    assert rows == [["trial", "coordinate", "value"], ["0", "0", "1.0"], ["1", "0", "2.0"]]
    rows = _read(harness.write_bellman_csv(tmp_path / "b.csv", [10, 20], {"W": np.array([0.5, 0.25])}))
    assert rows == [["algorithm", "n", "error"], ["W", "10", "0.5"], ["W", "20", "0.25"]]


def test_threads_env(monkeypatch):
    monkeypatch.setenv(harness.THREADS_ENV, "2")
    assert harness.default_workers() == 2
    monkeypatch.delenv(harness.THREADS_ENV)
    assert harness.default_workers() >= 1


@pytest.mark.parametrize("kind", [k.value for k in rl_algos.TdAlgorithm])
def test_td_kernel_matches_python_steppers(kind):
    model = rl_algos.cycle_chain(5, beta=0.7)
    n = 3000
    theta0 = np.linspace(-1.0, 1.0, 5)
    plan = TrialPlan(model, [kind], n, (10, n), theta0=theta0, base_seed=2)
    res = harness.run_trials(plan)
    xs = rl_algos.simulate_chain(model, harness.trial_rng(2, 0), n)
    schedule = GainSchedule(model.td0_gain) if kind == "TD0" else GainSchedule()
    state = IterateState.initial(theta0)
    for k in range(n):
        state = rl_algos.td_step(kind, state, rl_algos.td_sample(model, xs[k], xs[k + 1]), schedule)
        if state.n == 10:
            early = state.theta
    assert np.allclose(res.theta[0, 0, 0], early, rtol=1e-8, atol=1e-10)
    assert np.allclose(res.theta[0, 0, 1], state.theta, rtol=1e-8, atol=1e-10)
