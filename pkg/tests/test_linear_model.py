import numpy as np
import pytest

from momentum_sa import linalg, linear_model, variance
from momentum_sa.linear_model import LinearModelSpec


def test_sample_without_noise_or_perturbation_is_the_mean_model():
    a = np.array([[-1.0, 0.5], [0.0, -2.0]])
    spec = LinearModelSpec(a, np.array([1.0, 2.0]), np.zeros((2, 2)))
    s = linear_model.sample(spec, np.random.default_rng(0))
    assert np.allclose(s.a, a)
    assert np.allclose(s.b, spec.b_mean)


def test_mixture_sample_mean_within_lln_bound():
    spec = linear_model.preset("mixture-d3")
    rng = np.random.default_rng(1)
    n = 100_000
    idx = spec.draw_perturbation_indices(rng, n)
    stack = spec.perturbation_stack
    mean_a = spec.a_mean + stack[idx].mean(axis=0)
    # entrywise std of the mixture
    std = np.sqrt(np.einsum("k,kij->ij", spec.perturbation_probs, stack ** 2))
    assert np.all(np.abs(mean_a - spec.a_mean) <= 3 * std / np.sqrt(n) + 1e-15)


@pytest.mark.parametrize("name", ["fig2-d4", "mixture-d3"])
def test_noise_covariance_monte_carlo(name):
    spec = linear_model.preset(name)
    rng = np.random.default_rng(2)
    idx, noise = spec.draw_stream(rng, 100_000)
    # f(theta*) of each sample is the noise draw
    f_star = np.array([spec.make_sample(int(idx[k]) if idx.size else None, noise[k]).f(spec.theta_star)
                       for k in range(2000)])
    assert np.allclose(f_star, noise[:2000], atol=1e-12)
    emp = np.cov(noise.T, bias=True)
    err = np.linalg.norm(emp - spec.noise_cov) / np.linalg.norm(spec.noise_cov)
    assert err < 0.05


def test_facts_examples():
    spec = LinearModelSpec(-np.eye(2), np.zeros(2), np.eye(2))
    f = linear_model.facts(spec)
    assert np.allclose(f.sigma_star, np.eye(2))
    assert np.allclose(f.l_operator, np.zeros((4, 4)))
    spec = LinearModelSpec([[-2.0]], [1.0], [[4.0]])
    assert linear_model.facts(spec).sigma_star[0, 0] == pytest.approx(1.0)
    a = np.array([[-0.5, 0.2], [0.1, -0.7]])
    spec = LinearModelSpec(a, np.ones(2), np.eye(2))
    m = np.eye(2) + a
    assert np.allclose(linear_model.l_operator(spec), np.kron(m, m))


def test_l_operator_matches_direct_mixture_average():
    spec = linear_model.preset("mixture-d4")
    rng = np.random.default_rng(3)
    q = rng.standard_normal((4, 4))
    direct = sum(p * (np.eye(4) + spec.a_mean + m) @ q @ (np.eye(4) + spec.a_mean + m).T
                 for m, p in spec.a_perturbations)
    via = linalg.unvec(linear_model.l_operator(spec) @ linalg.vec(q), 4)
    assert np.allclose(via, direct, atol=1e-12)


@pytest.mark.parametrize("d", [1, 4, 10])
def test_symmetric_drift_model_normalization(d):
    spec = linear_model.symmetric_drift_model(d, rng_seed=5)
    ev = np.linalg.eigvalsh(-spec.a_mean)
    assert abs(ev.max() - 1.0) < 1e-10
    assert ev.min() > 0
    assert np.allclose(spec.a_mean, spec.a_mean.T)
    assert np.allclose(spec.theta_star, np.ones(d))
    if d == 1:
        assert spec.a_mean[0, 0] == -1.0


@pytest.mark.parametrize("name", sorted(linear_model.PRESETS))
def test_presets_are_stable_at_unit_zeta(name):
    spec = linear_model.preset(name)
    report = variance.check_stability(spec.a_mean, 1.0, linear_model.l_operator(spec))
    assert report.overall, report.failure_reason()


def test_noise_kinds_tag_boundedness():
    assert not linear_model.preset("fig2").meets_bounded_noise()
    spec = linear_model.preset("mixture-d3")
    assert spec.meets_bounded_noise()
    noise = spec.draw_noise(np.random.default_rng(0), 1000)
    bound = np.abs(spec._noise_factor).sum(axis=1)
    assert np.all(np.abs(noise) <= bound + 1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        LinearModelSpec(np.zeros((2, 2)), np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        LinearModelSpec(-np.eye(2), np.zeros(3), np.eye(2))
    with pytest.raises(ValueError):
        LinearModelSpec(-np.eye(2), np.zeros(2), -np.eye(2))
    with pytest.raises(ValueError):
        LinearModelSpec(-np.eye(1), [0.0], [[1.0]], (([[0.1]], 1.0),))
    with pytest.raises(ValueError):
        LinearModelSpec(-np.eye(1), [0.0], [[1.0]], noise_kind="cauchy")
    with pytest.raises(KeyError):
        linear_model.preset("nope")


def test_draw_stream_is_deterministic():
    spec = linear_model.preset("mixture-d3")
    a = spec.draw_stream(np.random.default_rng(9), 50)
    b = spec.draw_stream(np.random.default_rng(9), 50)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
