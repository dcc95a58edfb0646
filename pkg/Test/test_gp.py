"""
Testes do processo gaussiano: kernels, predição, evidência e MCMC.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from App.utils.exceptions import IllConditionedError, InvalidParameterError
from App.utils.gp import (
    KERNEL_MATERN,
    KERNEL_SUM,
    Hyperparams,
    TrainingSet,
    exp_decay_kernel,
    gp_fit,
    gp_predict,
    gram_matrix,
    log_marginal_likelihood,
    matern52,
    median_hyperparams,
    prior_median,
    sample_hyperparams,
    sum_kernel,
)

LOG_2PI = math.log(2 * math.pi)


def test_matern_values():
    assert matern52(0.0, 1.0, 1.0, 1.0) == pytest.approx(0.52399, abs=1e-5)
    assert matern52(0.3, 0.3, 2.0, 0.5) == pytest.approx(2.0)
    assert matern52(0.0, 1.0, 1.0, 1.0) == pytest.approx(matern52(1.0, 0.0, 1.0, 1.0))


def test_exp_decay_values():
    assert exp_decay_kernel(1, 1, 1.0, 1.0) == pytest.approx(1 / 3)
    assert exp_decay_kernel(1, 2, 2.0, 1.0) == pytest.approx(1 / 16)
    assert exp_decay_kernel(5, 5, 1.0, 2.0) < exp_decay_kernel(1, 1, 1.0, 2.0)


def test_sum_kernel_adds_components():
    hp = Hyperparams()
    assert sum_kernel((0.2, 1), (0.2, 1), hp) == pytest.approx(1 + 1 / 3)
    assert sum_kernel((0.2, 1), (0.7, 3), hp) == pytest.approx(
        matern52(0.2, 0.7, 1.0, 1.0) + exp_decay_kernel(1, 3, 1.0, 1.0)
    )


@settings(max_examples=200, deadline=None)
@given(
    xs=st.lists(st.floats(0.01, 0.99), min_size=1, max_size=12),
    rho2=st.floats(0.05, 5.0),
    alpha=st.floats(0.1, 3.0),
    beta=st.floats(0.1, 3.0),
)
def test_gram_is_symmetric_psd(xs, rho2, alpha, beta):
    hp = Hyperparams(matern_rho2=rho2, exp_alpha=alpha, exp_beta=beta)
    points = np.array([[x, 1 + i % 4] for i, x in enumerate(xs)])
    for kernel in (KERNEL_MATERN, KERNEL_SUM):
        gram = gram_matrix(points, points, hp, kernel)
        np.testing.assert_allclose(gram, gram.T, atol=1e-12)
        assert np.linalg.eigvalsh(gram).min() >= -1e-8


def test_prediction_matches_dense_inverse():
    xs = np.array([0.1, 0.35, 0.5, 0.8, 0.95])
    ys = np.array([3.0, 2.1, 1.7, 2.4, 3.3])
    hp = Hyperparams(mean_mu=0.2, noise_sigma_eps=0.1, matern_sigma2=1.5, matern_rho2=0.4)
    train = TrainingSet.create(xs, ys)
    model = gp_fit(train, hp)

    q = np.array([[0.6]])
    x = xs[:, None]
    k = gram_matrix(x, x, hp, KERNEL_MATERN) + (hp.noise_sigma_eps ** 2 + model.jitter) * np.eye(5)
    k_star = gram_matrix(q, x, hp, KERNEL_MATERN)[0]
    y = train.standardized_targets - hp.mean_mu
    inverse = np.linalg.inv(k)
    mean_std = hp.mean_mu + k_star @ inverse @ y
    var_std = hp.matern_sigma2 - k_star @ inverse @ k_star

    mean, var = gp_predict(model, 0.6)
    scale = train.normalization.scale
    assert mean == pytest.approx(mean_std * scale + train.normalization.offset, rel=1e-7)
    assert var == pytest.approx(var_std * scale ** 2, rel=1e-7)


def test_single_point_evidence_closed_form():
    hp = Hyperparams(noise_sigma_eps=0.5, matern_sigma2=2.0)
    train = TrainingSet.create([0.4], [7.0])
    variance = 2.0 + 0.25 + gp_fit(train, hp).jitter
    # alvo padronizado de um ponto é 0
    expected = -0.5 * math.log(variance) - 0.5 * LOG_2PI
    assert log_marginal_likelihood(train, hp) == pytest.approx(expected, rel=1e-9)


def test_evidence_prefers_plausible_noise():
    xs = np.linspace(0.05, 0.95, 10)
    train = TrainingSet.create(xs, np.sin(6 * xs))
    smooth = log_marginal_likelihood(train, Hyperparams(noise_sigma_eps=0.05, matern_rho2=0.5))
    absurd = log_marginal_likelihood(train, Hyperparams(noise_sigma_eps=50.0, matern_rho2=0.5))
    assert smooth > absurd


def test_duplicate_inputs_without_noise_are_ill_conditioned():
    train = TrainingSet.create([0.5, 0.5], [1.0, 2.0])
    with pytest.raises(IllConditionedError):
        gp_fit(train, Hyperparams(noise_sigma_eps=0.0))
    gp_fit(train, Hyperparams(noise_sigma_eps=0.1))


def test_noiseless_fit_interpolates():
    xs = [0.1, 0.4, 0.9]
    ys = [1.0, 3.0, 2.0]
    model = gp_fit(TrainingSet.create(xs, ys), Hyperparams(noise_sigma_eps=0.0, matern_rho2=0.3))
    for x, y in zip(xs, ys):
        mean, var = gp_predict(model, x)
        assert mean == pytest.approx(y, abs=1e-4)
        assert var == pytest.approx(0.0, abs=1e-4)


def test_prediction_reverts_to_prior_far_from_data():
    train = TrainingSet.create([0.1, 0.2], [5.0, 6.0], standardize=False)
    hp = Hyperparams(mean_mu=3.0, noise_sigma_eps=0.1, matern_sigma2=2.0, matern_rho2=0.05)
    mean, var = gp_predict(gp_fit(train, hp), 50.0)
    assert mean == pytest.approx(3.0, abs=1e-6)
    assert var == pytest.approx(2.0, rel=1e-6)


def test_variance_is_never_negative():
    xs = np.linspace(0.01, 0.99, 25)
    model = gp_fit(TrainingSet.create(xs, np.cos(3 * xs)), Hyperparams(noise_sigma_eps=1e-4, matern_rho2=2.0))
    _, var = model.predict_many(np.linspace(0, 1, 401))
    assert np.all(var >= 0)


def test_locality_training_set_uses_pairs():
    train = TrainingSet.create([(0.5, 1), (0.5, 2), (0.25, 1)], [2.0, 1.0, 2.2])
    model = gp_fit(train, Hyperparams(noise_sigma_eps=0.1), KERNEL_SUM)
    mean, var = gp_predict(model, (0.5, 1))
    assert math.isfinite(mean) and var >= 0
    with pytest.raises(InvalidParameterError):
        TrainingSet.create([(0.5, 0)], [1.0])


@pytest.mark.parametrize("kwargs", [
    {"noise_sigma_eps": -1.0}, {"matern_sigma2": 0.0}, {"matern_rho2": math.inf}, {"mean_mu": math.nan},
])
def test_hyperparams_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        Hyperparams(**kwargs)


def test_training_set_validation():
    with pytest.raises(InvalidParameterError):
        TrainingSet.create([], [])
    with pytest.raises(InvalidParameterError):
        TrainingSet.create([0.1, 0.2], [1.0])


@pytest.mark.parametrize("kernel, inputs", [
    (KERNEL_MATERN, [0.1, 0.4, 0.6, 0.9]),
    (KERNEL_SUM, [(0.1, 1), (0.1, 2), (0.6, 1), (0.6, 2)]),
])
def test_mcmc_samples_are_positive_and_reproducible(kernel, inputs):
    train = TrainingSet.create(inputs, [2.0, 1.5, 1.2, 1.9])
    first = sample_hyperparams(train, kernel, n_samples=5, seed=42, burn_in=100, thin=3)
    second = sample_hyperparams(train, kernel, n_samples=5, seed=42, burn_in=100, thin=3)
    assert first == second
    assert len(first) == 5
    for hp in first:
        assert hp.noise_sigma_eps > 0 and hp.matern_sigma2 > 0 and hp.matern_rho2 > 0
        assert hp.exp_alpha > 0 and hp.exp_beta > 0


def test_mcmc_rejects_empty_request():
    with pytest.raises(InvalidParameterError):
        sample_hyperparams(TrainingSet.create([0.5], [1.0]), n_samples=0)


def test_median_hyperparams():
    samples = [Hyperparams(matern_rho2=r) for r in (0.5, 2.0, 1.0)]
    assert median_hyperparams(samples).matern_rho2 == 1.0
    with pytest.raises(InvalidParameterError):
        median_hyperparams([])


def _dense_evidence(train, hp, jitter):
    x = train.inputs
    k = gram_matrix(x, x, hp, KERNEL_MATERN) + (hp.noise_sigma_eps ** 2 + jitter) * np.eye(train.size)
    y = train.standardized_targets - hp.mean_mu
    _, logdet = np.linalg.slogdet(k)
    return -0.5 * y @ np.linalg.solve(k, y) - 0.5 * logdet - 0.5 * train.size * LOG_2PI


def test_evidence_matches_dense_implementation():
    xs = np.array([0.05, 0.2, 0.33, 0.5, 0.61, 0.77, 0.9, 0.97])
    train = TrainingSet.create(xs, np.exp(-xs) + 0.1 * np.sin(9 * xs))
    hp = Hyperparams(mean_mu=-0.1, noise_sigma_eps=0.2, matern_sigma2=0.8, matern_rho2=0.3)
    jitter = gp_fit(train, hp).jitter
    assert log_marginal_likelihood(train, hp) == pytest.approx(_dense_evidence(train, hp, jitter), rel=1e-8)


def test_evidence_derivative_is_consistent_across_steps():
    xs = np.linspace(0.1, 0.9, 6)
    train = TrainingSet.create(xs, xs ** 2)
    hp = Hyperparams(noise_sigma_eps=0.3, matern_sigma2=1.2, matern_rho2=0.4)

    def derivative(step):
        up = log_marginal_likelihood(train, Hyperparams(**{**hp.__dict__, "matern_sigma2": 1.2 + step}))
        down = log_marginal_likelihood(train, Hyperparams(**{**hp.__dict__, "matern_sigma2": 1.2 - step}))
        return (up - down) / (2 * step)

    assert derivative(1e-3) == pytest.approx(derivative(1e-4), rel=1e-4)


def test_variance_at_training_points_is_bounded_by_noise():
    xs = np.array([0.1, 0.3, 0.6, 0.8])
    train = TrainingSet.create(xs, [1.0, 1.4, 0.7, 1.1])
    hp = Hyperparams(noise_sigma_eps=0.2, matern_rho2=0.5)
    model = gp_fit(train, hp)
    _, var = model.predict_many(xs)
    noise_var = (hp.noise_sigma_eps ** 2 + model.jitter) * train.normalization.scale ** 2
    assert np.all(var <= noise_var + 1e-9)


def test_prior_median_checks_kernel():
    assert prior_median(KERNEL_SUM) == Hyperparams()
    with pytest.raises(InvalidParameterError):
        prior_median("rbf")
    with pytest.raises(InvalidParameterError):
        sample_hyperparams(TrainingSet.create([0.5], [1.0]), "rbf")


def _random_instance(rng, kernel):
    t = int(rng.integers(1, 9))
    xs = rng.uniform(0.0, 1.0, t)
    if kernel == KERNEL_SUM:
        inputs = [(x, int(ell)) for x, ell in zip(xs, rng.integers(1, 6, t))]
        query = (float(rng.uniform()), int(rng.integers(1, 6)))
    else:
        inputs = list(xs)
        query = (float(rng.uniform()),)
    hp = Hyperparams(
        mean_mu=float(rng.normal(0.0, 0.5)),
        noise_sigma_eps=float(rng.uniform(0.1, 1.0)),
        matern_sigma2=float(rng.uniform(0.5, 2.0)),
        matern_rho2=float(rng.uniform(0.1, 2.0)),
        exp_alpha=float(rng.uniform(0.2, 2.0)),
        exp_beta=float(rng.uniform(0.2, 2.0)),
    )
    train = TrainingSet.create(inputs, rng.uniform(0.5, 5.0, t))
    return train, hp, np.asarray([query])


@pytest.mark.parametrize("kernel", [KERNEL_MATERN, KERNEL_SUM])
def test_prediction_and_evidence_match_dense_inverse_on_random_instances(kernel):
    rng = np.random.default_rng(2024)
    for _ in range(200):
        train, hp, query = _random_instance(rng, kernel)
        model = gp_fit(train, hp, kernel)

        x = train.inputs
        k = gram_matrix(x, x, hp, kernel) + (hp.noise_sigma_eps ** 2 + model.jitter) * np.eye(train.size)
        inverse = np.linalg.inv(k)
        k_star = gram_matrix(query, x, hp, kernel)[0]
        y = train.standardized_targets - hp.mean_mu
        scale = train.normalization.scale
        mean_std = hp.mean_mu + k_star @ inverse @ y
        var_std = gram_matrix(query, query, hp, kernel)[0, 0] - k_star @ inverse @ k_star
        _, logdet = np.linalg.slogdet(k)
        evidence = -0.5 * y @ inverse @ y - 0.5 * logdet - 0.5 * train.size * LOG_2PI

        mean, var = gp_predict(model, query[0])
        assert mean == pytest.approx(mean_std * scale + train.normalization.offset, rel=1e-8, abs=1e-8)
        assert var == pytest.approx(max(var_std, 0.0) * scale ** 2, rel=1e-8, abs=1e-8)
        assert log_marginal_likelihood(train, hp, kernel) == pytest.approx(evidence, rel=1e-8, abs=1e-8)


def test_mcmc_samples_beat_prior_median_evidence():
    truth = Hyperparams(noise_sigma_eps=0.1, matern_sigma2=1.0, matern_rho2=0.3)
    xs = np.linspace(0.05, 0.95, 10)
    cov = gram_matrix(xs[:, None], xs[:, None], truth, KERNEL_MATERN) + truth.noise_sigma_eps ** 2 * np.eye(10)
    passed = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        ys = 3.0 + rng.multivariate_normal(np.zeros(10), cov)
        train = TrainingSet.create(xs, ys)
        samples = sample_hyperparams(train, KERNEL_MATERN, n_samples=10, seed=seed, burn_in=300, thin=5)
        average = np.mean([log_marginal_likelihood(train, hp) for hp in samples])
        passed += average >= log_marginal_likelihood(train, prior_median())
    assert passed >= 18
