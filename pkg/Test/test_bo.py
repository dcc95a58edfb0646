"""
Testes do otimizador bayesiano: reparametrização, aquecimento Sobol,
surrogates, MES, otimização interna e laço fechado.
"""

import math

import numpy as np
import pytest

from App.utils.bo import (
    SURROGATE_LOCALITY,
    SURROGATE_PLAIN,
    BOConfig,
    MarginalizedAcquisition,
    Observation,
    best_so_far,
    bo_run_closed_loop,
    bo_step,
    build_surrogate,
    inner_optimize,
    mes_acquisition,
    mes_utility,
    posterior_mean_argmin,
    predict_total,
    predict_total_many,
    reparam,
    sample_max_values_gumbel,
    sobol_init,
    unreparam,
)
from App.utils.chunking import fss_analytic_theta
from App.utils.exceptions import AcquisitionError, InvalidParameterError, LoopSchedError, ObjectiveError
from App.utils.gp import KERNEL_MATERN, KERNEL_SUM
from App.utils.simulator import (
    LocalityModel,
    SyntheticWorkload,
    brute_force_best_theta,
    default_theta_grid,
    generate_durations,
    make_objective,
    simulate_total_time,
)

# MCMC curto para manter os testes rápidos
FAST = dict(hp_samples=3, mes_samples=5, burn_in=60, thin=2)

def _observations(xs, f=lambda x: 1.0 + (x - 0.3) ** 2, n_executions=1):
    return [Observation.from_times(x, [f(x) / n_executions] * n_executions) for x in xs]

# --- Reparametrização e Sobol ---

def test_reparam_values():
    assert reparam(0.5) == pytest.approx(2 ** -0.5)
    assert reparam(10 / 19) == pytest.approx(1.0)
    assert unreparam(reparam(0.123)) == pytest.approx(0.123)

@pytest.mark.parametrize("x", [0.0, 1.0, -0.1, math.nan])
def test_reparam_rejects_closed_bounds(x):
    with pytest.raises(InvalidParameterError):
        reparam(x)

def test_sobol_sequence():
    assert sobol_init(4) == [0.5, 0.25, 0.75, 0.125]
    assert sobol_init(7)[4:] == [0.625, 0.375, 0.875]

def test_warm_up_follows_sobol_then_acquisition():
    config = BOConfig(n_init=3, **FAST)
    assert bo_step([], config) == 0.5
    assert bo_step(_observations([0.5]), config) == 0.25
    assert bo_step(_observations([0.5, 0.25]), config) == 0.75
    x = bo_step(_observations([0.5, 0.25, 0.75]), config)
    assert 0 < x < 1

# --- Configuração e observações ---

def test_subsample_k_keeps_ratio_of_four():
    config = BOConfig()
    assert config.resolve_subsample_k(16) == 4
    assert config.resolve_subsample_k(1) == 1
    assert config.resolve_subsample_k(10) == 3
    assert BOConfig(subsample_k=2).resolve_subsample_k(16) == 2

def test_config_round_trip_ignores_unknown_keys():
    config = BOConfig(n_init=2, surrogate=SURROGATE_LOCALITY, seed=9)
    assert BOConfig.from_dict({**config.to_dict(), "extra": 1}) == config

def test_config_validation():
    with pytest.raises(InvalidParameterError):
        BOConfig(surrogate="wat")
    with pytest.raises(InvalidParameterError):
        BOConfig(n_init=0)

def test_observation_total():
    obs = Observation.from_times(0.5, [1.0, 2.0, 3.0])
    assert obs.total == 6.0
    assert obs.per_execution == ((1, 1.0), (2, 2.0), (3, 3.0))
    assert obs.theta == pytest.approx(reparam(0.5))

# --- Surrogates ---

def test_locality_surrogate_subsamples_executions():
    config = BOConfig(surrogate=SURROGATE_LOCALITY)
    observations = _observations([0.5, 0.25], n_executions=16)
    surrogate = build_surrogate(observations, config)
    assert surrogate.kernel == KERNEL_SUM
    assert surrogate.subsample_k == 4
    ells = sorted(set(surrogate.train.inputs[:, 1].astype(int)))
    assert ells == [1, 5, 9, 13]
    assert surrogate.train.size == 8

def test_locality_surrogate_falls_back_without_repeats():
    config = BOConfig(surrogate=SURROGATE_LOCALITY)
    surrogate = build_surrogate(_observations([0.5, 0.25]), config)
    assert surrogate.mode == SURROGATE_PLAIN
    assert surrogate.kernel == KERNEL_MATERN
    assert surrogate.warnings

def test_locality_prediction_sums_over_all_executions():
    config = BOConfig(surrogate=SURROGATE_LOCALITY)
    observations = _observations([0.2, 0.5, 0.8], n_executions=8)
    surrogate = build_surrogate(observations, config)
    mean, var = predict_total(surrogate, 0.5)
    rows = np.array([[0.5, ell] for ell in range(1, 9)])
    per_mean, per_var = surrogate.model.predict_many(rows)
    assert mean == pytest.approx(per_mean.sum())
    assert var == pytest.approx(per_var.sum())

def test_locality_prediction_beats_plain_on_additive_locality_data():
    # τ_ℓ(x) = makespan simulado + efeito aditivo de localidade c·e^{−λ(ℓ−1)}
    decay = LocalityModel(c=2.0, lam=0.5)
    train_xs = sobol_init(6)
    test_xs = (np.arange(20) + 0.5) / 20
    wins = 0
    for seed in range(20):
        durations = generate_durations("lognormal", {"mu": 1e-3, "sigma": 1e-3}, 2048, seed=seed)
        workload = SyntheticWorkload(durations, p=8, h=2e-4)
        scale = simulate_total_time(workload, reparam(0.5))
        offsets = [scale * (decay.multiplier(ell) - 1.0) for ell in range(1, 9)]
        rng = np.random.default_rng(seed)

        def taus(x):
            base = simulate_total_time(workload, reparam(x))
            return [base + a + rng.normal(0.0, 0.01 * scale) for a in offsets]

        observations = [Observation.from_times(x, taus(x)) for x in train_xs]
        truth = np.array([8 * simulate_total_time(workload, reparam(x)) + sum(offsets) for x in test_xs])
        plain, _ = predict_total_many(build_surrogate(observations, BOConfig()), test_xs)
        locality, _ = predict_total_many(
            build_surrogate(observations, BOConfig(surrogate=SURROGATE_LOCALITY, subsample_k=1)), test_xs
        )
        wins += np.sqrt(np.mean((locality - truth) ** 2)) < np.sqrt(np.mean((plain - truth) ** 2))
    assert wins >= 11

# --- MES ---

def test_mes_is_zero_without_predictive_uncertainty():
    utility = mes_utility([1.0, 2.0], [0.0, 1e-13], [0.5, -0.5])
    np.testing.assert_array_equal(utility, [0.0, 0.0])

def test_mes_is_non_negative_and_finite():
    rng = np.random.default_rng(0)
    mean = rng.normal(size=200)
    std = rng.uniform(1e-6, 3.0, size=200)
    utility = mes_utility(mean, std, rng.normal(size=10))
    assert np.all(np.isfinite(utility))
    assert np.all(utility >= 0)

def test_max_values_are_at_least_best_prediction():
    surrogate = build_surrogate(_observations([0.1, 0.4, 0.9]), BOConfig())
    rng = np.random.default_rng(1)
    samples = sample_max_values_gumbel(surrogate, 20, rng, grid_size=64)
    assert samples.shape == (20,)
    assert np.all(np.isfinite(samples))
    # y* é um máximo do objetivo negado
    assert np.all(samples >= -max(o.total for o in _observations([0.1, 0.4, 0.9])) - 1e-9)

def test_mes_acquisition_scalar_and_vector():
    surrogate = build_surrogate(_observations([0.1, 0.4, 0.9]), BOConfig())
    ymax = np.array([-0.9, -0.8])
    scalar = mes_acquisition(surrogate, 0.6, ymax)
    vector = mes_acquisition(surrogate, [0.6, 0.7], ymax)
    assert isinstance(scalar, float)
    assert vector.shape == (2,)
    assert scalar == pytest.approx(vector[0])

def test_mes_matches_monte_carlo_entropy_reduction():
    # H[y] − E[H[y | y ≤ y*]] estimado com 2·10⁵ normais padrão truncadas em γ
    surrogate = build_surrogate(_observations([0.2, 0.8]), BOConfig())
    z = np.random.default_rng(11).standard_normal(200_000)
    for x, gamma in [(0.5, -1.0), (0.35, -0.5), (0.6, 0.0), (0.1, 0.5), (0.95, 1.0)]:
        mean, var = predict_total(surrogate, x)
        y_star = -mean + gamma * math.sqrt(var)
        kept = z[z <= gamma]
        expected = 0.5 - np.mean(kept ** 2) / 2.0 - math.log(kept.size / z.size)
        assert mes_acquisition(surrogate, x, [y_star]) == pytest.approx(expected, rel=0.1)

def test_marginalized_acquisition_lies_within_sample_range():
    acquisition = MarginalizedAcquisition(_observations([0.5, 0.25, 0.75, 0.125]), BOConfig(**FAST, seed=5))
    grid = np.linspace(0.01, 0.99, 50)
    samples = acquisition.per_sample(grid)
    values = acquisition.many(grid)
    assert np.all(values >= samples.min(axis=0) - 1e-12)
    assert np.all(values <= samples.max(axis=0) + 1e-12)

def test_marginalized_acquisition_is_deterministic():
    observations = _observations([0.5, 0.25, 0.75, 0.125])
    config = BOConfig(**FAST, seed=3)
    first = MarginalizedAcquisition(observations, config)
    second = MarginalizedAcquisition(observations, config)
    grid = np.linspace(0.05, 0.95, 7)
    np.testing.assert_array_equal(first.many(grid), second.many(grid))
    assert first.per_sample(grid).shape[1] == 7
    assert first(0.3) == pytest.approx(first.many([0.3])[0])

# --- Otimização interna ---

def test_inner_optimize_finds_peak():
    x = inner_optimize(lambda v: -(v - 0.3) ** 2)
    assert x == pytest.approx(0.3, abs=1e-3)

def test_inner_optimize_uses_grid_when_direct_misses_narrow_peak():
    def spike(v):
        return math.exp(-((v - 0.8137) / 2e-3) ** 2)

    x = inner_optimize(spike)
    assert x == pytest.approx(0.8137, abs=2e-3)

def _three_peaks(v):
    return (
        np.exp(-(((v - 0.713) / 0.05) ** 2))
        + 0.8 * np.exp(-(((v - 0.25) / 0.05) ** 2))
        + 0.6 * np.exp(-(((v - 0.5) / 0.03) ** 2))
    )

def test_inner_optimize_finds_global_peak_of_multimodal_function():
    grid = np.linspace(0.0, 1.0, 1_000_001)
    assert grid[np.argmax(_three_peaks(grid))] == pytest.approx(0.713, abs=1e-5)
    assert inner_optimize(_three_peaks) == pytest.approx(0.713, abs=1e-3)

def test_inner_optimize_reports_non_finite_value():
    def broken(v):
        return math.nan if v > 0.5 else -v

    with pytest.raises(AcquisitionError) as info:
        inner_optimize(broken)
    assert isinstance(info.value, LoopSchedError)
    assert info.value.exit_code == 3
    bad_x = float(str(info.value).rsplit("x=", 1)[1])
    assert bad_x > 0.5

def test_inner_optimize_reports_infinite_value_without_validation():
    with pytest.raises(AcquisitionError):
        inner_optimize(lambda v: math.inf if v < 0.2 else -v, validate=False)

# --- Laço fechado ---

def test_closed_loop_trace_length_and_best():
    config = BOConfig(n_init=3, n_iters=2, **FAST)
    best_x, best_total, trace = bo_run_closed_loop(lambda x: [1.0 + (x - 0.3) ** 2], config)
    assert len(trace) == 5
    assert [e.t for e in trace] == list(range(5))
    assert [e.x for e in trace[:3]] == [0.5, 0.25, 0.75]
    assert best_total == min(e.total for e in trace)
    assert best_x in [e.x for e in trace]

def test_closed_loop_wraps_objective_failure():
    calls = []

    def objective(x):
        calls.append(x)
        if len(calls) == 2:
            raise RuntimeError("sem tempo")
        return [1.0]

    with pytest.raises(ObjectiveError) as info:
        bo_run_closed_loop(objective, BOConfig(n_init=4, n_iters=0))
    assert len(info.value.trace) == 1

def test_best_so_far():
    assert best_so_far([3.0, 4.0, 2.0, 5.0]) == [3.0, 3.0, 2.0, 2.0]
    assert best_so_far([]) == []

def test_posterior_mean_argmin_near_quadratic_minimum():
    observations = _observations([0.05, 0.2, 0.3, 0.45, 0.7, 0.95])
    x = posterior_mean_argmin(observations, BOConfig(**FAST))
    assert x == pytest.approx(0.3, abs=0.1)

@pytest.mark.slow
def test_closed_loop_reaches_brute_force_optimum_on_most_seeds():
    # N=4096, P=8, durações lognormais, 4 + 16 avaliações contra a grade de 256 θ
    hits = 0
    for seed in range(20):
        durations = generate_durations("lognormal", {"mu": 1.0, "sigma": 1.0}, 4096, seed=seed)
        workload = SyntheticWorkload(durations, p=8, h=0.01)
        _, optimum = brute_force_best_theta(workload, default_theta_grid(256))
        config = BOConfig(n_init=4, n_iters=16, seed=seed)
        _, best_total, _ = bo_run_closed_loop(make_objective(workload), config)
        hits += best_total <= optimum * 1.02
    assert hits >= 18

@pytest.mark.slow
def test_locality_surrogate_closed_loop_runs():
    workload = SyntheticWorkload(
        np.full(512, 0.01), p=4, h=0.001, locality=LocalityModel(c=0.5, lam=0.7), n_executions=8
    )
    config = BOConfig(n_init=3, n_iters=3, surrogate=SURROGATE_LOCALITY, **FAST)
    _, _, trace = bo_run_closed_loop(make_objective(workload), config)
    assert len(trace) == 6
    assert all(e.total > 0 for e in trace)

@pytest.mark.slow
def test_closed_loop_on_convex_objective_lands_near_optimum():
    grid = np.linspace(0.0, 1.0, 100_001)
    config = dict(n_init=4, n_iters=10, hp_samples=5, burn_in=200, thin=5)
    hits = 0
    for seed in range(20):
        center = float(np.random.default_rng(seed).uniform(0.15, 0.85))

        def objective(x, center=center):
            return [1.0 + 4.0 * (x - center) ** 2]

        optimum = grid[np.argmin(1.0 + 4.0 * (grid - center) ** 2)]
        best_x, _, _ = bo_run_closed_loop(objective, BOConfig(seed=seed, **config))
        hits += abs(best_x - optimum) <= 0.05
    assert hits >= 18

@pytest.mark.slow
@pytest.mark.parametrize("durations, h, min_gain", [
    # baixo desbalanceamento: gaussiana com CV 0.1
    (generate_durations("gaussian", {"mu": 1.0, "sigma": 0.1}, 4096, seed=0), 5.0, 0.0),
    # alto desbalanceamento: laço triangular, tarefas mais pesadas no início
    (np.arange(4096, 0, -1) * (2.0 / 4096), 1e-3, 0.05),
    # h alto: cada dequeue custa 20 tarefas médias
    (generate_durations("gaussian", {"mu": 1.0, "sigma": 0.5}, 4096, seed=0), 20.0, 0.0),
], ids=["low-imbalance", "high-imbalance", "high-h"])
def test_tuned_theta_beats_analytic_theta(durations, h, min_gain):
    workload = SyntheticWorkload(durations, p=8, h=h)
    analytic = simulate_total_time(workload, fss_analytic_theta(workload.task_stats()))
    _, tuned, _ = bo_run_closed_loop(make_objective(workload), BOConfig(n_init=4, n_iters=16, seed=0))
    assert tuned <= analytic * (1.0 - min_gain)
