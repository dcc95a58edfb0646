"""
Otimização bayesiana do parâmetro θ do FSS.

Fluxo de uma iteração: aquecimento por Sobol até existirem `n_init`
observações; depois, ajuste do surrogate (GP simples sobre o tempo total ou
GP com localidade sobre (x, ℓ)), aquisição MES marginalizada sobre amostras
dos hiperparâmetros e maximização interna por DIRECT.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence
import math

import numpy as np
from scipy.optimize import brentq, direct, minimize_scalar
from scipy.stats import norm

from .constants import (
    DEFAULT_BURN_IN,
    DEFAULT_HP_SAMPLES,
    DEFAULT_MES_SAMPLES,
    DEFAULT_N_INIT,
    DEFAULT_N_ITERS,
    DEFAULT_THIN,
    DIRECT_MAXFUN,
    DIRECT_PENALTY,
    INNER_X_TOL,
    LOCALITY_SUBSAMPLE_RATIO,
    MAX_VALUE_GRID_SIZE,
    MIN_PREDICTIVE_STD,
    SOBOL_EPS,
    THETA_EXP_OFFSET,
    THETA_EXP_SCALE,
    VALIDATION_GRID_SIZE,
)
from .exceptions import AcquisitionError, IllConditionedError, InvalidParameterError, ObjectiveError
from .gp import (
    KERNEL_MATERN,
    KERNEL_SUM,
    FittedGP,
    Hyperparams,
    TrainingSet,
    gp_fit,
    median_hyperparams,
    prior_median,
    sample_hyperparams,
)
from .logger import get_logger

logger = get_logger(__name__)

SURROGATE_PLAIN = "plain"
SURROGATE_LOCALITY = "locality_aware"
SURROGATE_MODES = (SURROGATE_PLAIN, SURROGATE_LOCALITY)


# --- Espaço de busca ---

def reparam(x: float) -> float:
    """
    Mapeia o intervalo unitário para θ: θ(x) = 2^(19x − 10), 0 < x < 1.

    Raises:
        InvalidParameterError: x fora do intervalo aberto (0, 1).
    """
    x = float(x)
    if not (0.0 < x < 1.0):
        raise InvalidParameterError(f"x deve estar em (0, 1), recebido {x!r}")
    return 2.0 ** (THETA_EXP_SCALE * x - THETA_EXP_OFFSET)


def unreparam(theta: float) -> float:
    """Inversa de `reparam`: x = (log2 θ + 10) / 19."""
    theta = float(theta)
    if not math.isfinite(theta) or theta <= 0:
        raise InvalidParameterError(f"θ deve ser finito e > 0, recebido {theta!r}")
    x = (math.log2(theta) + THETA_EXP_OFFSET) / THETA_EXP_SCALE
    if not (0.0 < x < 1.0):
        raise InvalidParameterError(f"θ = {theta!r} fora do domínio (2^-10, 2^9)")
    return x


def _radical_inverse_base2(index: int) -> float:
    result, fraction = 0.0, 0.5
    while index > 0:
        if index & 1:
            result += fraction
        index >>= 1
        fraction *= 0.5
    return result


def sobol_init(n: int) -> list[float]:
    """
    Primeiros n pontos da sequência de Sobol 1-D (van der Corput base 2),
    sem o elemento 0: 0.5, 0.25, 0.75, 0.125, ...
    """
    if n < 1:
        raise InvalidParameterError(f"n deve ser >= 1, recebido {n}")
    return [min(max(_radical_inverse_base2(i), SOBOL_EPS), 1.0 - SOBOL_EPS) for i in range(1, n + 1)]


def _unit_grid(size: int) -> np.ndarray:
    return np.linspace(SOBOL_EPS, 1.0 - SOBOL_EPS, size)


# --- Configuração e observações ---

@dataclass(frozen=True)
class BOConfig:
    """Configuração do otimizador (snapshot gravado no dataset)."""

    n_init: int = DEFAULT_N_INIT
    n_iters: int = DEFAULT_N_ITERS
    surrogate: str = SURROGATE_PLAIN
    subsample_k: int | None = None
    mes_samples: int = DEFAULT_MES_SAMPLES
    hp_samples: int = DEFAULT_HP_SAMPLES
    burn_in: int = DEFAULT_BURN_IN
    thin: int = DEFAULT_THIN
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_init < 1:
            raise InvalidParameterError(f"n_init deve ser >= 1, recebido {self.n_init}")
        if self.n_iters < 0:
            raise InvalidParameterError(f"n_iters deve ser >= 0, recebido {self.n_iters}")
        if self.surrogate not in SURROGATE_MODES:
            raise InvalidParameterError(f"surrogate deve ser um de {SURROGATE_MODES}, recebido '{self.surrogate}'")
        if self.subsample_k is not None and self.subsample_k < 1:
            raise InvalidParameterError(f"subsample_k deve ser >= 1, recebido {self.subsample_k}")
        for name in ("mes_samples", "hp_samples", "thin"):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} deve ser >= 1")
        if self.burn_in < 0:
            raise InvalidParameterError("burn_in deve ser >= 0")

    def resolve_subsample_k(self, n_executions: int) -> int:
        """k tal que L/k ≈ 4: max(1, round(L/4))."""
        if self.subsample_k is not None:
            return self.subsample_k
        return max(1, math.floor(n_executions / LOCALITY_SUBSAMPLE_RATIO + 0.5))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "BOConfig":
        known = {k: v for k, v in payload.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass(frozen=True)
class Observation:
    """Uma avaliação do objetivo: x, θ = reparam(x), tempos (ℓ, τ_ℓ) e o total."""

    x: float
    theta: float
    per_execution: tuple[tuple[int, float], ...]
    total: float

    @classmethod
    def from_times(cls, x: float, times: Sequence[float] | float) -> "Observation":
        """Cria a observação a partir dos tempos das execuções ℓ = 1..L (ou de um total)."""
        values = [float(times)] if np.isscalar(times) else [float(t) for t in times]
        if not values:
            raise InvalidParameterError("observação sem medições")
        per_execution = tuple((ell, tau) for ell, tau in enumerate(values, start=1))
        return cls(float(x), reparam(x), per_execution, math.fsum(values))

    @property
    def n_executions(self) -> int:
        return len(self.per_execution)


@dataclass(frozen=True)
class TraceEntry:
    t: int
    x: float
    theta: float
    total: float


# --- Surrogate ---

@dataclass(frozen=True)
class Surrogate:
    """
    Handle do surrogate ajustado.

    No modo com localidade, o treino usa ((x, ℓ), τ_ℓ) para ℓ subamostrado e a
    predição do total soma média e variância sobre ℓ = 1..L.
    """

    mode: str
    kernel: str
    train: TrainingSet
    n_executions: int
    subsample_k: int
    model: FittedGP
    warnings: tuple[str, ...] = field(default=())

    def with_hyperparams(self, hp: Hyperparams) -> "Surrogate":
        return replace(self, model=gp_fit(self.train, hp, self.kernel))


def _training_rows(observations: Sequence[Observation], mode: str, k: int) -> tuple[list, list]:
    inputs, targets = [], []
    for obs in observations:
        if mode == SURROGATE_PLAIN:
            inputs.append(obs.x)
            targets.append(obs.total)
            continue
        for ell, tau in obs.per_execution:
            if (ell - 1) % k == 0:
                inputs.append((obs.x, ell))
                targets.append(tau)
    return inputs, targets


def build_surrogate(
    observations: Sequence[Observation],
    config: BOConfig,
    hp: Hyperparams | None = None,
) -> Surrogate:
    """
    Monta o conjunto de treino do surrogate e ajusta o GP.

    Args:
        observations: dataset D_t (>= 1 observação)
        config: modo do surrogate e k da subamostragem
        hp: hiperparâmetros do ajuste (padrão: mediana a priori)

    Returns:
        Surrogate; no modo com localidade sem execuções repetidas (L = 1)
        volta ao modo simples e registra o aviso em `warnings`.
    """
    if not observations:
        raise InvalidParameterError("build_surrogate precisa de pelo menos uma observação")
    n_executions = max(obs.n_executions for obs in observations)
    mode = config.surrogate
    warnings: list[str] = []
    if mode == SURROGATE_LOCALITY and n_executions == 1:
        message = "Surrogate com localidade pedido com L = 1; usando o GP simples."
        logger.warning(message)
        warnings.append(message)
        mode = SURROGATE_PLAIN

    k = config.resolve_subsample_k(n_executions) if mode == SURROGATE_LOCALITY else 1
    kernel = KERNEL_SUM if mode == SURROGATE_LOCALITY else KERNEL_MATERN
    inputs, targets = _training_rows(observations, mode, k)
    train = TrainingSet.create(inputs, targets)
    model = gp_fit(train, hp or prior_median(kernel), kernel)
    logger.debug(f"Surrogate '{mode}' ajustado com {train.size} linhas (L={n_executions}, k={k})")
    return Surrogate(mode, kernel, train, n_executions, k, model, tuple(warnings))


def predict_total_many(surrogate: Surrogate, xs) -> tuple[np.ndarray, np.ndarray]:
    """Média e variância de T_total em vários x."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if surrogate.mode == SURROGATE_PLAIN:
        return surrogate.model.predict_many(xs[:, None])
    ells = np.arange(1, surrogate.n_executions + 1, dtype=float)
    rows = np.column_stack([np.repeat(xs, ells.size), np.tile(ells, xs.size)])
    mean, var = surrogate.model.predict_many(rows)
    shape = (xs.size, ells.size)
    return mean.reshape(shape).sum(axis=1), var.reshape(shape).sum(axis=1)


def predict_total(surrogate: Surrogate, x: float) -> tuple[float, float]:
    """
    Predição de T_total em x: direta no modo simples; no modo com localidade,
    N(Σ μ(x, ℓ), Σ σ²(x, ℓ)) sobre todos os ℓ = 1..L.
    """
    mean, var = predict_total_many(surrogate, [x])
    return float(mean[0]), float(var[0])


# --- Max-value entropy search ---

def mes_utility(mean, std, max_values) -> np.ndarray:
    """
    Utilidade MES no objetivo negado (minimizamos tempo):
    α = média sobre y* de [γ φ(γ) / (2 Φ(γ)) − log Φ(γ)], γ = (y* − μ̃) / σ̃,
    com μ̃ = −mean e σ̃ = std. α = 0 onde σ̃ < 1e-12.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    std = np.atleast_1d(np.asarray(std, dtype=float))
    y_star = np.asarray(max_values, dtype=float).ravel()
    informative = std >= MIN_PREDICTIVE_STD
    safe_std = np.where(informative, std, 1.0)
    gamma = (y_star[None, :] + mean[:, None]) / safe_std[:, None]
    log_cdf = norm.logcdf(gamma)
    ratio = np.exp(norm.logpdf(gamma) - log_cdf)
    utility = np.mean(gamma * ratio / 2.0 - log_cdf, axis=1)
    return np.where(informative, np.maximum(utility, 0.0), 0.0)


def sample_max_values_gumbel(
    surrogate: Surrogate,
    n_samples: int,
    rng: np.random.Generator,
    grid_size: int = MAX_VALUE_GRID_SIZE,
) -> np.ndarray:
    """
    Amostra y* (máximo do objetivo negado) pela aproximação de Gumbel:
    ajusta os quartis de P(max <= y) = Π Φ((y − μ̃)/σ̃) sobre uma grade.
    """
    mean, var = predict_total_many(surrogate, _unit_grid(grid_size))
    mu = -mean
    sigma = np.sqrt(var)
    top = float(np.max(mu))
    if np.all(sigma < MIN_PREDICTIVE_STD):
        return np.full(n_samples, top)
    sigma = np.maximum(sigma, MIN_PREDICTIVE_STD)

    def log_cdf_max(y: float) -> float:
        return float(np.sum(norm.logcdf((y - mu) / sigma)))

    lo = float(np.min(mu - 3.0 * sigma))
    hi = float(np.max(mu + 5.0 * sigma))
    span = hi - lo

    def quantile(q: float) -> float:
        target = math.log(q)
        low, high = lo, hi
        while log_cdf_max(low) > target:
            low -= span
        while log_cdf_max(high) < target:
            high += span
        return brentq(lambda y: log_cdf_max(y) - target, low, high, xtol=1e-12 * max(1.0, abs(top)))

    q25, q50, q75 = quantile(0.25), quantile(0.5), quantile(0.75)
    beta = (q25 - q75) / (math.log(math.log(4.0 / 3.0)) - math.log(math.log(4.0)))
    alpha = q50 + beta * math.log(math.log(2.0))
    gumbel = -np.log(-np.log(rng.uniform(size=n_samples)))
    # y* nunca abaixo do melhor valor previsto na grade
    return np.maximum(alpha + beta * gumbel, top)


def mes_acquisition(surrogate: Surrogate, x, max_values):
    """Aquisição MES do surrogate em x (escalar ou vetor) para amostras y* dadas."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    mean, var = predict_total_many(surrogate, xs)
    utility = mes_utility(mean, np.sqrt(var), max_values)
    return float(utility[0]) if np.ndim(x) == 0 else utility


def _seed_for(config: BOConfig, t: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(config.seed), int(t)])


class MarginalizedAcquisition:
    """
    Aquisição MES marginalizada: média da MES sobre surrogates ajustados com
    amostras φ_i ~ p(φ|D). Amostras que deixam K mal condicionada são descartadas.
    """

    def __init__(self, observations: Sequence[Observation], config: BOConfig):
        self.config = config
        seed_seq = _seed_for(config, len(observations))
        hp_seed, ymax_seed = (int(s) for s in seed_seq.generate_state(2))
        base = build_surrogate(observations, config)
        self.warnings = base.warnings
        samples = sample_hyperparams(
            base.train, base.kernel, config.hp_samples, seed=hp_seed, burn_in=config.burn_in, thin=config.thin
        )
        self.hyperparams = samples
        rng = np.random.default_rng(ymax_seed)
        self.members: list[tuple[Surrogate, np.ndarray]] = []
        for hp in samples:
            try:
                surrogate = base.with_hyperparams(hp)
            except IllConditionedError as e:
                logger.warning(f"Amostra de hiperparâmetros descartada: {e}")
                continue
            self.members.append((surrogate, sample_max_values_gumbel(surrogate, config.mes_samples, rng)))
        if not self.members:
            raise IllConditionedError("Nenhuma amostra de hiperparâmetros produziu um GP bem condicionado")

    def per_sample(self, xs) -> np.ndarray:
        """Matriz (amostras × pontos) das aquisições individuais."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return np.vstack([mes_acquisition(s, xs, ymax) for s, ymax in self.members])

    def many(self, xs) -> np.ndarray:
        return self.per_sample(xs).mean(axis=0)

    def __call__(self, x: float) -> float:
        return float(self.many([x])[0])


def marginalized_acquisition(observations: Sequence[Observation], x: float, config: BOConfig) -> float:
    """(1/N) Σ_i MES(x) sob φ_i amostrado de p(φ|D)."""
    return MarginalizedAcquisition(observations, config)(x)


# --- Otimização interna ---

def inner_optimize(
    acquisition: Callable[[float], float],
    x_tol: float = INNER_X_TOL,
    eps: float = SOBOL_EPS,
    validate: bool = True,
) -> float:
    """
    Maximiza a aquisição em [ε, 1 − ε] com DIRECT.

    Uma passada por uma grade determinística de 1024 pontos valida o
    resultado; se a grade vencer, o melhor ponto dela é refinado localmente.

    Raises:
        AcquisitionError: valor não finito, com o x que o produziu.
    """

    def evaluate(x: float) -> float:
        x = float(x)
        value = float(acquisition(x))
        if not math.isfinite(value):
            raise AcquisitionError(f"Aquisição não finita ({value!r}) em x={x!r}")
        return value

    # Exceções dentro do callback do DIRECT viram SystemError no código C do scipy
    failures: list[AcquisitionError] = []

    def direct_objective(v) -> float:
        try:
            return -evaluate(v[0])
        except AcquisitionError as e:
            failures.append(e)
            return DIRECT_PENALTY

    result = direct(
        direct_objective,
        bounds=[(eps, 1.0 - eps)],
        maxfun=DIRECT_MAXFUN,
        len_tol=x_tol / 2.0,
        locally_biased=True,
    )
    if failures:
        raise failures[0]
    best_x, best_value = float(result.x[0]), -float(result.fun)
    if not validate:
        return best_x

    grid = _unit_grid(VALIDATION_GRID_SIZE)
    many = getattr(acquisition, "many", None)
    values = np.asarray(many(grid), dtype=float) if many is not None else np.array([evaluate(g) for g in grid])
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise AcquisitionError(f"Aquisição não finita ({float(values[bad[0]])!r}) em x={float(grid[bad[0]])!r}")
    i = int(np.argmax(values))
    if values[i] > best_value + 1e-12:
        step = grid[1] - grid[0]
        refined = minimize_scalar(
            lambda v: -evaluate(v),
            bounds=(max(eps, grid[i] - step), min(1.0 - eps, grid[i] + step)),
            method="bounded",
            options={"xatol": x_tol / 10.0},
        )
        candidate_x, candidate_value = grid[i], values[i]
        if -refined.fun > candidate_value:
            candidate_x, candidate_value = float(refined.x), -float(refined.fun)
        logger.warning(
            f"DIRECT ({best_x:.6f}, {best_value:.6g}) superado pela grade; usando x={candidate_x:.6f} ({candidate_value:.6g})"
        )
        best_x = float(candidate_x)
    return best_x


# --- Algoritmo 1 ---

def bo_step(observations: Sequence[Observation], config: BOConfig) -> float:
    """
    Próximo x a avaliar. Durante o aquecimento (menos de n_init observações)
    devolve o ponto de Sobol de índice |D|; depois, o argmax da aquisição
    marginalizada. Não altera o dataset.
    """
    t = len(observations)
    if t < config.n_init:
        x = sobol_init(t + 1)[-1]
        logger.info(f"Aquecimento Sobol: t={t}, x={x:.6f}")
        return x
    acquisition = MarginalizedAcquisition(observations, config)
    x = inner_optimize(acquisition)
    logger.info(f"Passo BO: t={t}, x={x:.6f}, θ={reparam(x):.6g}")
    return x


def bo_run_closed_loop(
    objective: Callable[[float], Sequence[float] | float],
    config: BOConfig,
) -> tuple[float, float, list[TraceEntry]]:
    """
    Executa n_init avaliações Sobol e n_iters passos BO contra o objetivo.

    Args:
        objective: recebe x e devolve os tempos τ_ℓ das L execuções (ou o total)
        config: configuração do otimizador

    Returns:
        (melhor x, melhor total observado, trace com todas as avaliações)

    Raises:
        ObjectiveError: o objetivo falhou; a exceção carrega o trace parcial.
    """
    observations: list[Observation] = []
    trace: list[TraceEntry] = []
    for t in range(config.n_init + config.n_iters):
        x = bo_step(observations, config)
        try:
            obs = Observation.from_times(x, objective(x))
        except Exception as e:
            logger.error(f"Objetivo falhou em x={x:.6f} (t={t}): {e}")
            raise ObjectiveError(f"Objetivo falhou em x={x!r}: {e}", trace) from e
        observations.append(obs)
        trace.append(TraceEntry(t, obs.x, obs.theta, obs.total))

    best = min(trace, key=lambda entry: entry.total)
    logger.info(f"Laço fechado concluído: melhor x={best.x:.6f}, total={best.total:.6g}")
    return best.x, best.total, trace


def best_so_far(totals: Sequence[float]) -> list[float]:
    """Incumbente (mínimo acumulado) ao longo das iterações."""
    return np.minimum.accumulate(np.asarray(totals, dtype=float)).tolist() if len(totals) else []


def posterior_mean_argmin(observations: Sequence[Observation], config: BOConfig) -> float:
    """x que minimiza a média posterior de T_total (hiperparâmetros na mediana das amostras)."""
    base = build_surrogate(observations, config)
    samples = sample_hyperparams(
        base.train, base.kernel, config.hp_samples,
        seed=int(_seed_for(config, len(observations)).generate_state(1)[0]),
        burn_in=config.burn_in, thin=config.thin,
    )
    try:
        surrogate = base.with_hyperparams(median_hyperparams(samples))
    except IllConditionedError:
        surrogate = base
    grid = _unit_grid(VALIDATION_GRID_SIZE)
    mean, _ = predict_total_many(surrogate, grid)
    return float(grid[int(np.argmin(mean))])
