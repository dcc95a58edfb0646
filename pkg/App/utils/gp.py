"""
Regressão por processo gaussiano: kernels Matérn 5/2 e exponencialmente
decrescente, kernel soma, média/variância preditivas exatas via Cholesky,
log-verossimilhança marginal e amostragem MCMC dos hiperparâmetros.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence
import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from sklearn.gaussian_process.kernels import Matern

from .constants import DEFAULT_BURN_IN, DEFAULT_THIN, JITTER_BASE, JITTER_GROWTH, JITTER_MAX
from .exceptions import IllConditionedError, InvalidParameterError
from .logger import get_logger

logger = get_logger(__name__)

KERNEL_MATERN = "matern"
KERNEL_SUM = "matern_plus_exp"
KERNELS = (KERNEL_MATERN, KERNEL_SUM)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Hyperparams:
    """
    Hiperparâmetros φ do GP.

    `noise_sigma_eps` = 0 representa o modelo sem ruído (apenas jitter);
    as amostras do MCMC são sempre estritamente positivas.
    """

    mean_mu: float = 0.0
    noise_sigma_eps: float = 1.0
    matern_sigma2: float = 1.0
    matern_rho2: float = 1.0
    exp_alpha: float = 1.0
    exp_beta: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean_mu):
            raise InvalidParameterError("mean_mu deve ser finito")
        if not math.isfinite(self.noise_sigma_eps) or self.noise_sigma_eps < 0:
            raise InvalidParameterError(f"noise_sigma_eps deve ser >= 0, recebido {self.noise_sigma_eps!r}")
        for name in ("matern_sigma2", "matern_rho2", "exp_alpha", "exp_beta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise InvalidParameterError(f"{name} deve ser > 0, recebido {value!r}")


@dataclass(frozen=True)
class Normalization:
    """Registro da padronização dos alvos: y_std = (y − offset) / scale."""

    offset: float = 0.0
    scale: float = 1.0


@dataclass(frozen=True)
class TrainingSet:
    """Pontos de treino (x ou (x, ℓ)) e tempos observados em segundos."""

    inputs: np.ndarray
    targets: np.ndarray
    normalization: Normalization = Normalization()

    @classmethod
    def create(cls, inputs: Sequence, targets: Sequence[float], standardize: bool = True) -> "TrainingSet":
        """
        Monta o conjunto de treino.

        Args:
            inputs: lista de x (GP simples) ou de pares (x, ℓ) (GP com localidade)
            targets: tempos observados
            standardize: padroniza os alvos para média zero e variância unitária

        Raises:
            InvalidParameterError: conjunto vazio, tamanhos diferentes ou pontos fora do domínio.
        """
        x = np.asarray(inputs, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(targets, dtype=float).ravel()
        if x.shape[0] < 1:
            raise InvalidParameterError("TrainingSet precisa de pelo menos um ponto")
        if x.shape[0] != y.shape[0]:
            raise InvalidParameterError(f"inputs ({x.shape[0]}) e targets ({y.shape[0]}) com tamanhos diferentes")
        if x.shape[1] not in (1, 2):
            raise InvalidParameterError("inputs devem ser x ou pares (x, ℓ)")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidParameterError("inputs e targets devem ser finitos")
        if x.shape[1] == 2 and np.any(x[:, 1] < 1):
            raise InvalidParameterError("índice de execução ℓ deve ser >= 1")

        normalization = Normalization()
        if standardize:
            std = float(np.std(y))
            normalization = Normalization(float(np.mean(y)), std if std > 0 else 1.0)
        return cls(x, y, normalization)

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def standardized_targets(self) -> np.ndarray:
        return (self.targets - self.normalization.offset) / self.normalization.scale


# --- Kernels ---

def matern52_gram(a: np.ndarray, b: np.ndarray, sigma2: float, rho2: float) -> np.ndarray:
    """
    Matérn 5/2 com r = ‖a − b‖₂ / ρ² (ρ² usado diretamente como lengthscale):
    k = σ² (1 + √5 r + 5/3 r²) exp(−√5 r).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    return sigma2 * Matern(length_scale=rho2, nu=2.5)(a, b)


def matern52(a, b, sigma2: float, rho2: float) -> float:
    return float(matern52_gram(np.atleast_1d(a)[None, :], np.atleast_1d(b)[None, :], sigma2, rho2)[0, 0])


def exp_decay_gram(l_a: np.ndarray, l_b: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Kernel exponencialmente decrescente k = β^α / (ℓ + ℓ' + β)^α."""
    l_a = np.asarray(l_a, dtype=float).ravel()
    l_b = np.asarray(l_b, dtype=float).ravel()
    return np.exp(alpha * (math.log(beta) - np.log(l_a[:, None] + l_b[None, :] + beta)))


def exp_decay_kernel(l1: float, l2: float, alpha: float, beta: float) -> float:
    return float(exp_decay_gram([l1], [l2], alpha, beta)[0, 0])


def gram_matrix(a: np.ndarray, b: np.ndarray, hp: Hyperparams, kernel: str) -> np.ndarray:
    """Matriz de covariância entre dois conjuntos de pontos para o kernel escolhido."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    gram = matern52_gram(a[:, :1], b[:, :1], hp.matern_sigma2, hp.matern_rho2)
    if kernel == KERNEL_SUM:
        gram = gram + exp_decay_gram(a[:, 1], b[:, 1], hp.exp_alpha, hp.exp_beta)
    elif kernel != KERNEL_MATERN:
        raise InvalidParameterError(f"kernel desconhecido '{kernel}'")
    return gram


def sum_kernel(p1: Sequence[float], p2: Sequence[float], hp: Hyperparams) -> float:
    """matern52(x, x') + exp_decay_kernel(ℓ, ℓ') para pontos (x, ℓ)."""
    return float(gram_matrix(np.asarray([p1]), np.asarray([p2]), hp, KERNEL_SUM)[0, 0])


def _prior_diag(points: np.ndarray, hp: Hyperparams, kernel: str) -> np.ndarray:
    diag = np.full(points.shape[0], hp.matern_sigma2)
    if kernel == KERNEL_SUM:
        ell = points[:, 1]
        diag = diag + np.exp(hp.exp_alpha * (math.log(hp.exp_beta) - np.log(2.0 * ell + hp.exp_beta)))
    return diag


# --- Modelo ajustado ---

@dataclass(frozen=True)
class FittedGP:
    """GP ajustado; imutável e seguro para compartilhar entre threads."""

    kernel: str
    hp: Hyperparams
    train: TrainingSet
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float

    def predict_many(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Média e variância preditivas (unidades originais) em vários pontos."""
        q = np.asarray(queries, dtype=float)
        if q.ndim == 1:
            q = q[:, None] if self.train.inputs.shape[1] == 1 else q[None, :]
        k_star = gram_matrix(q, self.train.inputs, self.hp, self.kernel)
        mean_std = self.hp.mean_mu + k_star @ self.alpha
        v = solve_triangular(self.chol, k_star.T, lower=True, check_finite=False)
        var_std = _prior_diag(q, self.hp, self.kernel) - np.sum(v * v, axis=0)
        var_std = np.maximum(var_std, 0.0)
        norm = self.train.normalization
        return mean_std * norm.scale + norm.offset, var_std * norm.scale ** 2


def _has_duplicate_rows(points: np.ndarray) -> bool:
    return np.unique(points, axis=0).shape[0] < points.shape[0]


def gp_fit(train: TrainingSet, hp: Hyperparams, kernel: str = KERNEL_MATERN) -> FittedGP:
    """
    Ajusta o GP: monta K, fatora (K + σ_ε² I + jitter I) e resolve o sistema
    para os alvos padronizados e centrados em mean_mu.

    Raises:
        IllConditionedError: falha da fatoração após escalonar o jitter até o limite.
    """
    x = train.inputs
    gram = gram_matrix(x, x, hp, kernel)
    noise = hp.noise_sigma_eps ** 2
    if noise == 0.0 and _has_duplicate_rows(x):
        raise IllConditionedError("Entradas repetidas com σ_ε = 0: matriz de covariância singular")

    scale = float(np.trace(gram)) / train.size
    jitter = JITTER_BASE * scale
    identity = np.eye(train.size)
    while True:
        try:
            chol, _ = cho_factor(gram + (noise + jitter) * identity, lower=True, check_finite=False)
            break
        except LinAlgError:
            jitter *= JITTER_GROWTH
            if jitter > JITTER_MAX * scale * (1.0 + 1e-9):
                raise IllConditionedError(
                    f"Fatoração de Cholesky falhou com jitter até {JITTER_MAX:g}·tr(K)/t (t={train.size})"
                )
            logger.debug(f"Cholesky falhou; aumentando jitter para {jitter:.3e}")

    chol = np.tril(chol)
    y = train.standardized_targets - hp.mean_mu
    alpha = cho_solve((chol, True), y, check_finite=False)
    return FittedGP(kernel, hp, train, chol, alpha, jitter)


def gp_predict(model: FittedGP, query) -> tuple[float, float]:
    """Média μ(θ|D) e variância σ²(θ|D) em um ponto (variância >= 0)."""
    point = np.atleast_1d(np.asarray(query, dtype=float))[None, :]
    mean, var = model.predict_many(point)
    return float(mean[0]), float(var[0])


def log_marginal_likelihood(train: TrainingSet, hp: Hyperparams, kernel: str = KERNEL_MATERN) -> float:
    """
    Log-evidência gaussiana nos alvos padronizados e centrados:
    −½ yᵀ(K + σ_ε² I)⁻¹ y − ½ log det(K + σ_ε² I) − (t/2) log 2π.
    """
    model = gp_fit(train, hp, kernel)
    y = train.standardized_targets - hp.mean_mu
    return float(
        -0.5 * y @ model.alpha
        - np.sum(np.log(np.diag(model.chol)))
        - 0.5 * train.size * _LOG_2PI
    )


# --- Marginalização dos hiperparâmetros ---

def _pack(hp: Hyperparams, kernel: str) -> np.ndarray:
    values = [hp.mean_mu, math.log(hp.noise_sigma_eps), 0.5 * math.log(hp.matern_sigma2), math.log(hp.matern_rho2)]
    if kernel == KERNEL_SUM:
        values += [math.log(hp.exp_alpha), math.log(hp.exp_beta)]
    return np.asarray(values)


def _unpack(z: np.ndarray, kernel: str) -> Hyperparams:
    hp = Hyperparams(
        mean_mu=float(z[0]),
        noise_sigma_eps=float(math.exp(z[1])),
        matern_sigma2=float(math.exp(2.0 * z[2])),
        matern_rho2=float(math.exp(z[3])),
    )
    if kernel == KERNEL_SUM:
        hp = replace(hp, exp_alpha=float(math.exp(z[4])), exp_beta=float(math.exp(z[5])))
    return hp


def prior_median(kernel: str = KERNEL_MATERN) -> Hyperparams:
    """
    Mediana a priori: média em 0 e todas as escalas em 1.

    Raises:
        InvalidParameterError: kernel desconhecido.
    """
    if kernel not in KERNELS:
        raise InvalidParameterError(f"kernel desconhecido '{kernel}'")
    return Hyperparams()


def log_prior(z: np.ndarray) -> float:
    """
    Log-densidade a priori no espaço transformado: normal(0, 1) em mean_mu e
    log-normal(0, 1) em σ_ε, σ, ρ², α, β (normal(0, 1) nos logaritmos).
    """
    return float(-0.5 * np.sum(z * z))


def log_posterior(z: np.ndarray, train: TrainingSet, kernel: str) -> float:
    try:
        hp = _unpack(z, kernel)
        return log_marginal_likelihood(train, hp, kernel) + log_prior(z)
    except (IllConditionedError, InvalidParameterError, OverflowError, ValueError):
        return -math.inf


def sample_hyperparams(
    train: TrainingSet,
    kernel: str = KERNEL_MATERN,
    n_samples: int = 10,
    seed: int | None = 0,
    burn_in: int = DEFAULT_BURN_IN,
    thin: int = DEFAULT_THIN,
) -> list[Hyperparams]:
    """
    Amostra φ ~ p(φ|D) ∝ p(D|φ) p(φ) com Metropolis random-walk adaptativo no
    espaço log dos hiperparâmetros positivos.

    Args:
        train: conjunto de treino
        kernel: KERNEL_MATERN ou KERNEL_SUM
        n_samples: número de amostras após o burn-in
        seed: semente (mesma semente, mesma lista)
        burn_in: passos descartados, durante os quais o passo da proposta é adaptado
        thin: passos entre amostras retidas

    Returns:
        Lista de Hyperparams com componentes positivos
    """
    if n_samples < 1:
        raise InvalidParameterError(f"n_samples deve ser >= 1, recebido {n_samples}")
    rng = np.random.default_rng(seed)
    z = _pack(prior_median(kernel), kernel)
    current = log_posterior(z, train, kernel)
    step = np.full(z.shape, 0.5)

    accepted = 0
    window = 50
    samples: list[Hyperparams] = []
    total_steps = burn_in + n_samples * thin
    for i in range(total_steps):
        proposal = z + step * rng.standard_normal(z.shape)
        candidate = log_posterior(proposal, train, kernel)
        if math.log(rng.uniform()) < candidate - current:
            z, current = proposal, candidate
            accepted += 1

        if i < burn_in and (i + 1) % window == 0:
            rate = accepted / window
            # Adapta a escala para uma taxa de aceitação em torno de 0.25
            step *= math.exp(2.0 * (rate - 0.25))
            accepted = 0
        if i >= burn_in and (i - burn_in + 1) % thin == 0:
            samples.append(_unpack(z, kernel))

    logger.debug(f"MCMC concluído: {len(samples)} amostras, passo final {np.round(step, 3).tolist()}")
    return samples


def median_hyperparams(samples: Sequence[Hyperparams]) -> Hyperparams:
    """Mediana componente a componente de uma lista de amostras."""
    if not samples:
        raise InvalidParameterError("lista de amostras vazia")
    return Hyperparams(
        mean_mu=float(np.median([s.mean_mu for s in samples])),
        noise_sigma_eps=float(np.median([s.noise_sigma_eps for s in samples])),
        matern_sigma2=float(np.median([s.matern_sigma2 for s in samples])),
        matern_rho2=float(np.median([s.matern_rho2 for s in samples])),
        exp_alpha=float(np.median([s.exp_alpha for s in samples])),
        exp_beta=float(np.median([s.exp_beta for s in samples])),
    )
