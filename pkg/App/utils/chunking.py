"""
Políticas de tamanho de chunk para laços auto-escalonados.

Cada política é uma máquina de estados pura e determinística: dado o tamanho
do laço N, o número de workers P e os parâmetros da política, ela dispensa a
sequência de tamanhos de chunk que o algoritmo de escalonamento produziria.
Não há acesso a relógio nem a threads aqui; o runtime serializa o acesso às
políticas atrás do lock do dispensador.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterator
import math

from .constants import POLICY_GRAMMAR, TAPER3_KMIN, TAPER3_VALPHA
from .exceptions import ConfigurationError, DegenerateInputError, InvalidParameterError
from .logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class LoopShape:
    """Tamanho do laço (N tarefas) e número de workers (P)."""

    n: int
    p: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise InvalidParameterError(f"N deve ser um inteiro >= 1, recebido {self.n!r}")
        if isinstance(self.p, bool) or not isinstance(self.p, int) or self.p < 1:
            raise InvalidParameterError(f"P deve ser um inteiro >= 1, recebido {self.p!r}")


@dataclass(frozen=True)
class TaskStats:
    """Estatísticas das tarefas: média μ, desvio σ e overhead por dequeue h (segundos)."""

    mu: float
    sigma: float
    h: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu) or self.mu <= 0:
            raise InvalidParameterError(f"mu deve ser > 0, recebido {self.mu!r}")
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise InvalidParameterError(f"sigma deve ser >= 0, recebido {self.sigma!r}")
        if not math.isfinite(self.h) or self.h < 0:
            raise InvalidParameterError(f"h deve ser >= 0, recebido {self.h!r}")


def _clamp(value: int, low: int, high: int) -> int:
    return max(low, min(value, high))


def _round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


class ChunkPolicy(ABC):
    """
    Gerador de tamanhos de chunk para uma execução do laço.

    Invariantes: R decresce estritamente a cada dequeue até 0 e todo chunk
    dispensado satisfaz 1 <= K <= R no momento do dispense.
    """

    name: str = "abstract"

    def __init__(self, shape: LoopShape):
        self.shape = shape
        self.remaining = shape.n
        self.dispensed = 0

    @property
    def exhausted(self) -> bool:
        return self.remaining == 0

    @property
    def theta(self) -> float | None:
        """Parâmetro FSS em vigor (None para políticas que não o usam)."""
        return None

    @abstractmethod
    def _propose(self) -> int:
        """Tamanho desejado para o próximo chunk, antes do clamp em [1, R]."""

    def next_chunk(self) -> int:
        """
        Dispensa o próximo chunk.

        Returns:
            Tamanho do chunk, ou 0 quando o laço já foi esgotado.
        """
        if self.remaining == 0:
            return 0
        size = _clamp(int(self._propose()), 1, self.remaining)
        self.remaining -= size
        self.dispensed += 1
        return size

    def __iter__(self) -> Iterator[int]:
        while self.remaining > 0:
            yield self.next_chunk()

    def drain(self) -> list[int]:
        """Consome a política inteira e devolve a sequência de chunks."""
        return list(self)


class StaticPolicy(ChunkPolicy):
    """STATIC: P chunks com tamanhos que diferem no máximo em 1."""

    name = "static"

    def __init__(self, shape: LoopShape):
        super().__init__(shape)
        base, extra = divmod(shape.n, shape.p)
        # Com P > N os chunks de tamanho zero são descartados
        self._plan = [base + 1 if i < extra else base for i in range(shape.p)]
        self._plan = [size for size in self._plan if size > 0]
        self._cursor = 0

    def _propose(self) -> int:
        size = self._plan[self._cursor]
        self._cursor += 1
        return size


class SelfSchedulingPolicy(ChunkPolicy):
    """SS: uma tarefa por dequeue."""

    name = "ss"

    def _propose(self) -> int:
        return 1


class ConstantChunkPolicy(ChunkPolicy):
    """CSS(K): chunks de tamanho constante K até o esgotamento."""

    name = "css"

    def __init__(self, shape: LoopShape, chunk_size: int):
        super().__init__(shape)
        if chunk_size < 1:
            raise InvalidParameterError(f"K do CSS deve ser >= 1, recebido {chunk_size}")
        self.chunk_size = int(chunk_size)

    def _propose(self) -> int:
        return self.chunk_size


class GuidedPolicy(ChunkPolicy):
    """GUIDED: K_i = ceil(R_i / P) a cada dequeue."""

    name = "guided"

    def _propose(self) -> int:
        return -(-self.remaining // self.shape.p)


class BatchedPolicy(ChunkPolicy):
    """
    Base das políticas de fatoração: o tamanho K_i é recalculado só depois
    que os P chunks do lote corrente foram dispensados (ou R chegou a 0).
    """

    def __init__(self, shape: LoopShape):
        super().__init__(shape)
        self.batch_index = 0
        self.batch_sizes: list[int] = []
        self._left_in_batch = 0
        self._batch_size = 0

    @abstractmethod
    def _batch_chunk(self, remaining: int, batch_index: int) -> float:
        """Tamanho real K_i do lote i para R_i restantes."""

    def _propose(self) -> int:
        if self._left_in_batch == 0:
            k_real = self._batch_chunk(self.remaining, self.batch_index)
            self._batch_size = _clamp(math.ceil(k_real), 1, self.remaining)
            self.batch_sizes.append(self._batch_size)
            self._left_in_batch = self.shape.p
            self.batch_index += 1
        self._left_in_batch -= 1
        return self._batch_size


def fss_batch_divisor(remaining: int, workers: int, theta: float, batch_index: int) -> float:
    """
    Calcula x_i da recorrência FSS.

    b_i = P θ / (2 √R_i); x_0 = 1 + b_0² + b_0 √(b_0² + 4) e
    x_i = 2 + b_i² + b_i √(b_i² + 4) para i >= 1.
    """
    b = workers * theta / (2.0 * math.sqrt(remaining))
    head = 1.0 if batch_index == 0 else 2.0
    return head + b * b + b * math.sqrt(b * b + 4.0)


class FactoringPolicy(BatchedPolicy):
    """FSS(θ): fatoração com K_i = R_i / (x_i P)."""

    name = "fss"

    def __init__(self, shape: LoopShape, theta: float):
        theta = float(theta)
        if not math.isfinite(theta) or theta < 0:
            raise InvalidParameterError(f"θ deve ser finito e >= 0, recebido {theta!r}")
        super().__init__(shape)
        self._theta = theta

    @property
    def theta(self) -> float:
        return self._theta

    def _batch_chunk(self, remaining: int, batch_index: int) -> float:
        x = fss_batch_divisor(remaining, self.shape.p, self._theta, batch_index)
        return remaining / (x * self.shape.p)


class Fac2Policy(BatchedPolicy):
    """FAC2: metade do trabalho restante por lote, K_i = ceil(R_i / 2P)."""

    name = "fac2"

    def _batch_chunk(self, remaining: int, batch_index: int) -> float:
        return -(-remaining // (2 * self.shape.p))


class TrapezoidPolicy(ChunkPolicy):
    """TSS(K_f, K_l): K decresce linearmente de δ = (K_f − K_l)/(N − 1) por dequeue."""

    name = "tss"

    def __init__(self, shape: LoopShape, k_first: float, k_last: float):
        super().__init__(shape)
        k_first, k_last = float(k_first), float(k_last)
        if not (math.isfinite(k_first) and math.isfinite(k_last)):
            raise InvalidParameterError("K_f e K_l devem ser finitos")
        if k_last < 1:
            raise InvalidParameterError(f"K_l deve ser >= 1, recebido {k_last}")
        if k_first < k_last:
            raise InvalidParameterError(f"K_f ({k_first}) < K_l ({k_last})")
        self.k_first = k_first
        self.k_last = k_last
        # N = 1 dispensa um único chunk; δ = 0 evita a divisão por zero
        self.delta = (k_first - k_last) / (shape.n - 1) if shape.n > 1 else 0.0
        self._current = k_first

    @classmethod
    def trap1(cls, shape: LoopShape) -> "TrapezoidPolicy":
        """TRAP1: K_f = N / (2P), K_l = 1."""
        return cls(shape, max(shape.n / (2.0 * shape.p), 1.0), 1.0)

    def _propose(self) -> int:
        size = _round_half_up(self._current)
        self._current = max(self._current - self.delta, self.k_last)
        return size


class TaperPolicy(ChunkPolicy):
    """
    TAPER(v_α, K_min): x_i = R_i/P + K_min/2 e
    K_i = max(K_min, floor(x_i + v_α²/2 − v_α √(2 x_i + v_α²/4))).
    R é atualizado por chunk, não por lote.
    """

    name = "taper"

    def __init__(self, shape: LoopShape, v_alpha: float, k_min: int = 1):
        super().__init__(shape)
        v_alpha = float(v_alpha)
        if not math.isfinite(v_alpha) or v_alpha < 0:
            raise InvalidParameterError(f"v_α deve ser finito e >= 0, recebido {v_alpha!r}")
        if int(k_min) != k_min or k_min < 1:
            raise InvalidParameterError(f"K_min deve ser um inteiro >= 1, recebido {k_min!r}")
        self.v_alpha = v_alpha
        self.k_min = int(k_min)

    @classmethod
    def taper3(cls, shape: LoopShape) -> "TaperPolicy":
        """TAPER3: v_α = 3 fixo, independente de σ/μ."""
        return cls(shape, TAPER3_VALPHA, TAPER3_KMIN)

    @classmethod
    def from_stats(cls, shape: LoopShape, stats: TaskStats, alpha: float, k_min: int = 1) -> "TaperPolicy":
        """TAPER com v_α = α σ / μ a partir das estatísticas medidas."""
        if not math.isfinite(alpha) or alpha < 0:
            raise InvalidParameterError(f"α deve ser finito e >= 0, recebido {alpha!r}")
        return cls(shape, alpha * stats.sigma / stats.mu, k_min)

    def _propose(self) -> int:
        v = self.v_alpha
        x = self.remaining / self.shape.p + self.k_min / 2.0
        size = math.floor(x + v * v / 2.0 - v * math.sqrt(2.0 * x + v * v / 4.0))
        return max(self.k_min, size)


# --- Sequências puras ---

def fss_chunk_sequence(shape: LoopShape, theta: float) -> list[int]:
    """
    Sequência de chunks do FSS com parâmetro θ.

    Raises:
        InvalidParameterError: θ não finito ou negativo.
    """
    return FactoringPolicy(shape, theta).drain()


def fac2_chunk_sequence(shape: LoopShape) -> list[int]:
    return Fac2Policy(shape).drain()


def css_chunk_size(shape: LoopShape, stats: TaskStats) -> int:
    """
    Tamanho ótimo do chunk constante (CSS):
    K = ((h/σ) · √2 · N / (P · √(ln P)))^(2/3), arredondado e limitado a [1, N].

    Raises:
        DegenerateInputError: σ = 0 ou P = 1 (fórmula indefinida); o chamador
            escolhe o fallback (tipicamente STATIC).
    """
    if stats.sigma == 0:
        raise DegenerateInputError("CSS indefinido com sigma = 0; use STATIC")
    if shape.p == 1:
        raise DegenerateInputError("CSS indefinido com P = 1 (ln P = 0); use STATIC")
    base = (stats.h / stats.sigma) * math.sqrt(2.0) * shape.n / (shape.p * math.sqrt(math.log(shape.p)))
    k = base ** (2.0 / 3.0)
    if not math.isfinite(k):
        return shape.n
    return _clamp(_round_half_up(k), 1, shape.n)


def css_chunk_sequence(shape: LoopShape, stats: TaskStats) -> list[int]:
    return ConstantChunkPolicy(shape, css_chunk_size(shape, stats)).drain()


def tss_chunk_sequence(shape: LoopShape, k_first: float, k_last: float) -> list[int]:
    return TrapezoidPolicy(shape, k_first, k_last).drain()


def trap1_chunk_sequence(shape: LoopShape) -> list[int]:
    return TrapezoidPolicy.trap1(shape).drain()


def taper_chunk_sequence(shape: LoopShape, stats: TaskStats, alpha: float, k_min: int = 1) -> list[int]:
    return TaperPolicy.from_stats(shape, stats, alpha, k_min).drain()


def taper3_chunk_sequence(shape: LoopShape) -> list[int]:
    return TaperPolicy.taper3(shape).drain()


def guided_chunk_sequence(shape: LoopShape) -> list[int]:
    return GuidedPolicy(shape).drain()


def static_chunk_sequence(shape: LoopShape) -> list[int]:
    return StaticPolicy(shape).drain()


def ss_chunk_sequence(shape: LoopShape) -> list[int]:
    return SelfSchedulingPolicy(shape).drain()


def fss_analytic_theta(stats: TaskStats) -> float:
    """Parâmetro analítico do FSS, θ = σ / μ."""
    return stats.sigma / stats.mu


# --- Seleção de política por string ---

# Mapeamento variante -> construtor (recebe o LoopShape e os parâmetros numéricos)
POLICY_MAPPING: dict[str, Callable[..., ChunkPolicy]] = {
    "static": StaticPolicy,
    "ss": SelfSchedulingPolicy,
    "css": lambda shape, k: ConstantChunkPolicy(shape, int(k)),
    "guided": GuidedPolicy,
    "fss": FactoringPolicy,
    "fac2": Fac2Policy,
    "trap1": TrapezoidPolicy.trap1,
    "taper3": TaperPolicy.taper3,
    "tss": TrapezoidPolicy,
    "taper": lambda shape, v_alpha, k_min: TaperPolicy(shape, v_alpha, int(k_min)),
}

# Quantidade de parâmetros numéricos esperada por variante
_POLICY_ARITY: dict[str, int] = {
    "static": 0, "ss": 0, "css": 1, "guided": 0, "fss": 1, "fac2": 0,
    "trap1": 0, "taper3": 0, "tss": 2, "taper": 2, "bo_fss": 0,
}


@dataclass(frozen=True)
class PolicySpec:
    """
    Descrição serializável de uma política (variante + parâmetros).

    `x` guarda o parâmetro no intervalo unitário quando a política veio do
    tuner (bo_fss resolvido); `build` cria um estado novo por execução.
    """

    variant: str
    params: tuple[float, ...] = ()
    x: float | None = None

    @property
    def theta(self) -> float | None:
        return float(self.params[0]) if self.variant == "fss" else None

    def build(self, shape: LoopShape) -> ChunkPolicy:
        if self.variant == "bo_fss":
            raise ConfigurationError("bo_fss precisa ser resolvido para fss:<theta> antes da execução")
        return POLICY_MAPPING[self.variant](shape, *self.params)

    def label(self) -> str:
        if not self.params:
            return self.variant
        return f"{self.variant}:" + ",".join(f"{p:g}" for p in self.params)


def _grammar_error(text: str, reason: str) -> ConfigurationError:
    return ConfigurationError(f"Política inválida '{text}': {reason}. Formas aceitas: {POLICY_GRAMMAR}")


def parse_policy_spec(text: str) -> PolicySpec:
    """
    Converte uma string da gramática de políticas em PolicySpec.

    Args:
        text: ex. "fss:0.5", "tss:125,1", "fac2"

    Returns:
        PolicySpec validado

    Raises:
        ConfigurationError: string fora da gramática ou parâmetros inválidos.
    """
    raw = text.strip().lower()
    variant, _, arg_text = raw.partition(":")
    if variant not in _POLICY_ARITY:
        raise _grammar_error(text, f"variante desconhecida '{variant}'")

    args = [a.strip() for a in arg_text.split(",")] if arg_text else []
    if len(args) != _POLICY_ARITY[variant]:
        raise _grammar_error(text, f"'{variant}' espera {_POLICY_ARITY[variant]} parâmetro(s)")
    try:
        params = tuple(float(a) for a in args)
    except ValueError:
        raise _grammar_error(text, "parâmetro não numérico")
    if any(not math.isfinite(p) for p in params):
        raise _grammar_error(text, "parâmetro não finito")

    if variant == "fss" and params[0] < 0:
        raise _grammar_error(text, "θ deve ser >= 0")
    if variant == "css" and (params[0] < 1 or params[0] != int(params[0])):
        raise _grammar_error(text, "K deve ser um inteiro >= 1")
    if variant == "tss" and not (params[0] >= params[1] >= 1):
        raise _grammar_error(text, "exige K_f >= K_l >= 1")
    if variant == "taper" and (params[0] < 0 or params[1] < 1 or params[1] != int(params[1])):
        raise _grammar_error(text, "exige v_α >= 0 e K_min inteiro >= 1")

    return PolicySpec(variant, params)
