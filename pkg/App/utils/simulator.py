"""
Simulador determinístico, em tempo virtual, de laços auto-escalonados.

Dadas as durações das tarefas, P workers, o overhead h por dequeue e o
multiplicador de localidade g(ℓ), calcula o makespan de qualquer sequência
de chunks com despacho guloso (cada chunk vai para o worker que termina
primeiro; empate fica com o menor índice).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence
import heapq
import json
import math

import numpy as np

from .bo import reparam
from .chunking import LoopShape, PolicySpec, TaskStats, parse_policy_spec
from .constants import BRUTE_FORCE_GRID_SIZE
from .exceptions import ContractViolationError, InvalidParameterError
from .logger import get_logger

logger = get_logger(__name__)

MIN_EXECUTION_TIME = 1e-9


@dataclass(frozen=True)
class LocalityModel:
    """g(ℓ) = 1 + c·exp(−λ(ℓ − 1)): g >= 1 e não crescente em ℓ."""

    c: float = 0.0
    lam: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.c) or self.c < 0:
            raise InvalidParameterError(f"c deve ser >= 0, recebido {self.c!r}")
        if not math.isfinite(self.lam) or self.lam <= 0:
            raise InvalidParameterError(f"lambda deve ser > 0, recebido {self.lam!r}")

    def multiplier(self, ell: int) -> float:
        return 1.0 + self.c * math.exp(-self.lam * (ell - 1))


class WorkloadKind(str, Enum):
    HOMOGENEOUS = "homogeneous"
    GAUSSIAN = "gaussian"
    LOGNORMAL = "lognormal"
    POWERLAW = "powerlaw"


# Parâmetros obrigatórios por tipo de carga
_KIND_PARAMS: dict[WorkloadKind, tuple[str, ...]] = {
    WorkloadKind.HOMOGENEOUS: ("mu",),
    WorkloadKind.GAUSSIAN: ("mu", "sigma"),
    WorkloadKind.LOGNORMAL: ("mu", "sigma"),
    WorkloadKind.POWERLAW: ("exponent", "scale"),
}


@dataclass(frozen=True, eq=False)
class SyntheticWorkload:
    """Entrada do simulador: durações T_i, P, h, modelo de localidade e L execuções."""

    durations: np.ndarray
    p: int
    h: float = 0.0
    locality: LocalityModel = field(default_factory=LocalityModel)
    n_executions: int = 1

    def __post_init__(self) -> None:
        durations = np.asarray(self.durations, dtype=float).ravel()
        if durations.size < 1:
            raise InvalidParameterError("a carga precisa de pelo menos uma tarefa")
        if not np.all(np.isfinite(durations)) or np.any(durations < 0):
            raise InvalidParameterError("durações devem ser finitas e >= 0")
        if not math.isfinite(self.h) or self.h < 0:
            raise InvalidParameterError(f"h deve ser >= 0, recebido {self.h!r}")
        if self.n_executions < 1:
            raise InvalidParameterError(f"L deve ser >= 1, recebido {self.n_executions}")
        LoopShape(int(durations.size), self.p)
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "_prefix", np.concatenate([[0.0], np.cumsum(durations)]))

    @property
    def n(self) -> int:
        return int(self.durations.size)

    @property
    def shape(self) -> LoopShape:
        return LoopShape(self.n, self.p)

    def chunk_work(self, start: int, stop: int) -> float:
        """Σ T_i para i em [start, stop)."""
        return float(self._prefix[stop] - self._prefix[start])

    def task_stats(self) -> TaskStats:
        """μ, σ e h da carga (para o θ analítico do FSS)."""
        return TaskStats(float(np.mean(self.durations)), float(np.std(self.durations)), self.h)


@dataclass(frozen=True)
class WorkloadSpec:
    """Arquivo JSON de carga: {kind, params, N, P, h, L, locality: {c, lambda}, seed}."""

    kind: WorkloadKind
    params: dict
    n: int
    p: int
    h: float = 0.0
    n_executions: int = 1
    locality: LocalityModel = field(default_factory=LocalityModel)
    seed: int = 0
    noise_sigma: float = 0.0

    @classmethod
    def from_dict(cls, payload: dict) -> "WorkloadSpec":
        if not isinstance(payload, dict):
            raise InvalidParameterError("especificação de carga deve ser um objeto JSON")
        try:
            kind = WorkloadKind(payload["kind"])
            locality = payload.get("locality") or {}
            return cls(
                kind=kind,
                params=dict(payload.get("params") or {}),
                n=int(payload["N"]),
                p=int(payload["P"]),
                h=float(payload.get("h", 0.0)),
                n_executions=int(payload.get("L", 1)),
                locality=LocalityModel(float(locality.get("c", 0.0)), float(locality.get("lambda", 1.0))),
                seed=int(payload.get("seed", 0)),
                noise_sigma=float(payload.get("noise_sigma", 0.0)),
            )
        except KeyError as e:
            raise InvalidParameterError(f"campo obrigatório ausente na especificação de carga: {e}")
        except (TypeError, ValueError) as e:
            raise InvalidParameterError(f"especificação de carga inválida: {e}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "params": self.params,
            "N": self.n,
            "P": self.p,
            "h": self.h,
            "L": self.n_executions,
            "locality": {"c": self.locality.c, "lambda": self.locality.lam},
            "seed": self.seed,
            "noise_sigma": self.noise_sigma,
        }


def load_workload_spec(path: str | Path) -> WorkloadSpec:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidParameterError(f"Não foi possível ler a especificação de carga {path}: {e}")
    return WorkloadSpec.from_dict(payload)


def generate_durations(kind: WorkloadKind | str, params: dict, n: int, seed: int | None = 0) -> np.ndarray:
    """
    Gera N durações de tarefa.

    Args:
        kind: homogeneous(mu), gaussian(mu, sigma), lognormal(mu, sigma) ou powerlaw(exponent, scale)
        params: parâmetros do tipo (mu/sigma são média e desvio das durações geradas)
        n: número de tarefas
        seed: semente do gerador

    Returns:
        Vetor de durações finitas e >= 0
    """
    kind = WorkloadKind(kind)
    missing = [name for name in _KIND_PARAMS[kind] if name not in params]
    if missing:
        raise InvalidParameterError(f"parâmetros ausentes para '{kind.value}': {missing}")
    rng = np.random.default_rng(seed)

    if kind is WorkloadKind.HOMOGENEOUS:
        return np.full(n, float(params["mu"]))
    if kind is WorkloadKind.GAUSSIAN:
        return np.maximum(rng.normal(params["mu"], params["sigma"], n), 0.0)
    if kind is WorkloadKind.LOGNORMAL:
        mu, sigma = float(params["mu"]), float(params["sigma"])
        if mu <= 0:
            raise InvalidParameterError("lognormal exige mu > 0")
        s2 = math.log1p((sigma / mu) ** 2)
        return rng.lognormal(math.log(mu) - s2 / 2.0, math.sqrt(s2), n)
    exponent, scale = float(params["exponent"]), float(params["scale"])
    if exponent <= 0 or scale <= 0:
        raise InvalidParameterError("powerlaw exige exponent > 0 e scale > 0")
    return scale * (1.0 + rng.pareto(exponent, n))


def generate_workload(spec: WorkloadSpec) -> SyntheticWorkload:
    durations = generate_durations(spec.kind, spec.params, spec.n, spec.seed)
    return SyntheticWorkload(durations, spec.p, spec.h, spec.locality, spec.n_executions)


# --- Simulação ---

@dataclass(frozen=True)
class SimulationResult:
    makespan: float
    finish_times: tuple[float, ...]
    busy_times: tuple[float, ...]
    n_chunks: int


def _validate_chunks(workload: SyntheticWorkload, chunks: Sequence[int]) -> None:
    if any(int(k) != k or k < 1 for k in chunks):
        raise ContractViolationError("todo chunk deve ser um inteiro >= 1")
    total = sum(int(k) for k in chunks)
    if total != workload.n:
        raise ContractViolationError(f"soma dos chunks ({total}) difere de N ({workload.n})")


def simulate_schedule(workload: SyntheticWorkload, chunks: Sequence[int], ell: int = 1) -> SimulationResult:
    """
    Simula uma execução ℓ com despacho guloso.

    Cada dispense vai ao worker com menor tempo de término; o worker paga h e
    depois g(ℓ)·Σ T_i sobre os índices contíguos do chunk.

    Raises:
        ContractViolationError: soma dos chunks != N ou ℓ fora de [1, L].
    """
    _validate_chunks(workload, chunks)
    if not (1 <= ell <= workload.n_executions):
        raise ContractViolationError(f"ℓ={ell} fora de [1, {workload.n_executions}]")
    g = workload.locality.multiplier(ell)

    heap = [(0.0, w) for w in range(workload.p)]
    finish = [0.0] * workload.p
    busy = [0.0] * workload.p
    start = 0
    for size in chunks:
        ready, worker = heapq.heappop(heap)
        cost = workload.h + g * workload.chunk_work(start, start + int(size))
        start += int(size)
        finish[worker] = ready + cost
        busy[worker] += cost
        heapq.heappush(heap, (finish[worker], worker))
    return SimulationResult(max(finish), tuple(finish), tuple(busy), len(chunks))


def simulate_makespan(workload: SyntheticWorkload, chunks: Sequence[int], ell: int = 1) -> float:
    return simulate_schedule(workload, chunks, ell).makespan


def _as_policy_spec(policy: PolicySpec | str | float) -> PolicySpec:
    if isinstance(policy, PolicySpec):
        return policy
    if isinstance(policy, str):
        return parse_policy_spec(policy)
    return PolicySpec("fss", (float(policy),))


def policy_chunks(workload: SyntheticWorkload, policy: PolicySpec | str | float) -> list[int]:
    """Sequência de chunks da política (θ numérico significa FSS(θ))."""
    return _as_policy_spec(policy).build(workload.shape).drain()


def simulate_executions(
    workload: SyntheticWorkload,
    policy: PolicySpec | str | float,
    noise_sigma: float = 0.0,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
) -> list[float]:
    """
    Tempos τ_ℓ das L execuções da mesma política.

    Com `noise_sigma` > 0, cada execução recebe ruído N(0, σ²/L), de modo que o
    total tem ruído N(0, σ²); tempos ficam limitados a >= 1e-9.
    """
    chunks = policy_chunks(workload, policy)
    times = [simulate_makespan(workload, chunks, ell) for ell in range(1, workload.n_executions + 1)]
    if noise_sigma > 0:
        rng = rng or np.random.default_rng(seed)
        noise = rng.normal(0.0, noise_sigma / math.sqrt(workload.n_executions), len(times))
        times = [max(t + e, MIN_EXECUTION_TIME) for t, e in zip(times, noise)]
    return times


def simulate_total_time(
    workload: SyntheticWorkload,
    policy: PolicySpec | str | float,
    noise_sigma: float = 0.0,
    seed: int | None = None,
) -> float:
    """T_total = Σ_{ℓ=1..L} makespan(ℓ) (+ ruído opcional com semente explícita)."""
    return math.fsum(simulate_executions(workload, policy, noise_sigma, seed))


def make_objective(
    workload: SyntheticWorkload,
    noise_sigma: float = 0.0,
    seed: int | None = 0,
) -> Callable[[float], list[float]]:
    """Objetivo do BO sobre x: devolve os τ_ℓ simulados de FSS(reparam(x))."""
    rng = np.random.default_rng(seed)

    def objective(x: float) -> list[float]:
        return simulate_executions(workload, reparam(x), noise_sigma, rng=rng)

    return objective


def default_theta_grid(size: int = BRUTE_FORCE_GRID_SIZE) -> list[float]:
    """Grade de θ uniforme no espaço reparametrizado: θ(x) com x = (i + 0.5)/size."""
    return [reparam((i + 0.5) / size) for i in range(size)]


def brute_force_best_theta(workload: SyntheticWorkload, grid: Sequence[float]) -> tuple[float, float]:
    """
    Avalia T_total em toda a grade; empates ficam com o menor θ.

    Raises:
        InvalidParameterError: grade vazia.
    """
    if len(grid) == 0:
        raise InvalidParameterError("grade de θ vazia")
    best_theta, best_total = math.nan, math.inf
    for theta in sorted(float(t) for t in grid):
        total = simulate_total_time(workload, theta)
        if total < best_total:
            best_theta, best_total = theta, total
    logger.debug(f"Força bruta: θ*={best_theta:.6g}, T*={best_total:.6g} em {len(grid)} pontos")
    return best_theta, best_total
