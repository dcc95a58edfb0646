"""
Runtime multithread de laços auto-escalonados (`parallel_for`) e registro
das medições de tempo por execução de cada laço.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, wait, FIRST_EXCEPTION
from dataclasses import dataclass
from typing import Callable, Optional
import threading
import time
import uuid

from Database.models import IterationRecord
from Database.services import get_dataset_service

from .bo import reparam, sobol_init, unreparam
from .chunking import ChunkPolicy, LoopShape, PolicySpec, parse_policy_spec
from .config import SCHEDULE_ENV, get_schedule_string, get_thread_count
from .constants import DEFAULT_POLICY
from .exceptions import ConfigurationError, EmptyRangeError, InvalidParameterError, LoopExecutionError
from .logger import get_logger

logger = get_logger(__name__)

# Namespace dos UUIDs das iterações gravadas (derivados do UUID da execução do processo)
_ITERATION_NAMESPACE = uuid.UUID("6f1c3a52-9d57-4c0e-8a43-1f7d0b2e5c90")


@dataclass(frozen=True)
class LoopMeasurement:
    """Tempo de parede τ da ℓ-ésima execução de um laço."""

    loop_id: str
    ell: int
    tau: float
    theta: float | None
    x: float | None
    n_tasks: int
    policy: str
    chunks: tuple[int, ...] = ()


class MeasurementRecorder:
    """
    Buffer das medições do processo, identificado por um run UUID.

    O contador ℓ de cada laço só avança em execuções concluídas; o flush
    grava apenas o que ainda não foi gravado.
    """

    def __init__(self, run_uuid: str | None = None):
        self.run_uuid = run_uuid or str(uuid.uuid4())
        self._lock = threading.Lock()
        self._ell: dict[str, int] = {}
        self._records: list[LoopMeasurement] = []
        self._flushed = 0

    def next_ell(self, loop_id: str) -> int:
        with self._lock:
            return self._ell.get(loop_id, 0) + 1

    def record(self, measurement: LoopMeasurement) -> None:
        with self._lock:
            self._ell[measurement.loop_id] = measurement.ell
            self._records.append(measurement)

    def measurements(self, loop_id: str | None = None) -> list[LoopMeasurement]:
        with self._lock:
            return [m for m in self._records if loop_id is None or m.loop_id == loop_id]

    def pending(self) -> list[LoopMeasurement]:
        with self._lock:
            return list(self._records[self._flushed:])

    def mark_flushed(self, count: int) -> None:
        with self._lock:
            self._flushed += count


default_recorder = MeasurementRecorder()


# --- Pool de workers ---

_pool: Optional[ThreadPoolExecutor] = None
_pool_size = 0
_pool_lock = threading.Lock()


def _get_pool(workers: int) -> ThreadPoolExecutor:
    """Pool do processo, reutilizado entre execuções e ampliado sob demanda."""
    global _pool, _pool_size
    with _pool_lock:
        if _pool is None or _pool_size < workers:
            if _pool is not None:
                _pool.shutdown(wait=False)
            _pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="loopsched")
            _pool_size = workers
            logger.debug(f"Pool de workers criado com {workers} threads")
        return _pool


# --- Seleção de política ---

def resolve_policy_from_env(loop_id: str | None = None, data_dir: str | None = None) -> PolicySpec:
    """
    Lê LOOPSCHED_SCHEDULE (padrão FAC2).

    `bo_fss` vira FSS com o x sugerido pelo tuner em `<loop_id>.next.json`;
    sem sugestão ainda, usa o primeiro ponto de Sobol.

    Raises:
        ConfigurationError: valor fora da gramática de políticas.
    """
    raw = get_schedule_string()
    spec = parse_policy_spec(raw) if raw else parse_policy_spec(DEFAULT_POLICY)
    if spec.variant != "bo_fss":
        return spec

    next_param = None
    if loop_id:
        next_param = get_dataset_service(data_dir).load_next_param(loop_id)
    else:
        logger.warning(f"{SCHEDULE_ENV}=bo_fss sem loop_id; usando o primeiro ponto de Sobol.")
    x = next_param.x_next if next_param else sobol_init(1)[0]
    return PolicySpec("fss", (reparam(x),), x=x)


def _policy_x(spec: PolicySpec | None, theta: float | None) -> float | None:
    if spec is not None and spec.x is not None:
        return spec.x
    if theta is None:
        return None
    try:
        return unreparam(theta)
    except InvalidParameterError:
        return None


# --- Execução ---

def parallel_for(
    loop_id: str,
    n_tasks: int,
    body: Callable[[int], object],
    policy: PolicySpec | ChunkPolicy | str | None = None,
    workers: int | None = None,
    recorder: MeasurementRecorder | None = None,
) -> LoopMeasurement:
    """
    Executa body(i) para todo i em [0, N) com chunks dispensados pela política.

    Args:
        loop_id: identificador estável do laço
        n_tasks: N
        body: corpo do laço; chamado concorrentemente com índices disjuntos
        policy: política (padrão: LOOPSCHED_SCHEDULE)
        workers: P (padrão: LOOPSCHED_THREADS ou a concorrência do hardware)
        recorder: destino da medição (padrão: o recorder do processo)

    Returns:
        LoopMeasurement com τ medido da entrada até depois da barreira final

    Raises:
        EmptyRangeError: N = 0.
        LoopExecutionError: o corpo levantou exceção; nenhuma medição é registrada.
        InvalidParameterError: instância de ChunkPolicy de outro N ou já consumida.
    """
    if not loop_id:
        raise InvalidParameterError("loop_id não pode ser vazio")
    if n_tasks == 0:
        raise EmptyRangeError(f"Laço '{loop_id}' com intervalo vazio")
    recorder = recorder or default_recorder

    start_ns = time.perf_counter_ns()
    spec: PolicySpec | None = None
    if isinstance(policy, ChunkPolicy):
        state = policy
        if state.shape.n != n_tasks:
            raise InvalidParameterError(f"política criada para N={state.shape.n}, laço tem N={n_tasks}")
        if state.dispensed > 0 or state.remaining != n_tasks:
            raise InvalidParameterError(
                f"política já consumida ({state.dispensed} chunks dispensados); crie uma nova para cada execução"
            )
        n_workers = workers or state.shape.p
    else:
        spec = parse_policy_spec(policy) if isinstance(policy, str) else policy
        spec = spec or resolve_policy_from_env(loop_id)
        try:
            n_workers = workers or get_thread_count()
        except ValueError as e:
            raise ConfigurationError(str(e))
        state = spec.build(LoopShape(n_tasks, n_workers))
    label = spec.label() if spec else state.name

    lock = threading.Lock()
    abort = threading.Event()
    cursor = [0]
    dispensed: list[int] = []

    def worker() -> None:
        while not abort.is_set():
            with lock:
                size = state.next_chunk()
                if size == 0:
                    return
                first = cursor[0]
                cursor[0] += size
                dispensed.append(size)
            for i in range(first, first + size):
                if abort.is_set():
                    return
                try:
                    body(i)
                except BaseException:
                    abort.set()
                    raise

    pool = _get_pool(n_workers)
    futures = [pool.submit(worker) for _ in range(n_workers)]
    wait(futures, return_when=FIRST_EXCEPTION)
    failures = [f.exception() for f in futures if f.done() and f.exception() is not None]
    if failures:
        abort.set()
        wait(futures)
        logger.error(f"Laço '{loop_id}' abortado: {failures[0]!r}")
        raise LoopExecutionError(f"Corpo do laço '{loop_id}' falhou: {failures[0]}") from failures[0]
    tau = max(time.perf_counter_ns() - start_ns, 1) / 1e9

    theta = state.theta
    measurement = LoopMeasurement(
        loop_id=loop_id,
        ell=recorder.next_ell(loop_id),
        tau=tau,
        theta=theta,
        x=_policy_x(spec, theta),
        n_tasks=n_tasks,
        policy=label,
        chunks=tuple(dispensed),
    )
    recorder.record(measurement)
    logger.debug(f"Laço '{loop_id}' ℓ={measurement.ell}: τ={tau:.6f}s com {len(dispensed)} chunks ({label})")
    return measurement


def flush_measurements(data_dir: str | None = None, recorder: MeasurementRecorder | None = None) -> int:
    """
    Acrescenta as medições pendentes aos datasets `<data_dir>/<loop_id>.json`.

    Uma iteração por (laço, x) com as execuções ℓ correspondentes; laços sem
    parâmetro FSS no domínio do tuner são ignorados com aviso. Idempotente:
    uma segunda chamada sem novas medições não grava nada.

    Returns:
        Número de medições gravadas.

    Raises:
        DatasetIOError: falha de E/S (o arquivo original fica intacto).
        DatasetValidationError: dataset existente corrompido (não é sobrescrito).
    """
    recorder = recorder or default_recorder
    pending = recorder.pending()
    if not pending:
        return 0

    groups: dict[tuple[str, float], list[LoopMeasurement]] = {}
    n_tasks: dict[str, int] = {}
    for m in pending:
        if m.x is None:
            logger.warning(f"Laço '{m.loop_id}' executado com '{m.policy}' sem parâmetro ajustável; medição ignorada.")
            continue
        groups.setdefault((m.loop_id, m.x), []).append(m)
        n_tasks[m.loop_id] = m.n_tasks

    service = get_dataset_service(data_dir)
    by_loop: dict[str, list[IterationRecord]] = {}
    written = 0
    for (loop_id, x), items in groups.items():
        name = f"{recorder.run_uuid}:{loop_id}:{x!r}:{items[0].ell}"
        record = IterationRecord.from_measurements(
            str(uuid.uuid5(_ITERATION_NAMESPACE, name)), x, [(m.ell, m.tau) for m in items]
        )
        by_loop.setdefault(loop_id, []).append(record)

    for loop_id, iterations in by_loop.items():
        if service.append_iterations(loop_id, iterations, n_tasks[loop_id]):
            written += sum(len(it.measurements) for it in iterations)
    recorder.mark_flushed(len(pending))
    logger.info(f"{written} medição(ões) gravada(s) para {len(by_loop)} laço(s).")
    return written
