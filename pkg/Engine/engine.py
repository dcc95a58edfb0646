"""
Fluxo do tuner offline: carrega o dataset de um laço, executa um passo de
BO e grava o próximo parâmetro; também dirige o laço fechado contra o
simulador, os relatórios e a comparação entre surrogates.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional
import sys
import os

import numpy as np
import pandas as pd

sys.path.append(os.path.dirname(os.path.dirname(os.path.realpath(__file__))))

from App.utils.bo import (
    SURROGATE_LOCALITY,
    SURROGATE_PLAIN,
    BOConfig,
    Observation,
    best_so_far,
    bo_run_closed_loop,
    bo_step,
    posterior_mean_argmin,
    reparam,
)
from App.utils.chart_generator import write_convergence_chart
from App.utils.chunking import fss_analytic_theta, parse_policy_spec
from App.utils.constants import REPORT_CSV_COLUMNS, TRACE_CSV_COLUMNS, TUNER_VERSION
from App.utils.evaluation import load_cost_matrix, relative_improvement, render_regret_table
from App.utils.exceptions import DatasetIOError
from App.utils.logger import get_logger
from App.utils.simulator import (
    SimulationResult,
    WorkloadSpec,
    brute_force_best_theta,
    default_theta_grid,
    generate_workload,
    load_workload_spec,
    make_objective,
    policy_chunks,
    simulate_schedule,
    simulate_total_time,
)
from Database.database import dataset_lock
from Database.models import LoopDatasetFile, NextParamFile
from Database.services import atomic_write_text, canonical_dumps, get_dataset_service, load_dataset

logger = get_logger(__name__)


def observations_from_dataset(dataset: LoopDatasetFile) -> list[Observation]:
    """Converte as iterações gravadas em observações do BO (na ordem de gravação)."""
    return [
        Observation(
            x=it.x,
            theta=it.theta,
            per_execution=tuple((m.ell, m.tau_s) for m in it.measurements),
            total=it.total_s,
        )
        for it in dataset.iterations
    ]


def _load_or_empty(path: Path) -> LoopDatasetFile:
    if path.exists():
        return load_dataset(path)
    name = path.name[: -len(".json")] if path.name.endswith(".json") else path.stem
    logger.info(f"Dataset {path} inexistente; tratando como vazio.")
    return LoopDatasetFile(loop_id=name)


def _frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")


# --- suggest ---

@dataclass
class SuggestResult:
    next_param: NextParamFile
    path: Path
    incumbent_x: float | None
    incumbent_total: float | None

    def summary_line(self) -> str:
        incumbent = "n/a" if self.incumbent_total is None else f"{self.incumbent_total:.6g}s (x={self.incumbent_x:.6f})"
        return (
            f"t={self.next_param.source_iteration_count} x_next={self.next_param.x_next:.6f} "
            f"theta_next={self.next_param.theta_next:.6g} incumbent={incumbent}"
        )


def suggest(data_path: str | os.PathLike, config: BOConfig) -> SuggestResult:
    """
    Executa um passo de BO sobre o dataset e grava `<loop_id>.next.json`.

    O dataset nunca é alterado; um dataset corrompido levanta
    DatasetValidationError antes de qualquer escrita.
    """
    path = Path(data_path)
    with dataset_lock(path):
        dataset = _load_or_empty(path)
        observations = observations_from_dataset(dataset)
        x_next = bo_step(observations, config)
        next_param = NextParamFile(
            loop_id=dataset.loop_id,
            x_next=x_next,
            theta_next=reparam(x_next),
            produced_by=TUNER_VERSION,
            source_iteration_count=len(observations),
        )
        out = get_dataset_service(path.parent).save_next_param(path, next_param)

    incumbent = min(observations, key=lambda o: o.total) if observations else None
    result = SuggestResult(
        next_param, out,
        incumbent.x if incumbent else None,
        incumbent.total if incumbent else None,
    )
    logger.info(f"Sugestão para '{dataset.loop_id}': {result.summary_line()}")
    return result


# --- tune-sim ---

@dataclass
class TuneReport:
    best_x: float
    best_theta: float
    best_total: float
    tuned_total: float
    optimal_theta: float
    optimal_total: float
    regret: float
    analytic_theta: float | None
    analytic_total: float | None
    improvement_over_analytic: float | None
    trace: pd.DataFrame = field(repr=False)

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload.pop("trace")
        return payload


def _as_spec(workload: str | os.PathLike | WorkloadSpec) -> WorkloadSpec:
    return workload if isinstance(workload, WorkloadSpec) else load_workload_spec(workload)


def tune_sim(
    workload: str | os.PathLike | WorkloadSpec,
    config: BOConfig,
    out_dir: str | os.PathLike | None = None,
) -> TuneReport:
    """
    Laço fechado contra o simulador: BO sobre T_total, força bruta numa grade de
    256 θ e regret do θ ajustado em relação ao ótimo da grade.

    Grava em `out_dir` (se dado) `trace.csv`, `report.json` e `convergence.html`.
    """
    spec = _as_spec(workload)
    sim = generate_workload(spec)
    objective = make_objective(sim, spec.noise_sigma, seed=spec.seed + config.seed)

    best_x, best_total, trace = bo_run_closed_loop(objective, config)
    best_theta = reparam(best_x)
    tuned_total = simulate_total_time(sim, best_theta)
    optimal_theta, optimal_total = brute_force_best_theta(sim, default_theta_grid())
    # θ contínuo pode superar o ótimo da grade; regret não fica negativo
    regret = max(0.0, (tuned_total - optimal_total) / optimal_total * 100.0)

    analytic_theta = analytic_total = improvement = None
    if float(np.mean(sim.durations)) > 0:
        analytic_theta = fss_analytic_theta(sim.task_stats())
        analytic_total = simulate_total_time(sim, analytic_theta)
        improvement = relative_improvement(tuned_total, analytic_total)

    frame = pd.DataFrame(
        [(e.t, e.x, e.theta, e.total) for e in trace], columns=TRACE_CSV_COLUMNS
    )
    report = TuneReport(
        best_x, best_theta, best_total, tuned_total, optimal_theta, optimal_total, regret,
        analytic_theta, analytic_total, improvement, frame,
    )
    logger.info(
        f"tune-sim: θ ajustado={best_theta:.6g} ({tuned_total:.6g}s), "
        f"θ ótimo da grade={optimal_theta:.6g} ({optimal_total:.6g}s), regret={regret:.3f}%"
    )

    if out_dir is not None:
        out = Path(out_dir)
        atomic_write_text(out / "trace.csv", _frame_to_csv(frame))
        atomic_write_text(out / "report.json", canonical_dumps(report.to_dict()) + "\n")
        curves = pd.DataFrame({"iter": frame["t"], "best_s": best_so_far(frame["total_s"].tolist()), "total_s": frame["total_s"]})
        write_convergence_chart(curves, out / "convergence.html", title="Convergência do tune-sim")
    return report


# --- report ---

@dataclass
class DatasetReport:
    loop_id: str
    rows: pd.DataFrame
    incumbent_x: float | None = None
    incumbent_total: float | None = None
    posterior_mean_argmin: float | None = None

    @property
    def iteration_count(self) -> int:
        return len(self.rows)

    def to_text(self) -> str:
        if self.rows.empty:
            return "Nenhuma observação registrada."
        lines = [
            f"Laço: {self.loop_id}",
            f"Iterações: {self.iteration_count}",
            f"Incumbente: x={self.incumbent_x:.6f} θ={reparam(self.incumbent_x):.6g} total={self.incumbent_total:.6g}s",
        ]
        if self.posterior_mean_argmin is not None:
            lines.append(
                f"Argmin da média posterior: x={self.posterior_mean_argmin:.6f} θ={reparam(self.posterior_mean_argmin):.6g}"
            )
        lines.append("Totais por iteração:")
        lines += [f"  {int(r.iter)}: x={r.x:.6f} total={r.total_s:.6g}s melhor={r.best_s:.6g}s" for r in self.rows.itertuples()]
        return "\n".join(lines)

    def to_csv(self) -> str:
        return _frame_to_csv(self.rows[REPORT_CSV_COLUMNS])


def report(data_path: str | os.PathLike, config: Optional[BOConfig] = None, with_posterior: bool = True) -> DatasetReport:
    """Resumo do dataset: incumbente, totais por iteração e argmin da média posterior."""
    path = Path(data_path)
    if not path.exists():
        raise DatasetIOError(f"Dataset não encontrado: {path}")
    dataset = load_dataset(path)
    observations = observations_from_dataset(dataset)
    totals = [o.total for o in observations]
    rows = pd.DataFrame(
        {
            "iter": list(range(1, len(observations) + 1)),
            "x": [o.x for o in observations],
            "theta": [o.theta for o in observations],
            "total_s": totals,
            "best_s": best_so_far(totals),
        },
        columns=REPORT_CSV_COLUMNS,
    )
    result = DatasetReport(dataset.loop_id, rows)
    if observations:
        incumbent = min(observations, key=lambda o: o.total)
        result.incumbent_x, result.incumbent_total = incumbent.x, incumbent.total
        if with_posterior:
            result.posterior_mean_argmin = posterior_mean_argmin(observations, config or BOConfig())
    return result


# --- sim ---

@dataclass
class SimulateResult:
    schedule: str
    ell: int
    chunks: list[int]
    execution: SimulationResult
    total: float


def simulate(workload: str | os.PathLike | WorkloadSpec, schedule: str, ell: int = 1) -> SimulateResult:
    """Makespan da execução ℓ e T_total das L execuções para a política dada."""
    spec = _as_spec(workload)
    sim = generate_workload(spec)
    policy = parse_policy_spec(schedule)
    chunks = policy_chunks(sim, policy)
    execution = simulate_schedule(sim, chunks, ell)
    total = simulate_total_time(sim, policy, spec.noise_sigma, seed=spec.seed)
    return SimulateResult(policy.label(), ell, chunks, execution, total)


# --- compare-locality ---

def compare_locality(
    workload: str | os.PathLike | WorkloadSpec,
    config: BOConfig,
    seeds: int = 30,
    out_csv: str | os.PathLike | None = None,
) -> pd.DataFrame:
    """
    Roda o laço fechado com o surrogate simples e com o de localidade para
    `seeds` sementes e devolve as curvas medianas de melhor total por iteração.

    Returns:
        DataFrame com colunas iter, plain, locality_aware
    """
    spec = _as_spec(workload)
    sim = generate_workload(spec)
    curves: dict[str, list[list[float]]] = {SURROGATE_PLAIN: [], SURROGATE_LOCALITY: []}
    for mode in curves:
        for seed in range(seeds):
            run_config = BOConfig(**{**config.to_dict(), "surrogate": mode, "seed": seed})
            objective = make_objective(sim, spec.noise_sigma, seed=spec.seed + seed)
            _, _, trace = bo_run_closed_loop(objective, run_config)
            # Incumbente avaliado sem ruído para comparar os modos
            clean = [simulate_total_time(sim, e.theta) for e in trace]
            curves[mode].append(best_so_far(clean))
        logger.info(f"compare-locality: modo '{mode}' concluído com {seeds} sementes")

    frame = pd.DataFrame({"iter": np.arange(1, config.n_init + config.n_iters + 1)})
    for mode, runs in curves.items():
        frame[mode] = np.median(np.asarray(runs), axis=0)
    if out_csv is not None:
        atomic_write_text(out_csv, _frame_to_csv(frame))
        chart = frame.melt(id_vars="iter", var_name="series", value_name="best_s")
        write_convergence_chart(chart, Path(out_csv).with_suffix(".html"), title="Surrogate simples × com localidade")
    return frame


# --- regret ---

def regret_report(in_path: str | os.PathLike, out_path: str | os.PathLike | None = None) -> str:
    """Tabela de regret a partir de uma matriz de custos; CSV se `out_path` terminar em .csv."""
    matrix = load_cost_matrix(in_path)
    fmt = "csv" if out_path is not None and str(out_path).lower().endswith(".csv") else "markdown"
    text = render_regret_table(matrix, fmt=fmt)
    if out_path is not None:
        atomic_write_text(out_path, text)
        logger.info(f"Tabela de regret gravada em {out_path}")
    return text

