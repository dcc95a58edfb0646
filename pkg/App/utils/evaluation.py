"""
Avaliação por arrependimento (regret): regret por célula, minimax, percentil,
intervalos de confiança bootstrap e tabela de regret (Markdown/CSV).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
import json
import math

import numpy as np
import pandas as pd
from scipy.stats import bootstrap

from .constants import DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_CONFIDENCE_LEVEL, R90_PERCENTILE
from .exceptions import DatasetIOError, InvalidParameterError
from .logger import get_logger

logger = get_logger(__name__)

BEST_CELL_MARK = "*"


@dataclass
class CostMatrix:
    """
    Custos C(S, w) em segundos: linhas = cargas (w), colunas = escalonadores (S).
    Células ausentes são NaN e ficam fora dos máximos.
    """

    costs: pd.DataFrame
    samples: dict[tuple[str, str], list[float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.costs = self.costs.astype(float)
        values = self.costs.to_numpy()
        present = values[~np.isnan(values)]
        if np.any(~np.isfinite(present)) or np.any(present <= 0):
            raise InvalidParameterError("todos os custos devem ser finitos e > 0")

    @classmethod
    def from_records(cls, records: Sequence[tuple[str, str, float]]) -> "CostMatrix":
        """Monta a matriz a partir de linhas (scheduler, workload, cost); repetições viram média."""
        if not records:
            raise InvalidParameterError("matriz de custos vazia")
        frame = pd.DataFrame(records, columns=["scheduler", "workload", "cost"])
        samples = frame.groupby(["scheduler", "workload"])["cost"].apply(list).to_dict()
        costs = frame.pivot_table(index="workload", columns="scheduler", values="cost", aggfunc="mean", sort=False)
        return cls(costs, {(s, w): [float(c) for c in v] for (s, w), v in samples.items()})

    @property
    def schedulers(self) -> list[str]:
        return [str(c) for c in self.costs.columns]

    @property
    def workloads(self) -> list[str]:
        return [str(i) for i in self.costs.index]


def regret_cell(costs: dict[str, float | None], target: str) -> float:
    """
    R(S, w) = (C(S, w) − min_S C) / min_S C × 100.

    Returns:
        Regret em pontos percentuais, ou NaN se C(S, w) estiver ausente.
    """
    available = {s: c for s, c in costs.items() if c is not None and not math.isnan(c)}
    if not available:
        raise InvalidParameterError("nenhum escalonador com custo para esta carga")
    value = costs.get(target)
    if value is None or math.isnan(value):
        return math.nan
    best = min(available.values())
    return (value - best) / best * 100.0


def regret_table(matrix: CostMatrix) -> pd.DataFrame:
    """Tabela R(S, w) com as mesmas linhas/colunas da matriz de custos."""
    best = matrix.costs.min(axis=1, skipna=True)
    return matrix.costs.sub(best, axis=0).div(best, axis=0) * 100.0


def _scheduler_regrets(matrix: CostMatrix, scheduler: str) -> np.ndarray:
    if scheduler not in matrix.costs.columns:
        raise InvalidParameterError(f"escalonador desconhecido '{scheduler}'")
    values = regret_table(matrix)[scheduler].dropna().to_numpy()
    if values.size == 0:
        raise InvalidParameterError(f"escalonador '{scheduler}' sem nenhuma célula com dados")
    return values


def minimax_regret(matrix: CostMatrix, scheduler: str) -> float:
    """R(S) = max_w R(S, w)."""
    return float(np.max(_scheduler_regrets(matrix, scheduler)))


def percentile_regret(matrix: CostMatrix, scheduler: str, p: float = R90_PERCENTILE) -> float:
    """p-ésimo percentil de R(S, w) sobre as cargas, com interpolação linear."""
    if not 0 <= p <= 100:
        raise InvalidParameterError(f"percentil deve estar em [0, 100], recebido {p}")
    return float(np.percentile(_scheduler_regrets(matrix, scheduler), p, method="linear"))


def bootstrap_ci(
    samples: Sequence[float],
    level: float = DEFAULT_CONFIDENCE_LEVEL,
    resamples: int = DEFAULT_BOOTSTRAP_RESAMPLES,
    seed: int | None = 0,
) -> tuple[float, float]:
    """
    Intervalo de confiança bootstrap (método percentil) da média amostral.

    Raises:
        InvalidParameterError: menos de 2 amostras ou nível fora de (0, 1).
    """
    data = np.asarray(samples, dtype=float)
    if data.size < 2:
        raise InvalidParameterError("bootstrap precisa de pelo menos 2 amostras")
    if not 0 < level < 1:
        raise InvalidParameterError(f"nível deve estar em (0, 1), recebido {level}")
    if np.ptp(data) == 0:
        return float(data[0]), float(data[0])
    result = bootstrap(
        (data,),
        np.mean,
        n_resamples=resamples,
        confidence_level=level,
        method="percentile",
        vectorized=True,
        random_state=np.random.default_rng(seed),
    )
    interval = result.confidence_interval
    return float(interval.low), float(interval.high)


def relative_improvement(tuned: float, baseline: float) -> float:
    """Melhoria percentual do ajustado sobre a referência: (baseline − tuned)/baseline × 100."""
    if baseline <= 0:
        raise InvalidParameterError("referência deve ser > 0")
    return (baseline - tuned) / baseline * 100.0


def summary_rows(matrix: CostMatrix, p: float = R90_PERCENTILE) -> pd.DataFrame:
    """Linhas finais R(S) e R₉₀(S) por escalonador."""
    rows = {
        "R(S)": {s: minimax_regret(matrix, s) for s in matrix.schedulers},
        f"R{p:g}(S)": {s: percentile_regret(matrix, s, p) for s in matrix.schedulers},
    }
    return pd.DataFrame.from_dict(rows, orient="index")[matrix.schedulers]


def render_regret_table(matrix: CostMatrix, fmt: str = "markdown", digits: int = 2) -> str:
    """
    Tabela de regret: linhas = cargas, colunas = escalonadores, linhas finais
    R(S) e R₉₀(S); a melhor célula de cada carga recebe '*'.

    Args:
        matrix: matriz de custos
        fmt: "markdown" ou "csv"
        digits: casas decimais

    Returns:
        Texto da tabela
    """
    regrets = regret_table(matrix)
    summary = summary_rows(matrix)

    if fmt == "csv":
        full = pd.concat([regrets, summary])
        full.index.name = "workload"
        return full.round(digits).to_csv(na_rep="")
    if fmt != "markdown":
        raise InvalidParameterError(f"formato desconhecido '{fmt}'")

    def cell(value: float, best: bool) -> str:
        if math.isnan(value):
            return "n/a"
        text = f"{value:.{digits}f}"
        return f"{text}{BEST_CELL_MARK}" if best else text

    header = "| workload | " + " | ".join(matrix.schedulers) + " |"
    lines = [header, "|" + "---|" * (len(matrix.schedulers) + 1)]
    for workload, row in regrets.iterrows():
        best_value = np.nanmin(row.to_numpy())
        cells = [cell(v, not math.isnan(v) and v == best_value) for v in row.to_numpy()]
        lines.append(f"| {workload} | " + " | ".join(cells) + " |")
    for label, row in summary.iterrows():
        lines.append(f"| **{label}** | " + " | ".join(cell(v, False) for v in row.to_numpy()) + " |")
    return "\n".join(lines) + "\n"


def load_cost_matrix(path: str | Path) -> CostMatrix:
    """
    Lê a matriz de custos de CSV (`scheduler,workload,cost`) ou JSON
    (lista de objetos com essas chaves, ou {workload: {scheduler: cost}}).
    """
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            payload = json.loads(path.read_text(encoding="utf-8"))
            if isinstance(payload, dict):
                records = [(s, w, c) for w, row in payload.items() for s, c in row.items() if c is not None]
            else:
                records = [(r["scheduler"], r["workload"], r["cost"]) for r in payload]
        else:
            frame = pd.read_csv(path)
            missing = {"scheduler", "workload", "cost"} - set(frame.columns)
            if missing:
                raise InvalidParameterError(f"colunas ausentes em {path}: {sorted(missing)}")
            frame = frame.dropna(subset=["cost"])
            records = list(frame[["scheduler", "workload", "cost"]].itertuples(index=False, name=None))
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetIOError(f"Falha ao ler a matriz de custos {path}: {e}")
    except (KeyError, TypeError) as e:
        raise InvalidParameterError(f"Matriz de custos inválida em {path}: {e}")
    logger.info(f"Matriz de custos carregada de {path}: {len(records)} célula(s)")
    return CostMatrix.from_records([(str(s), str(w), float(c)) for s, w, c in records])
