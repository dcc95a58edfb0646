"""
Módulo para geração de gráficos de convergência do tuner (Plotly, HTML).
"""

from pathlib import Path
import uuid

import pandas as pd
import plotly.express as px
import plotly.io as pio

from .exceptions import DatasetIOError
from .logger import get_logger

# Logger para este módulo
logger = get_logger(__name__)


def convergence_figure(curves: pd.DataFrame, title: str = "Convergência do tuner"):
    """
    Monta a figura iteração × melhor tempo até agora.

    Args:
        curves: DataFrame com as colunas `iter`, `best_s` e, opcionalmente,
            `series` (uma curva por valor, ex. plain / locality_aware)

    Returns:
        Figura Plotly
    """
    color = "series" if "series" in curves.columns else None
    fig = px.line(curves, x="iter", y="best_s", color=color, markers=True, title=title)
    if "total_s" in curves.columns and color is None:
        fig.add_scatter(x=curves["iter"], y=curves["total_s"], mode="markers", name="total_s")

    fig.update_layout(
        width=1000, height=400, margin=dict(l=20, r=20, t=40, b=20),
        xaxis_title="iteração", yaxis_title="melhor T_total (s)",
    )
    return fig


def convergence_chart_html(curves: pd.DataFrame, title: str = "Convergência do tuner") -> str:
    """Snippet HTML (Plotly via CDN) do gráfico de convergência."""
    return pio.to_html(
        convergence_figure(curves, title),
        full_html=True,
        include_plotlyjs="cdn",
        div_id=f"plotly-{uuid.uuid4().hex}",
        config={
            "displaylogo": False,
            "modeBarButtonsToRemove": ["pan2d", "select2d", "lasso2d"]
        }
    )


def write_convergence_chart(curves: pd.DataFrame, path: str | Path, title: str = "Convergência do tuner") -> Path:
    """
    Grava o gráfico de convergência em HTML.

    Raises:
        DatasetIOError: falha ao escrever o arquivo.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(convergence_chart_html(curves, title), encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"Falha ao escrever o gráfico {path}: {e}")
    logger.info(f"Gráfico de convergência gravado em {path}")
    return path
