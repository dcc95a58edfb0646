"""
Configurações da aplicação lidas do ambiente (e do arquivo .env).
"""

from dotenv import load_dotenv
from typing import Final
import sys
import os

# Adiciona o diretório raiz ao path para imports da Database
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.realpath(__file__)))))

# Carrega variáveis de ambiente do arquivo .env
load_dotenv()

# --- Constantes ---
DIR_PATH: Final[str] = os.path.dirname(os.path.dirname(os.path.realpath(__file__)))
ROOT_PATH: Final[str] = os.path.dirname(DIR_PATH)

SCHEDULE_ENV: Final[str] = "LOOPSCHED_SCHEDULE"
THREADS_ENV: Final[str] = "LOOPSCHED_THREADS"
DATA_DIR_ENV: Final[str] = "LOOPSCHED_DATA_DIR"
LOG_LEVEL_ENV: Final[str] = "LOOPSCHED_LOG_LEVEL"
LOG_DIR_ENV: Final[str] = "LOOPSCHED_LOG_DIR"

DEFAULT_DATA_DIR: Final[str] = "loopsched_data"
DEFAULT_LOG_DIR: Final[str] = "logs"


def get_schedule_string() -> str:
    """Retorna o valor bruto de LOOPSCHED_SCHEDULE (vazio se não definido)."""
    return os.environ.get(SCHEDULE_ENV, "").strip()


def get_thread_count() -> int:
    """
    Número de workers do runtime.

    Usa LOOPSCHED_THREADS quando definido, senão a concorrência do hardware.

    Raises:
        ValueError: se a variável não for um inteiro positivo.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"A variável de ambiente {THREADS_ENV} deve ser um inteiro positivo, recebido '{raw}'.")
    if value < 1:
        raise ValueError(f"A variável de ambiente {THREADS_ENV} deve ser um inteiro positivo, recebido '{raw}'.")
    return value


def get_data_dir() -> str:
    """Diretório onde ficam os datasets `<loop_id>.json`."""
    return os.environ.get(DATA_DIR_ENV, "").strip() or DEFAULT_DATA_DIR


def get_log_level() -> str:
    return os.environ.get(LOG_LEVEL_ENV, "INFO").strip().upper() or "INFO"


def get_log_dir() -> str:
    return os.environ.get(LOG_DIR_ENV, "").strip() or DEFAULT_LOG_DIR
