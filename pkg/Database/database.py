"""
Resolução de caminhos dos datasets e lock consultivo por arquivo.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator
import os
import re

from App.utils.config import get_data_dir
from App.utils.exceptions import DatasetIOError, DatasetLockedError

DATASET_SUFFIX = ".json"
NEXT_PARAM_SUFFIX = ".next.json"
LOCK_SUFFIX = ".lock"


def safe_loop_id(loop_id: str) -> str:
    """Troca caracteres que não podem aparecer em nome de arquivo."""
    if not loop_id:
        raise ValueError("loop_id não pode ser vazio")
    return re.sub(r"[^\w.\-:]", "_", loop_id)


def get_dataset_path(loop_id: str, data_dir: str | os.PathLike | None = None) -> Path:
    """Caminho `<data_dir>/<loop_id>.json` do dataset de um laço."""
    return Path(data_dir or get_data_dir()) / f"{safe_loop_id(loop_id)}{DATASET_SUFFIX}"


def get_next_param_path(dataset_path: str | os.PathLike) -> Path:
    """Caminho `<loop_id>.next.json` ao lado do dataset."""
    path = Path(dataset_path)
    stem = path.name[: -len(DATASET_SUFFIX)] if path.name.endswith(DATASET_SUFFIX) else path.stem
    return path.with_name(f"{stem}{NEXT_PARAM_SUFFIX}")


@contextmanager
def dataset_lock(dataset_path: str | os.PathLike) -> Iterator[Path]:
    """
    Lock consultivo (arquivo `.lock` criado com O_EXCL) para um único escritor.

    Raises:
        DatasetLockedError: outro processo já detém o lock (fail-fast).
    """
    lock_path = Path(f"{dataset_path}{LOCK_SUFFIX}")
    try:
        lock_path.parent.mkdir(parents=True, exist_ok=True)
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DatasetLockedError(f"Dataset em uso por outro processo (lock: {lock_path})")
    except OSError as e:
        raise DatasetIOError(f"Não foi possível criar o lock {lock_path}: {e}")
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield lock_path
    finally:
        try:
            lock_path.unlink()
        except FileNotFoundError:
            pass
