"""
Serviços de persistência dos datasets do tuner (JSON canônico, escrita atômica).
"""
from Database.models import IterationRecord, LoopDatasetFile, NextParamFile
from Database.database import dataset_lock, get_dataset_path, get_next_param_path
from App.utils.constants import FLOAT_SIGNIFICANT_DIGITS
from App.utils.exceptions import DatasetIOError, DatasetValidationError
from App.utils.logger import get_logger
from pathlib import Path
from typing import Any, Optional
import tempfile
import json
import math
import os

logger = get_logger(__name__)


def _format_float(value: float) -> str:
    if not math.isfinite(value):
        raise DatasetValidationError(f"valor não finito não pode ser serializado: {value!r}")
    text = format(value, f".{FLOAT_SIGNIFICANT_DIGITS}g")
    # Mantém o tipo float na releitura
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def canonical_dumps(value: Any, indent: int = 2, _level: int = 0) -> str:
    """
    Serializa em JSON canônico: chaves ordenadas e floats com 17 dígitos
    significativos, de modo que salvar -> carregar -> salvar seja byte a byte estável.
    """
    pad = " " * (indent * (_level + 1))
    end_pad = " " * (indent * _level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {canonical_dumps(v, indent, _level + 1)}"
            for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))
        ]
        return "{\n" + ",\n".join(items) + f"\n{end_pad}}}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}{canonical_dumps(v, indent, _level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + f"\n{end_pad}]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _format_float(value)
    return json.dumps(str(value) if not isinstance(value, str) else value, ensure_ascii=False)


def _write_payload(handle, text: str) -> None:
    handle.write(text)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """
    Escreve em um arquivo temporário no mesmo diretório e renomeia por cima do destino.
    Um processo interrompido nunca deixa o arquivo original truncado.

    Raises:
        DatasetIOError: falha de E/S, com o caminho do arquivo.
    """
    target = Path(path)
    tmp_name = None
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            "w", encoding="utf-8", dir=target.parent, prefix=f".{target.name}.", suffix=".tmp", delete=False
        ) as handle:
            tmp_name = handle.name
            _write_payload(handle, text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, target)
        tmp_name = None
    except OSError as e:
        raise DatasetIOError(f"Falha ao escrever {target}: {e}")
    finally:
        if tmp_name is not None:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass


def load_dataset(path: str | os.PathLike) -> LoopDatasetFile:
    """
    Carrega e valida um dataset.

    Raises:
        DatasetIOError: arquivo ilegível.
        DatasetValidationError / UnsupportedVersionError: schema inválido.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"Falha ao ler {path}: {e}")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetValidationError(f"JSON inválido em {path}: {e}")
    return LoopDatasetFile.from_dict(payload)


def save_dataset(path: str | os.PathLike, dataset: LoopDatasetFile) -> None:
    """Valida e grava o dataset de forma atômica em JSON canônico."""
    payload = dataset.to_dict()
    # Reconstrói a partir do payload para recusar datasets inconsistentes antes de escrever
    LoopDatasetFile.from_dict(payload)
    atomic_write_text(path, canonical_dumps(payload) + "\n")


class dataset_service:
    """Serviço para leitura e escrita dos arquivos de um diretório de dados."""

    def __init__(self, data_dir: Optional[str | os.PathLike] = None):
        self.data_dir = data_dir

    def dataset_path(self, loop_id: str) -> Path:
        return get_dataset_path(loop_id, self.data_dir)

    def load_or_create(self, loop_id: str, n_tasks: Optional[int] = None) -> LoopDatasetFile:
        """Carrega o dataset do laço ou cria um vazio se o arquivo não existe."""
        path = self.dataset_path(loop_id)
        if not path.exists():
            return LoopDatasetFile(loop_id=loop_id, n_tasks=n_tasks)
        return load_dataset(path)

    def append_iterations(
        self,
        loop_id: str,
        iterations: list[IterationRecord],
        n_tasks: Optional[int] = None,
    ) -> int:
        """
        Acrescenta iterações ao dataset do laço, ignorando run_uuids já gravados.

        Args:
            loop_id: Identificador do laço.
            iterations: Registros a acrescentar.
            n_tasks: N do laço, gravado se o dataset ainda não o conhece.

        Returns:
            Número de registros efetivamente gravados.
        """
        path = self.dataset_path(loop_id)
        with dataset_lock(path):
            dataset = self.load_or_create(loop_id, n_tasks)
            known = {it.run_uuid for it in dataset.iterations}
            fresh = [it for it in iterations if it.run_uuid not in known]
            if not fresh:
                logger.info(f"Nenhuma iteração nova para o laço '{loop_id}'.")
                return 0
            if dataset.n_tasks is None and n_tasks is not None:
                dataset.n_tasks = n_tasks
            dataset.iterations.extend(fresh)
            save_dataset(path, dataset)
        logger.info(f"{len(fresh)} iteração(ões) gravada(s) em {path}.")
        return len(fresh)

    def save_next_param(self, dataset_path: str | os.PathLike, next_param: NextParamFile) -> Path:
        path = get_next_param_path(dataset_path)
        atomic_write_text(path, canonical_dumps(next_param.to_dict()) + "\n")
        return path

    def load_next_param(self, loop_id: str) -> Optional[NextParamFile]:
        """Lê `<loop_id>.next.json`; None se o tuner ainda não produziu sugestão."""
        path = get_next_param_path(self.dataset_path(loop_id))
        if not path.exists():
            return None
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise DatasetValidationError(f"Arquivo de próximo parâmetro inválido {path}: {e}")
        return NextParamFile.from_dict(payload)


def get_dataset_service(data_dir: Optional[str | os.PathLike] = None) -> dataset_service:
    """Retorna uma instância do serviço de datasets."""
    return dataset_service(data_dir)
