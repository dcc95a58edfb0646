"""
Configuração comum dos testes: raiz do projeto no sys.path e logs/dados em
diretórios temporários.
"""

import sys
import os
import tempfile

sys.path.append(os.path.dirname(os.path.dirname(os.path.realpath(__file__))))

# Antes de qualquer import do pacote: o logger é criado na importação
os.environ.setdefault("LOOPSCHED_LOG_DIR", os.path.join(tempfile.gettempdir(), "loopsched_test_logs"))

import pytest


@pytest.fixture
def data_dir(tmp_path, monkeypatch):
    """Diretório de datasets isolado por teste."""
    path = tmp_path / "data"
    path.mkdir()
    monkeypatch.setenv("LOOPSCHED_DATA_DIR", str(path))
    return path


@pytest.fixture
def clean_schedule_env(monkeypatch):
    monkeypatch.delenv("LOOPSCHED_SCHEDULE", raising=False)
    monkeypatch.delenv("LOOPSCHED_THREADS", raising=False)
