"""
Sistema de logging centralizado para o loopsched.
"""

from datetime import datetime
from pathlib import Path
import logging

from .config import get_log_dir, get_log_level


def setup_logger(name: str = __name__, level: str | None = None) -> logging.Logger:
    """
    Configura e retorna um logger configurado para o projeto.

    Args:
        name: Nome do logger (geralmente __name__ do módulo)
        level: Nível de logging (DEBUG, INFO, WARNING, ERROR, CRITICAL);
            se None, usa LOOPSCHED_LOG_LEVEL

    Returns:
        Logger configurado
    """
    # Cria o diretório de logs se não existir
    log_dir = Path(get_log_dir())
    log_dir.mkdir(parents=True, exist_ok=True)

    # Nome do arquivo de log baseado na data
    log_filename = f"loopsched_{datetime.now().strftime('%Y%m%d')}.log"
    log_path = log_dir / log_filename

    logger = logging.getLogger(name)

    # Evita duplicação de handlers se o logger já foi configurado
    if logger.handlers:
        return logger

    numeric_level = getattr(logging, (level or get_log_level()).upper(), logging.INFO)
    logger.setLevel(numeric_level)

    formatter = logging.Formatter(
        fmt='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    file_handler = logging.FileHandler(log_path, encoding='utf-8')
    file_handler.setLevel(numeric_level)
    file_handler.setFormatter(formatter)

    # Console só a partir de WARNING para não poluir a saída da CLI
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.WARNING)
    console_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)

    return logger


def set_log_level(level: str) -> None:
    """
    Altera o nível do arquivo de log de todos os loggers já configurados.

    O console continua em WARNING, exceto quando o nível pedido é mais alto.
    """
    numeric_level = getattr(logging, level.upper(), None)
    if not isinstance(numeric_level, int):
        raise ValueError(f"Nível de log inválido: '{level}'")

    for logger in logging.Logger.manager.loggerDict.values():
        if not isinstance(logger, logging.Logger) or not logger.handlers:
            continue
        logger.setLevel(numeric_level)
        for handler in logger.handlers:
            if isinstance(handler, logging.FileHandler):
                handler.setLevel(numeric_level)
            else:
                handler.setLevel(max(numeric_level, logging.WARNING))


# Logger principal do projeto
main_logger = setup_logger("loopsched")


def get_logger(name: str | None = None) -> logging.Logger:
    """
    Retorna um logger configurado para o módulo específico.

    Args:
        name: Nome do módulo (se None, usa o logger principal)

    Returns:
        Logger configurado
    """
    if name:
        return setup_logger(name)
    return main_logger
