"""
Hierarquia de exceções do loopsched.

Cada exceção carrega o código de saída que a CLI devolve quando ela escapa
até o topo (0 ok, 2 validação/configuração, 3 falha numérica).
"""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class LoopSchedError(Exception):
    """Erro base do projeto."""

    exit_code: int = EXIT_VALIDATION


class InvalidParameterError(LoopSchedError, ValueError):
    """Parâmetro fora do domínio (θ não finito, K_f < K_l, x fora de (0, 1)...)."""


class DegenerateInputError(LoopSchedError, ValueError):
    """Fórmula indefinida para a entrada (ex.: CSS com σ = 0 ou P = 1)."""


class ConfigurationError(LoopSchedError):
    """Variável de ambiente ou string de política mal formada."""


class EmptyRangeError(LoopSchedError, ValueError):
    """Laço com N = 0 iterações."""


class LoopExecutionError(LoopSchedError):
    """O corpo do laço levantou uma exceção; a execução foi abortada."""


class ContractViolationError(LoopSchedError):
    """Sequência de chunks inconsistente com a carga (soma != N, ℓ fora de [1, L])."""


class IllConditionedError(LoopSchedError):
    """Fatoração de Cholesky falhou mesmo após o escalonamento do jitter."""

    exit_code = EXIT_NUMERICAL


class AcquisitionError(LoopSchedError):
    """Função de aquisição devolveu valor não finito."""

    exit_code = EXIT_NUMERICAL


class DatasetValidationError(LoopSchedError):
    """Arquivo de dataset viola o schema."""


class UnsupportedVersionError(DatasetValidationError):
    """Versão de formato do dataset não suportada."""


class DatasetIOError(LoopSchedError):
    """Falha de leitura/escrita em um arquivo de dataset."""


class DatasetLockedError(DatasetIOError):
    """Outro processo do tuner já detém o lock do dataset."""


class ObjectiveError(LoopSchedError):
    """A função objetivo falhou durante o laço fechado; `trace` guarda as avaliações já feitas."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = list(trace or [])
