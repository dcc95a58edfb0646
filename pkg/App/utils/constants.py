"""
Constantes e valores padrão utilizados pelo escalonador, simulador e tuner.
"""

from typing import Final

# Gramática aceita em LOOPSCHED_SCHEDULE e na CLI
POLICY_GRAMMAR: Final[str] = (
    "static | ss | css:<K> | guided | fss:<theta> | fac2 | trap1 | taper3 "
    "| tss:<Kf>,<Kl> | taper:<valpha>,<Kmin> | bo_fss"
)
DEFAULT_POLICY: Final[str] = "fac2"

# TAPER3: v_α fixo em 3, K_min = 1
TAPER3_VALPHA: Final[float] = 3.0
TAPER3_KMIN: Final[int] = 1

# Reparametrização θ(x) = 2^(19x − 10), 0 < x < 1
THETA_EXP_SCALE: Final[float] = 19.0
THETA_EXP_OFFSET: Final[float] = 10.0

# Bayesian optimization
SOBOL_EPS: Final[float] = 1e-6
DEFAULT_N_INIT: Final[int] = 4
DEFAULT_N_ITERS: Final[int] = 20
DEFAULT_MES_SAMPLES: Final[int] = 10
DEFAULT_HP_SAMPLES: Final[int] = 10
DEFAULT_BURN_IN: Final[int] = 500
DEFAULT_THIN: Final[int] = 10
LOCALITY_SUBSAMPLE_RATIO: Final[int] = 4   # L/k = 4
MAX_VALUE_GRID_SIZE: Final[int] = 512
VALIDATION_GRID_SIZE: Final[int] = 1024
INNER_X_TOL: Final[float] = 1e-3
DIRECT_MAXFUN: Final[int] = 2000
DIRECT_PENALTY: Final[float] = 1e300
MIN_PREDICTIVE_STD: Final[float] = 1e-12

# Gaussian process
JITTER_BASE: Final[float] = 1e-8
JITTER_MAX: Final[float] = 1e-4
JITTER_GROWTH: Final[float] = 10.0

# Simulador
BRUTE_FORCE_GRID_SIZE: Final[int] = 256

# Avaliação
DEFAULT_BOOTSTRAP_RESAMPLES: Final[int] = 10_000
DEFAULT_CONFIDENCE_LEVEL: Final[float] = 0.95
R90_PERCENTILE: Final[float] = 90.0

# Persistência
DATASET_FORMAT_VERSION: Final[int] = 1
FLOAT_SIGNIFICANT_DIGITS: Final[int] = 17
TUNER_VERSION: Final[str] = "loopsched-1.0.0"

# Cabeçalhos CSV com contrato fixo
REPORT_CSV_COLUMNS: Final[list[str]] = ["iter", "x", "theta", "total_s", "best_s"]
TRACE_CSV_COLUMNS: Final[list[str]] = ["t", "x", "theta", "total_s"]
