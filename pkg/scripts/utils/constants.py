#!/usr/bin/env python3
"""
Constantes centralisées Coex Toolkit

Centralise toutes les valeurs constantes du projet : paramètres par défaut
du scénario de référence, tolérances numériques, formats de fichiers et
codes de sortie.
"""

from typing import Final
from enum import Enum, IntEnum


class PolicyKind(str, Enum):
    """Familles de politiques D2D supportées"""
    TABULAR = "tabular"
    CONSTANT = "constant"
    HEURISTIC = "heuristic"
    HEURISTIC_AGGRESSIVE = "heuristic-aggressive"


class PsnrConvention(str, Enum):
    """Convention de crête pour le PSNR"""
    LINEAR = "linear"      # K_bps = 2^W
    STANDARD = "standard"  # (2^W - 1)^2

    @classmethod
    def _missing_(cls, value):
        # "paper" : autre nom de la crête 2^W
        if isinstance(value, str) and value.lower() == "paper":
            return cls.LINEAR
        return None


class ExitCode(IntEnum):
    """Contrat des codes de sortie CLI"""
    OK = 0
    USAGE = 2
    INFEASIBLE = 3
    NUMERICAL = 4


# Scénario de référence : GoP fixe, probabilités d'échec fixées à la main
DEFAULT_MODEL: Final[dict] = {
    "n_max": 24,
    "beta": "fixed",
    "rho_l0": 0.01,
    "rho_l1": 0.1,
    "rho_d1": 0.1,
}

DEFAULT_SOLVER: Final[dict] = {
    "feasibility_tol": 1e-10,
    "optimality_tol": 1e-10,
    "residual_tol": 1e-8,
    "visit_tol": 1e-12,
    "method": "highs-ds",
}

DEFAULT_SIMULATION: Final[dict] = {
    "slots": 100_000,
    "seed": 0,
    "replications": 1,
    "batches": 20,
    "jobs": 1,
}

# Les constantes vidéo réelles sont inconnues : valeurs purement illustratives
DEFAULT_MSE: Final[dict] = {
    "d_e": 1.0,
    "c": 1.0,
    "sigma_e": 100.0,
    "w": 8,
    "psnr_convention": PsnrConvention.LINEAR.value,
}

DEFAULT_OUTPUT: Final[dict] = {
    "precision": 6,
}

# Tolérances numériques
KERNEL_ROW_TOL: Final[float] = 1e-12
STATIONARY_RESIDUAL_TOL: Final[float] = 1e-10
RANDOMIZATION_EPS: Final[float] = 1e-6
# HiGHS refuse les tolérances sous 1e-10
HIGHS_MIN_TOL: Final[float] = 1e-10
HIGHS_TOL_RATIO: Final[float] = 100.0

# Variable d'environnement et fichier de configuration local
CONFIG_ENV_VAR: Final[str] = "COEX_CONFIG"
LOCAL_CONFIG_FILE: Final[str] = "coex_config.json"

# En-têtes CSV (contrat de fichiers)
CURVE_COLUMNS: Final[list[str]] = [
    "delta", "t_d2d", "d_lte_achieved", "p_tx_iframe",
    "p_tx_dframe_irx1", "p_tx_dframe_irx0", "feasible",
]

TRACE_COLUMNS: Final[list[str]] = [
    "slot", "frame_kind", "gop_index", "lte_delivered", "d2d_action",
    "d2d_delivered", "frame_corrupted", "mse",
]

SCATTER_COLUMNS: Final[list[str]] = [
    "policy_kind", "p_tx", "t_d2d", "mean_mse", "stderr_mse",
]

REPLICATION_COLUMNS: Final[list[str]] = ["replication", "d_lte", "t_d2d"]

CHAIN_COLUMNS: Final[list[str]] = ["index", "i_rx", "n_tx", "n_rx"]

# Champs du fichier de politique
POLICY_FILE_FIELDS: Final[list[str]] = [
    "n_max", "beta", "rho_l0", "rho_l1", "rho_d1", "policy",
]

# Export
EXPORT_CONFIG: Final[dict[str, dict]] = {
    "json": {"indent": 2, "ensure_ascii": False},
    "csv": {"index": False},
}
