#!/usr/bin/env python3
"""
Hiérarchie d'exceptions Coex Toolkit

Chaque erreur porte les informations nécessaires au diagnostic et au choix
du code de sortie côté CLI.
"""

from typing import Dict, List, Optional


class CoexError(Exception):
    """Erreur racine du toolkit"""


class ModelDomainError(CoexError, ValueError):
    """Paramètre physique ou de modèle hors domaine"""


class ConfigError(CoexError, ValueError):
    """Configuration invalide ou incohérente"""


class InfeasibleError(CoexError):
    """Contrainte de livraison impossible à satisfaire"""

    def __init__(self, delta: float, ceiling: Optional[float] = None):
        self.delta = delta
        self.ceiling = ceiling
        message = f"Contrainte infaisable : delta={delta:.6g}"
        if ceiling is not None:
            message += f" dépasse le taux de livraison maximal {ceiling:.6f}"
        super().__init__(message)


class NumericalFailure(CoexError):
    """Tolérances numériques non atteintes"""

    def __init__(self, message: str, residuals: Optional[Dict[str, float]] = None):
        self.residuals = dict(residuals or {})
        if self.residuals:
            details = ", ".join(f"{k}={v:.3e}" for k, v in self.residuals.items())
            message = f"{message} ({details})"
        super().__init__(message)


class PolicyFileError(CoexError, ValueError):
    """Fichier de politique mal formé"""

    def __init__(self, path: str, problems: List[str]):
        self.path = path
        self.problems = list(problems)
        super().__init__(f"Fichier de politique invalide {path}: " + "; ".join(self.problems))
