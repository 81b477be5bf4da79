#!/usr/bin/env python3
"""
Module de validation des entrées
Fournit des validateurs pydantic pour tous les paramètres numériques du
modèle (puissances, bruits, seuils, probabilités, distribution beta), le
schéma du fichier de politique et les chemins de sortie.
"""

import math
import os
from pathlib import Path
from typing import Any, List, Literal, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


class ProbabilityValidator(BaseModel):
    """Validateur pour une probabilité"""
    value: float

    @field_validator('value', mode='before')
    @classmethod
    def validate_probability(cls, value: Any) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError("La probabilité doit être un nombre")
        value = float(value)
        if not math.isfinite(value) or value < 0.0 or value > 1.0:
            raise ValueError(f"Probabilité hors de [0, 1]: {value}")
        return value


class ChannelParamsModel(BaseModel):
    """Validateur pour les paramètres de couche physique (unités linéaires)"""
    model_config = ConfigDict(allow_inf_nan=False)

    p_l: float = Field(..., gt=0)
    p_d: float = Field(..., gt=0)
    sigma2_l: float = Field(..., ge=0)
    sigma2_d: float = Field(..., ge=0)
    gamma: float = Field(..., gt=0)


class BetaValidator(BaseModel):
    """Validateur pour la distribution de terminaison du GoP"""
    n_max: int = Field(..., ge=1)
    beta: List[float]

    @field_validator('beta')
    @classmethod
    def validate_entries(cls, value: List[float]) -> List[float]:
        for i, b in enumerate(value, 1):
            if not math.isfinite(b) or b < 0.0 or b > 1.0:
                raise ValueError(f"beta({i}) hors de [0, 1]: {b}")
        return value

    @model_validator(mode='after')
    def validate_length(self) -> 'BetaValidator':
        if len(self.beta) != self.n_max:
            raise ValueError(f"beta doit contenir {self.n_max} valeurs (reçu {len(self.beta)})")
        if self.beta[-1] != 1.0:
            raise ValueError("beta(N) doit valoir 1")
        return self


class PolicyEntryModel(BaseModel):
    """Ligne du fichier de politique"""
    i_rx: Literal[0, 1]
    n_tx: int = Field(..., ge=0)
    n_rx: int = Field(..., ge=0)
    p_transmit: float = Field(..., ge=0.0, le=1.0, allow_inf_nan=False)


class PolicyFileModel(BaseModel):
    """Schéma du fichier de politique"""
    model_config = ConfigDict(extra='forbid')

    n_max: int = Field(..., ge=1)
    beta: Union[Literal["fixed"], List[float]]
    rho_l0: float = Field(..., ge=0.0, le=1.0)
    rho_l1: float = Field(..., ge=0.0, le=1.0)
    rho_d1: float = Field(..., ge=0.0, le=1.0)
    policy: List[PolicyEntryModel]


class IntegerRangeValidator(BaseModel):
    """Validateur pour les entiers dans une plage"""
    value: int = Field(...)
    min_value: Optional[int] = None
    max_value: Optional[int] = None

    @model_validator(mode='after')
    def validate_range(self) -> 'IntegerRangeValidator':
        if self.min_value is not None and self.value < self.min_value:
            raise ValueError(f"Valeur doit être >= {self.min_value}")
        if self.max_value is not None and self.value > self.max_value:
            raise ValueError(f"Valeur doit être <= {self.max_value}")
        return self


def format_validation_errors(error: ValidationError) -> List[str]:
    """
    Convertit une ValidationError pydantic en diagnostics lisibles

    Args:
        error: Erreur pydantic

    Returns:
        Une ligne "champ.sous_champ: message" par problème
    """
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item.get("loc", ())) or "<racine>"
        lines.append(f"{location}: {item.get('msg', 'invalide')}")
    return lines


def validate_probability(value: float, name: str = "probabilité") -> float:
    """
    Valide qu'une valeur est une probabilité

    Args:
        value: Valeur à valider
        name: Nom du paramètre pour le message d'erreur

    Returns:
        Valeur validée (float)

    Raises:
        ValueError: Si la valeur est hors de [0, 1]
    """
    try:
        return ProbabilityValidator(value=value).value
    except ValidationError as e:
        raise ValueError(f"{name}: {format_validation_errors(e)[0]}") from None


def validate_channel_params(p_l: float, p_d: float, sigma2_l: float,
                            sigma2_d: float, gamma: float) -> ChannelParamsModel:
    """
    Valide les paramètres de couche physique

    Raises:
        ValueError: Si une puissance ou le seuil est non positif, ou un bruit négatif
    """
    try:
        return ChannelParamsModel(p_l=p_l, p_d=p_d, sigma2_l=sigma2_l,
                                  sigma2_d=sigma2_d, gamma=gamma)
    except ValidationError as e:
        raise ValueError("; ".join(format_validation_errors(e))) from None


def validate_beta(beta: Sequence[float], n_max: int) -> List[float]:
    """
    Valide la distribution de terminaison beta(1..N)

    Returns:
        Liste validée de N probabilités

    Raises:
        ValueError: Si N < 1, une entrée hors [0, 1] ou beta(N) != 1
    """
    try:
        return BetaValidator(n_max=n_max, beta=[float(b) for b in beta]).beta
    except ValidationError as e:
        raise ValueError("; ".join(format_validation_errors(e))) from None


def validate_integer_range(value: int, min_val: Optional[int] = None,
                           max_val: Optional[int] = None) -> int:
    """
    Valide qu'un entier est dans une plage donnée

    Raises:
        ValueError: Si la valeur est hors plage
    """
    validator = IntegerRangeValidator(value=value, min_value=min_val, max_value=max_val)
    return validator.value


def validate_output_path(path: Union[str, Path]) -> Path:
    """
    Valide un chemin de sortie : le dossier parent doit exister et être accessible en écriture

    Raises:
        ValueError: Si le chemin n'est pas inscriptible
    """
    target = Path(path).expanduser()
    parent = target.parent if str(target.parent) else Path(".")
    if not parent.is_dir():
        raise ValueError(f"Dossier de sortie inexistant: {parent}")
    if not os.access(parent, os.W_OK):
        raise ValueError(f"Dossier de sortie non inscriptible: {parent}")
    if target.is_dir():
        raise ValueError(f"Le chemin de sortie est un dossier: {target}")
    return target


def validate_file_path(path: Union[str, Path], must_exist: bool = True,
                       allowed_extensions: Optional[List[str]] = None) -> Path:
    """
    Valide un chemin de fichier en lecture

    Raises:
        ValueError: Si le fichier n'existe pas ou a une extension non autorisée
    """
    target = Path(path).expanduser()
    if must_exist and not target.is_file():
        raise ValueError(f"Le fichier n'existe pas: {target}")
    if allowed_extensions:
        if not any(target.suffix.lower() == ext.lower() for ext in allowed_extensions):
            raise ValueError(f"Extension non autorisée. Autorisées: {allowed_extensions}")
    return target


def parse_index_list(text: str) -> List[int]:
    """
    Parse une liste d'indices "121,241"

    Raises:
        ValueError: Si un élément n'est pas un entier >= 1
    """
    indices = []
    for raw in text.split(","):
        raw = raw.strip()
        if not raw:
            continue
        try:
            index = int(raw)
        except ValueError:
            raise ValueError(f"Indice de trame invalide: {raw!r}") from None
        indices.append(validate_integer_range(index, min_val=1))
    return indices


def parse_grid(text: str) -> List[float]:
    """
    Parse une grille "debut:fin:pas" (bornes incluses)

    Raises:
        ValueError: Si le format est invalide ou le pas non positif
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"Grille attendue au format debut:fin:pas, reçu {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"Grille non numérique: {text!r}") from None
    if step <= 0 or stop < start:
        raise ValueError(f"Grille vide ou pas non positif: {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]
