#!/usr/bin/env python3
"""
Couche physique - probabilités de succès/échec par slot

Abstraction par seuil de décodage : un paquet est décodé si son SINR dépasse
gamma. Les gains d'évanouissement sont de Rayleigh (puissance exponentielle
de moyenne 1), indépendants d'un slot à l'autre.

Les probabilités sont calculées une fois à partir de ChannelParams puis
transmises aux autres modules sous forme de LinkFailureProbs.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from scripts.utils.errors import ModelDomainError
from scripts.utils.validators import validate_channel_params, validate_probability

logger = logging.getLogger(__name__)


def db_to_linear(value_db: float) -> float:
    """Conversion dB -> échelle linéaire"""
    return 10.0 ** (value_db / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Paramètres de couche physique (échelle linéaire)"""
    p_l: float
    p_d: float
    sigma2_l: float
    sigma2_d: float
    gamma: float

    def __post_init__(self):
        try:
            validate_channel_params(self.p_l, self.p_d, self.sigma2_l, self.sigma2_d, self.gamma)
        except ValueError as e:
            raise ModelDomainError(f"Paramètres de canal invalides: {e}") from None

    @classmethod
    def from_db(cls, p_l_db: float, p_d_db: float, sigma2_l_db: float,
                sigma2_d_db: float, gamma_db: float) -> 'ChannelParams':
        """Construit les paramètres depuis des valeurs en dB"""
        return cls(
            p_l=db_to_linear(p_l_db),
            p_d=db_to_linear(p_d_db),
            sigma2_l=db_to_linear(sigma2_l_db),
            sigma2_d=db_to_linear(sigma2_d_db),
            gamma=db_to_linear(gamma_db),
        )

    def to_dict(self) -> dict:
        return {
            "p_l": self.p_l,
            "p_d": self.p_d,
            "sigma2_l": self.sigma2_l,
            "sigma2_d": self.sigma2_d,
            "gamma": self.gamma,
        }


@dataclass(frozen=True)
class LinkFailureProbs:
    """
    Probabilités d'échec par slot

    rho_l_0 / rho_l_1 : paquet LTE perdu quand le D2D est inactif / émet
    rho_d_1 : paquet D2D perdu quand il émet (rho_d(0) = 0 par convention)
    """
    rho_l_0: float
    rho_l_1: float
    rho_d_1: float

    def __post_init__(self):
        try:
            validate_probability(self.rho_l_0, "rho_l0")
            validate_probability(self.rho_l_1, "rho_l1")
            validate_probability(self.rho_d_1, "rho_d1")
        except ValueError as e:
            raise ModelDomainError(str(e)) from None
        if self.rho_l_0 > self.rho_l_1:
            raise ModelDomainError(
                f"rho_l0 ({self.rho_l_0}) doit être <= rho_l1 ({self.rho_l_1}) : "
                "l'interférence ne peut qu'empirer le lien LTE"
            )

    def rho_l(self, u: int) -> float:
        """Probabilité d'échec LTE sous l'action u"""
        return self.rho_l_1 if u else self.rho_l_0

    def rho_d(self, u: int) -> float:
        """Probabilité d'échec D2D sous l'action u"""
        return self.rho_d_1 if u else 0.0

    def to_dict(self) -> dict:
        return {"rho_l0": self.rho_l_0, "rho_l1": self.rho_l_1, "rho_d1": self.rho_d_1}


@dataclass(frozen=True)
class FadingEstimate:
    """Estimation Monte Carlo des probabilités d'échec"""
    probs: LinkFailureProbs
    stderr_l_0: float
    stderr_l_1: float
    stderr_d_1: float
    draws: int


def success_probability(gamma: float, sigma2: float, p_x: float, p_y: float) -> float:
    """
    Probabilité que le SINR du lien x dépasse gamma sous Rayleigh

    exp(-gamma*sigma2/p_x) / (1 + gamma*p_y/p_x)

    Args:
        gamma: Seuil de décodage (> 0)
        sigma2: Variance du bruit au récepteur x (>= 0)
        p_x: Puissance reçue utile (> 0)
        p_y: Puissance reçue de l'interféreur (>= 0, 0 si inactif)

    Raises:
        ModelDomainError: Si p_x ou gamma est non positif, ou sigma2/p_y négatif
    """
    if not (gamma > 0):
        raise ModelDomainError(f"gamma doit être > 0 (reçu {gamma})")
    if not (p_x > 0):
        raise ModelDomainError(f"p_x doit être > 0 (reçu {p_x})")
    if sigma2 < 0 or p_y < 0:
        raise ModelDomainError("sigma2 et p_y doivent être >= 0")
    return math.exp(-gamma * sigma2 / p_x) / (1.0 + gamma * p_y / p_x)


def failure_probs(params: ChannelParams) -> LinkFailureProbs:
    """Probabilités d'échec des deux liens pour chaque action D2D"""
    rho_l_0 = 1.0 - success_probability(params.gamma, params.sigma2_l, params.p_l, 0.0)
    rho_l_1 = 1.0 - success_probability(params.gamma, params.sigma2_l, params.p_l, params.p_d)
    rho_d_1 = 1.0 - success_probability(params.gamma, params.sigma2_d, params.p_d, params.p_l)
    logger.info(f"Probabilités d'échec: rho_l0={rho_l_0:.6g} rho_l1={rho_l_1:.6g} rho_d1={rho_d_1:.6g}")
    return LinkFailureProbs(rho_l_0=rho_l_0, rho_l_1=rho_l_1, rho_d_1=rho_d_1)


def decode_outcomes(params: ChannelParams, gains: np.ndarray, transmit: np.ndarray):
    """
    Décide le décodage des paquets à partir de gains tirés explicitement

    Args:
        params: Paramètres de canal
        gains: Tableau (4, n) des gains c_ll, c_dl, c_dd, c_ld
        transmit: Tableau booléen (n,) des actions D2D

    Returns:
        (lte_ok, d2d_ok) : tableaux booléens ; d2d_ok est faux quand le D2D n'émet pas
    """
    c_ll, c_dl, c_dd, c_ld = gains
    interference = np.where(transmit, params.p_d * c_dl, 0.0)
    lte_ok = params.p_l * c_ll >= params.gamma * (params.sigma2_l + interference)
    d2d_ok = transmit & (params.p_d * c_dd >= params.gamma * (params.sigma2_d + params.p_l * c_ld))
    return lte_ok, d2d_ok


def sample_failure_probs(params: ChannelParams, draws: int = 1_000_000,
                         seed: Optional[int] = 0, chunk: int = 1_000_000) -> FadingEstimate:
    """
    Estime les probabilités d'échec en tirant les gains et en seuillant le SINR

    Args:
        params: Paramètres de canal
        draws: Nombre de tirages
        seed: Graine du générateur
        chunk: Taille des blocs de tirage (mémoire bornée)

    Returns:
        FadingEstimate avec erreurs standard binomiales
    """
    if draws < 1:
        raise ValueError("draws doit être >= 1")
    rng = np.random.default_rng(seed)
    failures = np.zeros(3, dtype=np.int64)
    done = 0
    while done < draws:
        n = min(chunk, draws - done)
        gains = rng.exponential(1.0, size=(4, n))
        idle_ok, _ = decode_outcomes(params, gains, np.zeros(n, dtype=bool))
        busy_ok, d2d_ok = decode_outcomes(params, gains, np.ones(n, dtype=bool))
        failures += [n - idle_ok.sum(), n - busy_ok.sum(), n - d2d_ok.sum()]
        done += n

    rates = failures / draws
    stderr = np.sqrt(rates * (1.0 - rates) / draws)
    logger.info(f"Tirage de {draws} gains: rho empiriques {rates.round(6).tolist()}")
    # mêmes gains pour les deux actions : rho_l0 <= rho_l1 tirage par tirage
    probs = LinkFailureProbs(
        rho_l_0=float(rates[0]),
        rho_l_1=float(rates[1]),
        rho_d_1=float(rates[2]),
    )
    return FadingEstimate(
        probs=probs,
        stderr_l_0=float(stderr[0]),
        stderr_l_1=float(stderr[1]),
        stderr_d_1=float(stderr[2]),
        draws=draws,
    )
