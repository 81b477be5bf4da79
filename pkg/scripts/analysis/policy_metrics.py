#!/usr/bin/env python3
"""
Politiques D2D et métriques analytiques

- Policy : politique stationnaire randomisée (tabulaire, constante, heuristique)
- evaluate : taux de livraison LTE D_LTE et débit D2D T_D2D en régime stationnaire
- formes closes de la politique constante de référence
- modèle affine MSE = D_e + C p_err sigma_e et PSNR
- lecture/écriture du fichier de politique

Le taux d'erreur trame est p_err = 1 - D_LTE.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy.optimize import bisect

from scripts.model.channel import LinkFailureProbs
from scripts.model.gop_model import GopChain, GopConfig, enumerate_states, stationary_distribution
from scripts.utils.constants import EXPORT_CONFIG, POLICY_FILE_FIELDS, PolicyKind, PsnrConvention
from scripts.utils.errors import ModelDomainError, PolicyFileError
from scripts.utils.validators import (
    PolicyFileModel, format_validation_errors, validate_integer_range, validate_probability,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Policy:
    """
    Politique stationnaire randomisée : état -> probabilité d'émettre (u=1)

    - tabular : table indexée par l'index d'état de la chaîne
    - constant : p_tx dans tous les états
    - heuristic : 0 sur l'I-frame, p_tx ailleurs
    - heuristic-aggressive : 0 sur l'I-frame, 1 si l'I-frame est perdue, p_tx sinon
    """
    kind: PolicyKind
    p_tx: Optional[float] = None
    table: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        kind = PolicyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == PolicyKind.TABULAR:
            if self.table is None:
                raise ModelDomainError("Une politique tabulaire exige une table")
            table = tuple(float(v) for v in self.table)
            if not all(0.0 <= v <= 1.0 for v in table):
                raise ModelDomainError("Probabilité d'émission hors de [0, 1] dans la table")
            object.__setattr__(self, "table", table)
        else:
            if self.p_tx is None:
                raise ModelDomainError(f"La politique {kind.value} exige p_tx")
            try:
                object.__setattr__(self, "p_tx", validate_probability(self.p_tx, "p_tx"))
            except ValueError as e:
                raise ModelDomainError(str(e)) from None

    @classmethod
    def constant(cls, p_tx: float) -> 'Policy':
        return cls(kind=PolicyKind.CONSTANT, p_tx=p_tx)

    @classmethod
    def heuristic(cls, p_tx: float) -> 'Policy':
        return cls(kind=PolicyKind.HEURISTIC, p_tx=p_tx)

    @classmethod
    def heuristic_aggressive(cls, p_tx: float) -> 'Policy':
        return cls(kind=PolicyKind.HEURISTIC_AGGRESSIVE, p_tx=p_tx)

    @classmethod
    def tabular(cls, table) -> 'Policy':
        return cls(kind=PolicyKind.TABULAR, table=tuple(np.asarray(table, dtype=float).tolist()))

    def transmit_probabilities(self, chain: GopChain) -> np.ndarray:
        """Probabilité d'émission pour chaque état de la chaîne"""
        if self.kind == PolicyKind.TABULAR:
            if len(self.table) != chain.n_states:
                raise ModelDomainError(
                    f"Table de {len(self.table)} états pour une chaîne de {chain.n_states} états"
                )
            return np.array(self.table)

        q = np.full(chain.n_states, self.p_tx)
        if self.kind in (PolicyKind.HEURISTIC, PolicyKind.HEURISTIC_AGGRESSIVE):
            q[chain.iframe_mask] = 0.0
        if self.kind == PolicyKind.HEURISTIC_AGGRESSIVE:
            q[chain.irx0_mask] = 1.0
        return q

    def action_distribution(self, chain: GopChain) -> np.ndarray:
        """Distribution (S, 2) des actions par état"""
        q = self.transmit_probabilities(chain)
        return np.column_stack([1.0 - q, q])

    @property
    def label(self) -> str:
        if self.kind == PolicyKind.TABULAR:
            return "tabular"
        return f"{self.kind.value}(p_tx={self.p_tx:g})"


@dataclass(frozen=True)
class MetricReport:
    """Métriques analytiques d'une politique"""
    d_lte: float
    t_d2d: float
    pi: np.ndarray

    @property
    def p_err(self) -> float:
        return 1.0 - self.d_lte


@dataclass(frozen=True)
class MseModelParams:
    """Paramètres du modèle affine de distorsion"""
    d_e: float = 1.0
    c: float = 1.0
    sigma_e: float = 100.0
    w: int = 8

    def __post_init__(self):
        for name in ("d_e", "c", "sigma_e"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ModelDomainError(f"{name} doit être >= 0 (reçu {value})")
        try:
            validate_integer_range(self.w, min_val=1)
        except ValueError as e:
            raise ModelDomainError(f"w invalide: {e}") from None

    @property
    def corrupted_mse(self) -> float:
        """MSE d'une trame corrompue : saturation du modèle affine"""
        return self.d_e + self.c * self.sigma_e


def evaluate(chain: GopChain, policy: Policy) -> MetricReport:
    """
    D_LTE = sum pi*omega et T_D2D = sum pi*phi en régime stationnaire

    Raises:
        NumericalFailure: Si la distribution stationnaire n'est pas atteinte
    """
    pi = stationary_distribution(chain, policy)
    d_lte = float(np.clip((pi * chain.omega).sum(), 0.0, 1.0))
    t_d2d = float(np.clip((pi * chain.phi).sum(), 0.0, 1.0))
    logger.info(f"Évaluation {getattr(policy, 'label', 'vecteur')}: D_LTE={d_lte:.6g} T_D2D={t_d2d:.6g}")
    return MetricReport(d_lte=d_lte, t_d2d=t_d2d, pi=pi)


def _mixed_rho(rho0: float, rho1: float, p_tx: float) -> float:
    return rho1 * p_tx + rho0 * (1.0 - p_tx)


def baseline_delivery_rate(n: int, rho0: float, rho1: float, p_tx: float) -> float:
    """
    Forme close de D_LTE pour la politique constante, GoP fixe de N+1 trames

    (1 - rho)(N(1 - rho) + 1)/(N + 1) avec rho = rho1 p_tx + rho0 (1 - p_tx)
    """
    validate_integer_range(n, min_val=1)
    rho = _mixed_rho(validate_probability(rho0, "rho0"), validate_probability(rho1, "rho1"),
                     validate_probability(p_tx, "p_tx"))
    return (1.0 - rho) * (n * (1.0 - rho) + 1.0) / (n + 1.0)


def baseline_throughput(rho_d1: float, p_tx: float) -> float:
    """T_D2D = p_tx (1 - rho_d(1)) pour la politique constante"""
    return validate_probability(p_tx, "p_tx") * (1.0 - validate_probability(rho_d1, "rho_d1"))


def baseline_probability_for_rate(n: int, rho0: float, rho1: float, delta: float) -> float:
    """
    p_tx de la politique constante dont le taux de livraison vaut delta

    Racine trouvée par bisection ; bornée à [0, 1] quand delta sort de
    l'intervalle [D_LTE(1), D_LTE(0)].
    """
    high_rate = baseline_delivery_rate(n, rho0, rho1, 0.0)
    low_rate = baseline_delivery_rate(n, rho0, rho1, 1.0)
    if delta >= high_rate:
        return 0.0
    if delta <= low_rate:
        return 1.0
    return float(bisect(lambda p: baseline_delivery_rate(n, rho0, rho1, p) - delta,
                        0.0, 1.0, xtol=1e-15, maxiter=200))


def mse_from_error_rate(p_err: float, params: MseModelParams) -> float:
    """MSE = D_e + C p_err sigma_e"""
    p_err = validate_probability(p_err, "p_err")
    return params.d_e + params.c * p_err * params.sigma_e


def psnr_from_mse(mse: float, w: int,
                  convention: Union[PsnrConvention, str] = PsnrConvention.LINEAR) -> float:
    """
    PSNR = 10 log10(K / MSE)

    K = 2^W (convention "linear") ou (2^W - 1)^2 (convention "standard")

    Raises:
        ModelDomainError: Si mse <= 0
    """
    if not mse > 0:
        raise ModelDomainError(f"MSE doit être > 0 (reçu {mse})")
    convention = PsnrConvention(convention)
    peak = 2.0 ** w if convention == PsnrConvention.LINEAR else (2.0 ** w - 1.0) ** 2
    return 10.0 * math.log10(peak / mse)


def psnr_for_report(report: MetricReport, params: MseModelParams,
                    convention: Union[PsnrConvention, str] = PsnrConvention.LINEAR) -> float:
    """PSNR associé au taux de livraison d'une évaluation"""
    mse = mse_from_error_rate(min(max(report.p_err, 0.0), 1.0), params)
    return psnr_from_mse(mse, params.w, convention)


@dataclass(frozen=True)
class PolicyDocument:
    """Contenu d'un fichier de politique"""
    gop: GopConfig
    failure_probs: LinkFailureProbs
    policy: Policy

    def policy_for(self, chain: GopChain) -> Policy:
        """Politique applicable à une chaîne de même espace d'états"""
        if chain.gop.n_max != self.gop.n_max:
            raise PolicyFileError("<politique>", [
                f"n_max={self.gop.n_max} incompatible avec la chaîne (n_max={chain.gop.n_max})"
            ])
        return self.policy


def save_policy(path: Union[str, Path], chain: GopChain, policy: Policy) -> Path:
    """Écrit le fichier de politique auto-descriptif"""
    q = policy.transmit_probabilities(chain)
    probs = chain.failure_probs
    fields = {
        "n_max": chain.gop.n_max,
        "beta": chain.gop.beta_field(),
        "rho_l0": probs.rho_l_0,
        "rho_l1": probs.rho_l_1,
        "rho_d1": probs.rho_d_1,
        "policy": [
            {"i_rx": s.i_rx, "n_tx": s.n_tx, "n_rx": s.n_rx, "p_transmit": float(q[k])}
            for k, s in enumerate(chain.states)
        ],
    }
    document = {key: fields[key] for key in POLICY_FILE_FIELDS}
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, **EXPORT_CONFIG["json"])
    logger.info(f"Politique écrite: {path}")
    return path


def load_policy(path: Union[str, Path]) -> PolicyDocument:
    """
    Lit un fichier de politique

    Raises:
        PolicyFileError: Avec diagnostics ligne/colonne (JSON) ou champ (schéma)
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as e:
        raise PolicyFileError(str(path), [f"lecture impossible: {e}"]) from None
    except json.JSONDecodeError as e:
        raise PolicyFileError(str(path), [f"ligne {e.lineno}, colonne {e.colno}: {e.msg}"]) from None

    try:
        model = PolicyFileModel.model_validate(raw)
    except ValidationError as e:
        raise PolicyFileError(str(path), format_validation_errors(e)) from None

    try:
        gop = GopConfig.fixed(model.n_max) if model.beta == "fixed" else GopConfig(model.n_max, tuple(model.beta))
        probs = LinkFailureProbs(rho_l_0=model.rho_l0, rho_l_1=model.rho_l1, rho_d_1=model.rho_d1)
    except ModelDomainError as e:
        raise PolicyFileError(str(path), [str(e)]) from None

    states = enumerate_states(model.n_max)
    index = {s: k for k, s in enumerate(states)}
    table = [None] * len(states)
    problems = []
    for position, entry in enumerate(model.policy):
        key = (entry.i_rx, entry.n_tx, entry.n_rx)
        k = index.get(key)
        if k is None:
            problems.append(f"policy.{position}: état invalide {key}")
        elif table[k] is not None:
            problems.append(f"policy.{position}: état dupliqué {key}")
        else:
            table[k] = entry.p_transmit
    missing = [states[k] for k, v in enumerate(table) if v is None]
    if missing:
        problems.append(f"policy: {len(missing)} état(s) manquant(s), premier {tuple(missing[0])}")
    if problems:
        raise PolicyFileError(str(path), problems)

    logger.info(f"Politique lue: {path} ({len(states)} états)")
    return PolicyDocument(gop=gop, failure_probs=probs, policy=Policy.tabular(table))
