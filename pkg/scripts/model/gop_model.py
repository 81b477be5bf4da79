#!/usr/bin/env python3
"""
Modèle markovien de la transmission d'un GoP sur le lien LTE

Un état (i_rx, n_tx, n_rx) suit l'avancement du GoP courant :
- i_rx  : 1 si l'I-frame du GoP a été décodée
- n_tx  : indice de la trame différentielle émise dans ce slot (0 = I-frame)
- n_rx  : trames différentielles reçues avant ce slot

L'action u vaut 0 (D2D inactif) ou 1 (D2D émet). Le noyau p(s'|s,u) et les
récompenses omega (trames LTE créditées) et phi (paquets D2D délivrés) sont
construits une fois pour toutes par build_chain.
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from scripts.model.channel import LinkFailureProbs
from scripts.utils.constants import CHAIN_COLUMNS, KERNEL_ROW_TOL, STATIONARY_RESIDUAL_TOL
from scripts.utils.errors import ModelDomainError, NumericalFailure
from scripts.utils.validators import validate_beta

if TYPE_CHECKING:
    from scripts.analysis.policy_metrics import Policy

logger = logging.getLogger(__name__)


class Action(IntEnum):
    """Action du transmetteur D2D"""
    IDLE = 0
    TRANSMIT = 1


class State(NamedTuple):
    """État (i_rx, n_tx, n_rx) de la chaîne"""
    i_rx: int
    n_tx: int
    n_rx: int

    @property
    def is_iframe(self) -> bool:
        return self.n_tx == 0


IFRAME_STATE = State(0, 0, 0)


@dataclass(frozen=True)
class GopConfig:
    """
    Structure du GoP

    n_max : nombre maximal de trames différentielles N (le GoP compte au plus N+1 trames)
    beta  : beta[i-1] = probabilité que le GoP se termine après la i-ème trame différentielle
    """
    n_max: int
    beta: Tuple[float, ...]

    def __post_init__(self):
        if isinstance(self.n_max, bool) or not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1:
            raise ModelDomainError(f"n_max doit être un entier >= 1 (reçu {self.n_max})")
        try:
            beta = validate_beta(self.beta, int(self.n_max))
        except ValueError as e:
            raise ModelDomainError(f"beta invalide: {e}") from None
        object.__setattr__(self, "n_max", int(self.n_max))
        object.__setattr__(self, "beta", tuple(beta))

    @classmethod
    def fixed(cls, n_max: int) -> 'GopConfig':
        """GoP de taille fixe : N trames différentielles"""
        if isinstance(n_max, bool) or not isinstance(n_max, (int, np.integer)) or n_max < 1:
            raise ModelDomainError(f"n_max doit être un entier >= 1 (reçu {n_max})")
        return cls(n_max=n_max, beta=(0.0,) * (n_max - 1) + (1.0,))

    @classmethod
    def from_gop_length(cls, length: int) -> 'GopConfig':
        """GoP fixe de `length` trames, I-frame incluse"""
        if length < 2:
            raise ModelDomainError(f"Un GoP compte au moins 2 trames (reçu {length})")
        return cls.fixed(length - 1)

    @classmethod
    def variable(cls, beta: Sequence[float]) -> 'GopConfig':
        """GoP de taille variable, N = len(beta)"""
        return cls(n_max=len(beta), beta=tuple(beta))

    def termination(self, n_tx: int) -> float:
        """beta(n_tx), avec beta(0) = 0 : l'I-frame ne termine jamais le GoP"""
        return 0.0 if n_tx == 0 else self.beta[n_tx - 1]

    @property
    def is_fixed(self) -> bool:
        return all(b == 0.0 for b in self.beta[:-1])

    @property
    def gop_length(self) -> Optional[int]:
        """Longueur du GoP en trames si elle est fixe"""
        return self.n_max + 1 if self.is_fixed else None

    def beta_field(self) -> Union[str, list]:
        """Représentation du champ beta dans les fichiers"""
        return "fixed" if self.is_fixed else list(self.beta)


@dataclass(frozen=True, eq=False)
class GopChain:
    """Chaîne contrôlée : états, noyau p(s'|s,u), récompenses omega et phi"""
    gop: GopConfig
    failure_probs: LinkFailureProbs
    states: Tuple[State, ...]
    index: Dict[State, int]
    kernel: np.ndarray          # (S, 2, S)
    omega: np.ndarray           # (S, 2) trames/slot
    phi: np.ndarray             # (S, 2) paquets/slot
    termination: np.ndarray     # (S,) beta(n_tx)
    successors: Tuple[Tuple[int, int], ...] = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_state_actions(self) -> int:
        return 2 * len(self.states)

    def state_index(self, state: Union[State, Tuple[int, int, int]]) -> int:
        try:
            return self.index[State(*state)]
        except KeyError:
            raise ModelDomainError(f"État inconnu pour N={self.gop.n_max}: {tuple(state)}") from None

    @property
    def iframe_mask(self) -> np.ndarray:
        return np.array([s.n_tx == 0 for s in self.states])

    @property
    def irx1_mask(self) -> np.ndarray:
        """Trames différentielles dont l'I-frame a été décodée"""
        return np.array([s.n_tx > 0 and s.i_rx == 1 for s in self.states])

    @property
    def irx0_mask(self) -> np.ndarray:
        """Trames différentielles d'un GoP dont l'I-frame est perdue"""
        return np.array([s.n_tx > 0 and s.i_rx == 0 for s in self.states])

    def policy_kernel(self, transmit_probs: np.ndarray) -> np.ndarray:
        """Noyau induit par une politique : P_mu[s, s']"""
        q = np.asarray(transmit_probs, dtype=float)
        return (1.0 - q)[:, None] * self.kernel[:, 0, :] + q[:, None] * self.kernel[:, 1, :]


def enumerate_states(n_max: int) -> Tuple[State, ...]:
    """États valides dans l'ordre lexicographique (i_rx, n_tx, n_rx)"""
    states = [IFRAME_STATE]
    for i_rx in (0, 1):
        for n_tx in range(1, n_max + 1):
            for n_rx in range(n_tx):
                states.append(State(i_rx, n_tx, n_rx))
    return tuple(states)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def build_chain(gop: GopConfig, probs: LinkFailureProbs) -> GopChain:
    """
    Construit le noyau de transition et les récompenses

    La branche qui incrémente n_rx a la probabilité de succès (1 - rho_l(u)).

    Args:
        gop: Structure du GoP
        probs: Probabilités d'échec par action

    Returns:
        GopChain immuable
    """
    n_max = gop.n_max
    states = enumerate_states(n_max)
    index = {s: k for k, s in enumerate(states)}
    n_states = len(states)

    kernel = np.zeros((n_states, 2, n_states))
    omega = np.zeros((n_states, 2))
    phi = np.zeros((n_states, 2))
    termination = np.zeros(n_states)
    successors = []

    for k, (i_rx, n_tx, n_rx) in enumerate(states):
        b = gop.termination(n_tx)
        termination[k] = b
        if n_tx == 0:
            lost, delivered = index[State(0, 1, 0)], index[State(1, 1, 0)]
        elif n_tx == n_max:
            lost = delivered = 0
        else:
            lost = index[State(i_rx, n_tx + 1, n_rx)]
            delivered = index[State(i_rx, n_tx + 1, n_rx + 1)]
        successors.append((lost, delivered))

        for u in (Action.IDLE, Action.TRANSMIT):
            rho = probs.rho_l(u)
            if n_tx == 0:
                kernel[k, u, delivered] += 1.0 - rho
                kernel[k, u, lost] += rho
            elif n_tx == n_max:
                kernel[k, u, 0] = 1.0
            else:
                kernel[k, u, 0] += b
                kernel[k, u, delivered] += (1.0 - b) * (1.0 - rho)
                kernel[k, u, lost] += (1.0 - b) * rho
            # omega n'est crédité que si le GoP se termine dans ce slot
            if n_tx > 0:
                omega[k, u] = b * i_rx * (n_rx + i_rx + (1.0 - rho))
            phi[k, u] = u * (1.0 - probs.rho_d_1)

    row_error = np.abs(kernel.sum(axis=2) - 1.0).max()
    if row_error > KERNEL_ROW_TOL:
        raise NumericalFailure("Noyau non stochastique", {"row_error": row_error})

    logger.info(f"Chaîne construite: N={n_max}, {n_states} états, {2 * n_states} paires état-action")
    return GopChain(
        gop=gop,
        failure_probs=probs,
        states=states,
        index=index,
        kernel=_readonly(kernel),
        omega=_readonly(omega),
        phi=_readonly(phi),
        termination=_readonly(termination),
        successors=tuple(successors),
    )


def transmit_vector(chain: GopChain, policy: Union['Policy', Sequence[float], np.ndarray]) -> np.ndarray:
    """Probabilités d'émission par état, depuis une Policy ou un vecteur"""
    if hasattr(policy, "transmit_probabilities"):
        q = policy.transmit_probabilities(chain)
    else:
        q = np.asarray(policy, dtype=float)
    if q.shape != (chain.n_states,):
        raise ModelDomainError(f"La politique doit couvrir {chain.n_states} états (reçu {q.shape})")
    if not np.all((q >= 0.0) & (q <= 1.0)):
        raise ModelDomainError("Probabilité d'émission hors de [0, 1]")
    return q


def solve_stationary(transition: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Distribution stationnaire d'une chaîne unichain

    Résout x (P - I) = 0 avec une équation remplacée par sum(x) = 1.

    Returns:
        (x, résidu d'équilibre max |xP - x|)
    """
    n = transition.shape[0]
    system = transition.T - np.eye(n)
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        x = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"Système stationnaire singulier: {e}") from None
    x = np.clip(x, 0.0, None)
    x /= x.sum()
    residual = float(np.abs(x @ transition - x).max())
    return x, residual


def stationary_distribution(chain: GopChain, policy: Union['Policy', Sequence[float], np.ndarray],
                            tol: float = STATIONARY_RESIDUAL_TOL) -> np.ndarray:
    """
    Distribution stationnaire jointe état-action pi(s, u)

    Args:
        chain: Chaîne construite par build_chain
        policy: Policy ou vecteur des probabilités d'émission par état
        tol: Résidu d'équilibre maximal accepté

    Returns:
        Tableau (S, 2), somme 1

    Raises:
        NumericalFailure: Si le résidu dépasse tol
    """
    q = transmit_vector(chain, policy)
    marginal, residual = solve_stationary(chain.policy_kernel(q))
    if not np.isfinite(residual) or residual > tol:
        raise NumericalFailure("Équilibre global non atteint", {"balance_residual": residual})
    return np.column_stack([marginal * (1.0 - q), marginal * q])


def chain_listing(chain: GopChain) -> pd.DataFrame:
    """Listing diagnostique index -> état"""
    rows = [(k, s.i_rx, s.n_tx, s.n_rx) for k, s in enumerate(chain.states)]
    return pd.DataFrame(rows, columns=CHAIN_COLUMNS)
