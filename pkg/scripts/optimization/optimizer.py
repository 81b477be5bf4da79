#!/usr/bin/env python3
"""
Optimiseur CMDP - programme linéaire sur la mesure d'occupation

Variables z(s,u), rangées dans l'ordre z[2*s + u]. Le problème :

    max  sum phi z
    s.c. sum omega z >= delta
         sum_{s,u} z(s,u) p(s'|s,u) = sum_u z(s',u)   pour tout s'
         sum z = 1, z >= 0

est résolu par le simplexe dual de HiGHS, qui rend une solution de base :
au plus un état visité randomise son action. Le sommet rendu est ensuite
remplacé par la mesure d'occupation exacte de la politique extraite (la
chaîne est unichain), sur laquelle portent objectif, livraison et résidus.
"""

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import linprog

from scripts.analysis.policy_metrics import (
    Policy, baseline_probability_for_rate, baseline_throughput,
)
from scripts.model.gop_model import GopChain, stationary_distribution
from scripts.utils.constants import (
    CURVE_COLUMNS, DEFAULT_SOLVER, HIGHS_MIN_TOL, HIGHS_TOL_RATIO, STATIONARY_RESIDUAL_TOL,
)
from scripts.utils.errors import InfeasibleError, ModelDomainError, NumericalFailure

logger = logging.getLogger(__name__)

LP_STATUS_INFEASIBLE = 2


@dataclass(frozen=True)
class SolverOptions:
    """Tolérances et méthode du solveur"""
    feasibility_tol: float = DEFAULT_SOLVER["feasibility_tol"]
    optimality_tol: float = DEFAULT_SOLVER["optimality_tol"]
    residual_tol: float = DEFAULT_SOLVER["residual_tol"]
    visit_tol: float = DEFAULT_SOLVER["visit_tol"]
    method: str = DEFAULT_SOLVER["method"]

    @classmethod
    def from_dict(cls, values: Dict) -> 'SolverOptions':
        known = {k: v for k, v in values.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def highs_options(self) -> Dict:
        # au moins HIGHS_TOL_RATIO fois sous residual_tol
        bound = max(self.residual_tol / HIGHS_TOL_RATIO, HIGHS_MIN_TOL)
        return {
            "primal_feasibility_tolerance": max(min(self.feasibility_tol, bound), HIGHS_MIN_TOL),
            "dual_feasibility_tolerance": max(min(self.optimality_tol, bound), HIGHS_MIN_TOL),
            "presolve": True,
        }


@dataclass(frozen=True, eq=False)
class LpProblem:
    """
    Programme linéaire sous la forme attendue par linprog (minimisation)

    balance contient toutes les lignes d'équilibre ; la dernière, redondante
    avec la normalisation, est retirée de a_eq.
    """
    chain: GopChain
    delta: Optional[float]
    c: np.ndarray
    a_ub: Optional[np.ndarray]
    b_ub: Optional[np.ndarray]
    balance: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray

    @property
    def n_variables(self) -> int:
        return self.c.shape[0]

    @property
    def n_balance_rows(self) -> int:
        return self.balance.shape[0]

    @property
    def n_delivery_rows(self) -> int:
        return 0 if self.a_ub is None else self.a_ub.shape[0]

    @property
    def n_normalization_rows(self) -> int:
        return 1


@dataclass(frozen=True, eq=False)
class OccupationSolution:
    """Solution optimale du programme linéaire"""
    z: np.ndarray                  # (S, 2)
    objective: float               # T_D2D atteint
    delivery: float                # sum omega z
    feasible: bool
    policy: Policy
    residuals: Dict[str, float] = field(default_factory=dict)
    delta: Optional[float] = None


@dataclass(frozen=True)
class ClassProbabilities:
    """Probabilités d'émission moyennes (pondérées par les visites) par classe d'états"""
    iframe: float
    dframe_irx1: float
    dframe_irx0: float


@dataclass(frozen=True, eq=False)
class CurvePoint:
    """Point d'une courbe T*(delta)"""
    delta: float
    feasible: bool
    status: str = "optimal"       # optimal | infeasible | numerical_failure
    t_d2d: float = math.nan
    d_lte_achieved: float = math.nan
    classes: Optional[ClassProbabilities] = None
    solution: Optional[OccupationSolution] = field(default=None, repr=False)


def _balance_matrix(chain: GopChain) -> np.ndarray:
    """Lignes sum_{s,u} z(s,u) p(s'|s,u) - sum_u z(s',u), une par s'"""
    n_states = chain.n_states
    inflow = chain.kernel.reshape(2 * n_states, n_states).T
    outflow = np.repeat(np.eye(n_states), 2, axis=1)
    return inflow - outflow


def _equality_rows(balance: np.ndarray):
    a_eq = np.vstack([balance[:-1], np.ones((1, balance.shape[1]))])
    b_eq = np.zeros(a_eq.shape[0])
    b_eq[-1] = 1.0
    return a_eq, b_eq


def build_lp(chain: GopChain, delta: float) -> LpProblem:
    """
    Construit le programme linéaire pour un niveau de contrainte delta

    Args:
        chain: Chaîne contrôlée
        delta: Taux de livraison LTE minimal, dans [0, 1]

    Returns:
        LpProblem (objectif -phi, contrainte -omega z <= -delta)
    """
    if not (0.0 <= delta <= 1.0):
        raise ModelDomainError(f"delta doit être dans [0, 1] (reçu {delta})")
    balance = _balance_matrix(chain)
    a_eq, b_eq = _equality_rows(balance)
    return LpProblem(
        chain=chain,
        delta=float(delta),
        c=-chain.phi.ravel(),
        a_ub=-chain.omega.ravel()[None, :],
        b_ub=np.array([-float(delta)]),
        balance=balance,
        a_eq=a_eq,
        b_eq=b_eq,
    )


def _residuals(problem: LpProblem, z: np.ndarray) -> Dict[str, float]:
    flat = z.ravel()
    residuals = {
        "balance": float(np.abs(problem.balance @ flat).max()),
        "normalization": float(abs(flat.sum() - 1.0)),
    }
    if problem.delta is not None:
        residuals["delivery_slack"] = float(problem.chain.omega.ravel() @ flat - problem.delta)
    return residuals


def _run_linprog(problem: LpProblem, options: SolverOptions):
    return linprog(
        problem.c,
        A_ub=problem.a_ub,
        b_ub=problem.b_ub,
        A_eq=problem.a_eq,
        b_eq=problem.b_eq,
        bounds=(0, None),
        method=options.method,
        options=options.highs_options(),
    )


def max_delivery_rate(chain: GopChain, options: Optional[SolverOptions] = None) -> float:
    """
    Taux de livraison LTE maximal atteignable (plafond de faisabilité)

    Même programme, objectif sum omega z et sans contrainte de livraison.
    """
    options = options or SolverOptions()
    balance = _balance_matrix(chain)
    a_eq, b_eq = _equality_rows(balance)
    problem = LpProblem(chain=chain, delta=None, c=-chain.omega.ravel(), a_ub=None, b_ub=None,
                        balance=balance, a_eq=a_eq, b_eq=b_eq)
    res = _run_linprog(problem, options)
    if res.status != 0:
        raise NumericalFailure(f"Calcul du plafond impossible: {res.message}")
    z, _ = _polish(chain, res.x, options)
    ceiling = float((chain.omega * z).sum())
    logger.info(f"Taux de livraison maximal: {ceiling:.6f}")
    return ceiling


def extract_policy(z: np.ndarray, chain: GopChain, visit_tol: float = DEFAULT_SOLVER["visit_tol"]) -> Policy:
    """
    mu*(s, 1) = z(s,1) / sum_u z(s,u)

    Les états non visités émettent si i_rx = 0 et restent inactifs sinon.
    """
    z = np.asarray(z, dtype=float).reshape(chain.n_states, 2)
    visits = z.sum(axis=1)
    default = chain.irx0_mask.astype(float)
    visited = visits > visit_tol
    q = np.where(visited, z[:, 1] / np.where(visited, visits, 1.0), default)
    return Policy.tabular(np.clip(q, 0.0, 1.0))


def _polish(chain: GopChain, x: np.ndarray, options: SolverOptions) -> Tuple[np.ndarray, Policy]:
    """Mesure d'occupation exacte de la politique extraite du sommet x"""
    raw = np.clip(np.asarray(x, dtype=float), 0.0, None).reshape(chain.n_states, 2)
    policy = extract_policy(raw, chain, options.visit_tol)
    tol = max(STATIONARY_RESIDUAL_TOL, options.residual_tol / HIGHS_TOL_RATIO)
    return stationary_distribution(chain, policy, tol=tol), policy


def solve(problem: LpProblem, options: Optional[SolverOptions] = None,
          ceiling: Optional[float] = None) -> OccupationSolution:
    """
    Résout le programme linéaire

    Args:
        problem: Problème construit par build_lp
        options: Tolérances du solveur
        ceiling: Plafond déjà connu, reporté en cas d'infaisabilité

    Returns:
        OccupationSolution

    Raises:
        InfeasibleError: Si delta dépasse le taux de livraison maximal
        NumericalFailure: Si le solveur échoue ou si les résidus dépassent la tolérance
    """
    options = options or SolverOptions()
    chain = problem.chain
    logger.info(f"Résolution du PL: {problem.n_variables} variables, delta={problem.delta}")
    res = _run_linprog(problem, options)

    if res.status == LP_STATUS_INFEASIBLE:
        if ceiling is None:
            ceiling = max_delivery_rate(chain, options)
        raise InfeasibleError(problem.delta, ceiling)
    if res.status != 0:
        raise NumericalFailure(f"Échec du solveur (statut {res.status}): {res.message}")

    z, policy = _polish(chain, res.x, options)
    residuals = _residuals(problem, z)
    violations = {
        "balance": residuals["balance"],
        "normalization": residuals["normalization"],
        "delivery": max(0.0, -residuals.get("delivery_slack", 0.0)),
    }
    if max(violations.values()) > options.residual_tol:
        raise NumericalFailure("Tolérances non atteintes", violations)

    objective = float((chain.phi * z).sum())
    delivery = float((chain.omega * z).sum())
    logger.info(f"delta={problem.delta:.6g}: T*={objective:.6g}, D_LTE={delivery:.6g}")
    return OccupationSolution(
        z=z,
        objective=objective,
        delivery=delivery,
        feasible=True,
        policy=policy,
        residuals=residuals,
        delta=problem.delta,
    )


def class_transmit_probabilities(z: np.ndarray, chain: GopChain,
                                 visit_tol: float = DEFAULT_SOLVER["visit_tol"]) -> ClassProbabilities:
    """
    Probabilité d'émission moyenne dans chaque classe, pondérée par les visites

    Une classe jamais visitée prend la moyenne de la politique complétée.
    """
    z = np.asarray(z, dtype=float).reshape(chain.n_states, 2)
    q = np.asarray(extract_policy(z, chain, visit_tol).table)
    visits = z.sum(axis=1)

    def _average(mask: np.ndarray) -> float:
        weight = visits[mask].sum()
        if weight > visit_tol:
            return float(z[mask, 1].sum() / weight)
        return float(q[mask].mean())

    return ClassProbabilities(
        iframe=_average(chain.iframe_mask),
        dframe_irx1=_average(chain.irx1_mask),
        dframe_irx0=_average(chain.irx0_mask),
    )


def _solve_point(args) -> CurvePoint:
    chain, delta, options, ceiling = args
    try:
        solution = solve(build_lp(chain, delta), options, ceiling=ceiling)
    except InfeasibleError as e:
        logger.warning(str(e))
        return CurvePoint(delta=delta, feasible=False, status="infeasible")
    except NumericalFailure as e:
        logger.warning(f"delta={delta:.6g}: {e}")
        return CurvePoint(delta=delta, feasible=False, status="numerical_failure")
    return CurvePoint(
        delta=delta,
        feasible=True,
        t_d2d=solution.objective,
        d_lte_achieved=solution.delivery,
        classes=class_transmit_probabilities(solution.z, chain, options.visit_tol),
        solution=solution,
    )


def sweep_delta(chain: GopChain, deltas: Sequence[float], options: Optional[SolverOptions] = None,
                jobs: int = 1) -> List[CurvePoint]:
    """
    Résout le programme pour chaque delta de la grille

    Les points infaisables ou en échec numérique sont marqués sans
    interrompre le balayage. Avec jobs > 1 les résolutions sont réparties
    sur un pool de processus ; l'ordre des résultats suit celui des deltas.
    """
    options = options or SolverOptions()
    deltas = [float(d) for d in deltas]
    if any(not (0.0 <= d <= 1.0) for d in deltas):
        raise ModelDomainError("Chaque delta doit être dans [0, 1]")
    if any(b < a for a, b in zip(deltas, deltas[1:])):
        raise ModelDomainError("La grille de delta doit être croissante")

    ceiling = max_delivery_rate(chain, options)
    tasks = [(chain, d, options, ceiling) for d in deltas]
    if jobs > 1 and len(tasks) > 1:
        with Pool(min(jobs, len(tasks))) as pool:
            points = pool.map(_solve_point, tasks)
    else:
        points = [_solve_point(task) for task in tasks]

    feasible = sum(p.feasible for p in points)
    logger.info(f"Balayage: {feasible}/{len(points)} points faisables")
    return points


def dominance_gap(chain: GopChain, point: CurvePoint) -> float:
    """
    T*(delta) moins le débit de la politique constante de même taux de livraison

    Requiert un GoP fixe (forme close de la politique constante).
    """
    if not point.feasible:
        raise ModelDomainError(f"Point infaisable (delta={point.delta})")
    if not chain.gop.is_fixed:
        raise ModelDomainError("La comparaison à la politique constante exige un GoP fixe")
    probs = chain.failure_probs
    p_tx = baseline_probability_for_rate(chain.gop.n_max, probs.rho_l_0, probs.rho_l_1, point.delta)
    return point.t_d2d - baseline_throughput(probs.rho_d_1, p_tx)


def curve_to_frame(points: Sequence[CurvePoint]) -> pd.DataFrame:
    """Courbe au format CSV delta,t_d2d,d_lte_achieved,p_tx_*,feasible"""
    rows = []
    for p in points:
        classes = p.classes or ClassProbabilities(math.nan, math.nan, math.nan)
        rows.append({
            "delta": p.delta,
            "t_d2d": p.t_d2d,
            "d_lte_achieved": p.d_lte_achieved,
            "p_tx_iframe": classes.iframe,
            "p_tx_dframe_irx1": classes.dframe_irx1,
            "p_tx_dframe_irx0": classes.dframe_irx0,
            "feasible": p.feasible,
        })
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)
