#!/usr/bin/env python3
"""
Simulateur Monte Carlo slot par slot

Un slot transporte une trame vidéo sur le lien LTE et, selon l'action de la
politique, un paquet D2D. Les indicateurs de livraison sont réalisés
directement : une trame est créditée si elle est reçue et si l'I-frame de son
GoP l'a été.

Graines : SeedSequence(seed).spawn(R) fournit un flux PCG64 par réplication.
Dans chaque flux les tirages sont faits dans un ordre fixe (action, LTE, D2D,
fin de GoP, puis gains si l'évanouissement est tiré explicitement).
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import norm

from scripts.analysis.policy_metrics import MseModelParams, Policy
from scripts.model.channel import ChannelParams, decode_outcomes
from scripts.model.gop_model import GopChain, transmit_vector
from scripts.utils.constants import (
    DEFAULT_SIMULATION, REPLICATION_COLUMNS, SCATTER_COLUMNS, TRACE_COLUMNS,
)
from scripts.utils.validators import validate_integer_range

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """
    Paramètres d'une simulation

    channel : si fourni, les gains sont tirés et le SINR seuillé à chaque
    slot au lieu de tirer des Bernoulli de paramètre rho
    """
    chain: GopChain
    policy: Policy
    slots: int = DEFAULT_SIMULATION["slots"]
    seed: int = DEFAULT_SIMULATION["seed"]
    replications: int = DEFAULT_SIMULATION["replications"]
    batches: int = DEFAULT_SIMULATION["batches"]
    jobs: int = DEFAULT_SIMULATION["jobs"]
    channel: Optional[ChannelParams] = None

    def __post_init__(self):
        validate_integer_range(self.slots, min_val=1)
        validate_integer_range(self.replications, min_val=1)
        validate_integer_range(self.batches, min_val=1)
        # pas plus de lots que de slots
        object.__setattr__(self, "batches", min(self.batches, self.slots))
        validate_integer_range(self.jobs, min_val=1)
        validate_integer_range(self.seed, min_val=0)


@dataclass(frozen=True)
class TraceRecord:
    """Une trame de la trace (slot numéroté à partir de 1)"""
    slot: int
    frame_kind: str
    gop_index: int
    lte_delivered: bool
    d2d_action: int
    d2d_delivered: bool
    frame_corrupted: bool
    mse: float


@dataclass(frozen=True, eq=False)
class SlotLog:
    """Résultat brut de simulate_slots, un élément par slot"""
    iframe: np.ndarray
    gop_index: np.ndarray
    lte_delivered: np.ndarray
    action: np.ndarray
    d2d_delivered: np.ndarray
    corrupted: np.ndarray

    @property
    def credited(self) -> np.ndarray:
        return ~self.corrupted

    def __len__(self) -> int:
        return len(self.iframe)


@dataclass(frozen=True, eq=False)
class ReplicationResult:
    """Moyennes d'une réplication et ses moyennes par lots"""
    index: int
    d_lte: float
    t_d2d: float
    d_lte_batches: np.ndarray = field(repr=False)
    t_d2d_batches: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class EmpiricalReport:
    """Estimations empiriques de D_LTE et T_D2D avec erreurs standard"""
    d_lte: float
    t_d2d: float
    stderr_d_lte: float
    stderr_t_d2d: float
    slots: int
    replications: Tuple[ReplicationResult, ...]

    def confidence_interval(self, level: float = 0.95) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """Intervalles de confiance normaux pour (d_lte, t_d2d)"""
        z = float(norm.ppf(0.5 + level / 2.0))
        return (
            (self.d_lte - z * self.stderr_d_lte, self.d_lte + z * self.stderr_d_lte),
            (self.t_d2d - z * self.stderr_t_d2d, self.t_d2d + z * self.stderr_t_d2d),
        )


@dataclass(frozen=True)
class ScatterPoint:
    """Point (débit, MSE moyen) d'une politique"""
    policy_kind: str
    p_tx: float
    t_d2d: float
    mean_mse: float
    stderr_mse: float


def replication_seeds(seed: int, count: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def replication_streams(seed: int, count: int) -> List[np.random.Generator]:
    """Un générateur PCG64 indépendant par réplication, dérivé de la graine"""
    return [np.random.Generator(np.random.PCG64(s)) for s in replication_seeds(seed, count)]


def simulate_slots(chain: GopChain, policy: Policy, slots: int, rng: np.random.Generator,
                   channel: Optional[ChannelParams] = None,
                   forced_i_frame_losses: Optional[Iterable[int]] = None) -> SlotLog:
    """
    Simule `slots` slots à partir de l'I-frame d'un GoP

    Args:
        chain: Chaîne contrôlée (structure du GoP et probabilités d'échec)
        policy: Politique D2D
        slots: Nombre de slots (= trames)
        rng: Générateur dédié
        channel: Paramètres de canal pour tirer explicitement les gains
        forced_i_frame_losses: Trames (numérotées à partir de 1) dont la perte est imposée

    Raises:
        IndexError: Si une perte imposée ne tombe pas sur une I-frame
    """
    q = transmit_vector(chain, policy).tolist()
    probs = chain.failure_probs

    action_draw = rng.random(slots)
    lte_draw = rng.random(slots)
    d2d_draw = rng.random(slots)
    term_draw = rng.random(slots).tolist()

    if channel is None:
        lte_ok_idle = (lte_draw >= probs.rho_l_0).tolist()
        lte_ok_busy = (lte_draw >= probs.rho_l_1).tolist()
        d2d_ok = (d2d_draw >= probs.rho_d_1).tolist()
    else:
        gains = rng.exponential(1.0, size=(4, slots))
        lte_ok_idle, _ = decode_outcomes(channel, gains, np.zeros(slots, dtype=bool))
        lte_ok_busy, d2d_ok = decode_outcomes(channel, gains, np.ones(slots, dtype=bool))
        lte_ok_idle, lte_ok_busy, d2d_ok = lte_ok_idle.tolist(), lte_ok_busy.tolist(), d2d_ok.tolist()
    action_draw = action_draw.tolist()

    forced = set(forced_i_frame_losses or ())
    forced_hit = set()
    termination = chain.termination.tolist()
    successors = chain.successors
    states = chain.states

    iframe = [False] * slots
    gop_index = [0] * slots
    lte_delivered = [False] * slots
    action = [0] * slots
    d2d_delivered = [False] * slots
    corrupted = [False] * slots

    s = 0
    gop = 0
    for t in range(slots):
        i_rx, n_tx, _ = states[s]
        u = action_draw[t] < q[s]
        ok = lte_ok_busy[t] if u else lte_ok_idle[t]
        if n_tx == 0 and (t + 1) in forced:
            ok = False
            forced_hit.add(t + 1)

        iframe[t] = n_tx == 0
        gop_index[t] = gop
        lte_delivered[t] = ok
        action[t] = int(u)
        d2d_delivered[t] = u and d2d_ok[t]
        corrupted[t] = (not ok) if n_tx == 0 else (i_rx == 0 or not ok)

        if term_draw[t] < termination[s]:
            s = 0
            gop += 1
        else:
            s = successors[s][ok]

    missed = sorted(forced - forced_hit)
    if missed:
        raise IndexError(f"Pertes imposées hors I-frame: {missed}")

    return SlotLog(
        iframe=np.array(iframe, dtype=bool),
        gop_index=np.array(gop_index, dtype=np.int64),
        lte_delivered=np.array(lte_delivered, dtype=bool),
        action=np.array(action, dtype=np.int8),
        d2d_delivered=np.array(d2d_delivered, dtype=bool),
        corrupted=np.array(corrupted, dtype=bool),
    )


def batch_means(values: np.ndarray, batches: int) -> np.ndarray:
    """Moyennes de `batches` lots contigus"""
    return np.array([chunk.mean() for chunk in np.array_split(np.asarray(values, dtype=float), batches)])


def batch_stderr(means: np.ndarray) -> float:
    """Erreur standard de la moyenne estimée par les moyennes de lots"""
    means = np.asarray(means, dtype=float)
    if means.size < 2:
        return math.nan
    return float(means.std(ddof=1) / math.sqrt(means.size))


def _run_replication(args) -> ReplicationResult:
    chain, policy, slots, seed_seq, channel, batches, index = args
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    log = simulate_slots(chain, policy, slots, rng, channel=channel)
    result = ReplicationResult(
        index=index,
        d_lte=float(log.credited.mean()),
        t_d2d=float(log.d2d_delivered.mean()),
        d_lte_batches=batch_means(log.credited, batches),
        t_d2d_batches=batch_means(log.d2d_delivered, batches),
    )
    logger.info(f"Réplication {index}: D_LTE={result.d_lte:.6g} T_D2D={result.t_d2d:.6g}")
    return result


def run(config: SimConfig) -> EmpiricalReport:
    """
    Estime D_LTE et T_D2D par simulation

    Chaque réplication utilise son propre flux ; les erreurs standard sont
    calculées sur l'ensemble des moyennes de lots de toutes les réplications.
    """
    seeds = replication_seeds(config.seed, config.replications)
    tasks = [
        (config.chain, config.policy, config.slots, s, config.channel, config.batches, k)
        for k, s in enumerate(seeds)
    ]
    if config.jobs > 1 and len(tasks) > 1:
        with Pool(min(config.jobs, len(tasks))) as pool:
            results = pool.map(_run_replication, tasks)
    else:
        results = [_run_replication(task) for task in tasks]

    d_lte = float(np.mean([r.d_lte for r in results]))
    t_d2d = float(np.mean([r.t_d2d for r in results]))
    stderr_d = batch_stderr(np.concatenate([r.d_lte_batches for r in results]))
    stderr_t = batch_stderr(np.concatenate([r.t_d2d_batches for r in results]))
    logger.info(
        f"Simulation: {config.replications} x {config.slots} slots, "
        f"D_LTE={d_lte:.6g} (±{stderr_d:.2g}) T_D2D={t_d2d:.6g} (±{stderr_t:.2g})"
    )
    return EmpiricalReport(
        d_lte=d_lte,
        t_d2d=t_d2d,
        stderr_d_lte=stderr_d,
        stderr_t_d2d=stderr_t,
        slots=config.slots,
        replications=tuple(results),
    )


def trace(config: SimConfig, mse_params: MseModelParams,
          forced_i_frame_losses: Optional[Sequence[int]] = None) -> List[TraceRecord]:
    """
    Trace trame par trame de la première réplication

    Une trame propre vaut d_e, une trame corrompue d_e + c*sigma_e. La perte
    d'une I-frame corrompt tout le reste de son GoP.

    Raises:
        IndexError: Si une perte imposée ne tombe pas sur une I-frame
    """
    rng = replication_streams(config.seed, 1)[0]
    log = simulate_slots(config.chain, config.policy, config.slots, rng,
                         channel=config.channel, forced_i_frame_losses=forced_i_frame_losses)
    mse = np.where(log.corrupted, mse_params.corrupted_mse, mse_params.d_e)
    records = [
        TraceRecord(
            slot=t + 1,
            frame_kind="I" if log.iframe[t] else "D",
            gop_index=int(log.gop_index[t]),
            lte_delivered=bool(log.lte_delivered[t]),
            d2d_action=int(log.action[t]),
            d2d_delivered=bool(log.d2d_delivered[t]),
            frame_corrupted=bool(log.corrupted[t]),
            mse=float(mse[t]),
        )
        for t in range(len(log))
    ]
    logger.info(f"Trace: {len(records)} trames, {int(log.corrupted.sum())} corrompues")
    return records


def mse_throughput_scatter(chain: GopChain, policies: Sequence[Policy], mse_params: MseModelParams,
                           slots: int, seed: int, batches: int = DEFAULT_SIMULATION["batches"],
                           channel: Optional[ChannelParams] = None) -> List[ScatterPoint]:
    """
    Débit D2D et MSE moyen simulés pour chaque politique

    Toutes les politiques partagent le même flux (nombres aléatoires communs),
    de sorte que deux politiques identiques donnent des points identiques.
    """
    points = []
    for policy in policies:
        rng = replication_streams(seed, 1)[0]
        log = simulate_slots(chain, policy, slots, rng, channel=channel)
        mse = np.where(log.corrupted, mse_params.corrupted_mse, mse_params.d_e)
        points.append(ScatterPoint(
            policy_kind=policy.kind.value,
            p_tx=math.nan if policy.p_tx is None else policy.p_tx,
            t_d2d=float(log.d2d_delivered.mean()),
            mean_mse=float(mse.mean()),
            stderr_mse=batch_stderr(batch_means(mse, min(batches, slots))),
        ))
        logger.info(f"{policy.label}: T_D2D={points[-1].t_d2d:.6g} MSE={points[-1].mean_mse:.6g}")
    return points


def trace_to_frame(records: Sequence[TraceRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in records], columns=TRACE_COLUMNS)


def scatter_to_frame(points: Sequence[ScatterPoint]) -> pd.DataFrame:
    return pd.DataFrame([asdict(p) for p in points], columns=SCATTER_COLUMNS)


def replications_to_frame(report: EmpiricalReport) -> pd.DataFrame:
    rows = [{"replication": r.index, "d_lte": r.d_lte, "t_d2d": r.t_d2d} for r in report.replications]
    return pd.DataFrame(rows, columns=REPLICATION_COLUMNS)
