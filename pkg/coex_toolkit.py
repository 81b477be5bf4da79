#!/usr/bin/env python3
"""
Coex Toolkit - Interface principale

Point d'entrée unique : probabilités de canal, optimisation CMDP, évaluation
analytique, simulation Monte Carlo, traces de propagation d'erreur et nuages
MSE/débit.

Les résultats (CSV, tableaux) vont sur la sortie standard ou dans des
fichiers ; les journaux vont sur la sortie d'erreur.
"""

import functools
import logging
from pathlib import Path
from typing import Optional

import pandas as pd
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from scripts.analysis.policy_metrics import (
    Policy, evaluate as evaluate_policy, load_policy, mse_from_error_rate, psnr_for_report, save_policy,
)
from scripts.config.coex_config import CoexConfig
from scripts.model.channel import ChannelParams, failure_probs, sample_failure_probs
from scripts.model.gop_model import GopChain, GopConfig, chain_listing
from scripts.optimization.optimizer import (
    CurvePoint, build_lp, class_transmit_probabilities, curve_to_frame, solve as solve_lp, sweep_delta,
)
from scripts.simulation.simulator import (
    SimConfig, mse_throughput_scatter, replications_to_frame, run as run_simulation,
    scatter_to_frame, trace as run_trace, trace_to_frame,
)
from scripts.utils.constants import EXPORT_CONFIG, ExitCode, PsnrConvention
from scripts.utils.errors import InfeasibleError, NumericalFailure
from scripts.utils.validators import parse_grid, parse_index_list, validate_output_path

app = typer.Typer(
    name="Coex Toolkit",
    help="Coexistence LTE/D2D sensible au contenu vidéo : optimisation, évaluation, simulation",
    add_completion=False
)

console = Console()
err_console = Console(stderr=True)

logger = logging.getLogger("coex")

# Options partagées par les commandes qui construisent la chaîne
N_MAX_OPTION = typer.Option(None, "--n-max", help="Nombre maximal de trames différentielles N")
GOP_OPTION = typer.Option(None, "--gop", help="Taille fixe du GoP en trames (I-frame incluse)")
RHO_L0_OPTION = typer.Option(None, "--rho-l0", help="Échec LTE, D2D inactif")
RHO_L1_OPTION = typer.Option(None, "--rho-l1", help="Échec LTE, D2D actif")
RHO_D1_OPTION = typer.Option(None, "--rho-d1", help="Échec D2D quand il émet")
POLICY_OPTION = typer.Option(None, "--policy", help="Fichier de politique JSON")
CONST_P_OPTION = typer.Option(None, "--const-p", help="Politique constante p_tx")
HEURISTIC_P_OPTION = typer.Option(None, "--heuristic-p", help="Heuristique : I-frame protégée, p_tx ailleurs")
AGGRESSIVE_P_OPTION = typer.Option(None, "--aggressive-p",
                                   help="Heuristique agressive : émet toujours si l'I-frame est perdue")
SEED_OPTION = typer.Option(None, "--seed", help="Graine du générateur")


def setup_logging(verbose: bool) -> None:
    """Journalisation rich sur la sortie d'erreur"""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def handle_errors(func):
    """Traduit les exceptions du toolkit en codes de sortie"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except InfeasibleError as e:
            err_console.print(f"[bold red]❌ {escape(str(e))}[/bold red]")
            raise typer.Exit(ExitCode.INFEASIBLE)
        except NumericalFailure as e:
            err_console.print(f"[bold red]❌ Échec numérique : {escape(str(e))}[/bold red]")
            raise typer.Exit(ExitCode.NUMERICAL)
        except (ValueError, IndexError) as e:
            err_console.print(f"[bold red]❌ {escape(str(e))}[/bold red]")
            raise typer.Exit(ExitCode.USAGE)
    return wrapper


@app.callback()
def common(
    ctx: typer.Context,
    config: str = typer.Option(None, "--config", "-c", help="Fichier de configuration JSON"),
    precision: int = typer.Option(None, "--precision", help="Chiffres significatifs en sortie"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Mode verbeux"),
) -> None:
    """Options communes à toutes les commandes"""
    setup_logging(verbose)
    ctx.obj = {"config": config, "precision": precision}


def _load_config(ctx: typer.Context, n_max: Optional[int] = None, gop: Optional[int] = None,
                 rho_l0: Optional[float] = None, rho_l1: Optional[float] = None,
                 rho_d1: Optional[float] = None) -> CoexConfig:
    """Charge la configuration puis applique les options (options > fichier > défauts)"""
    cfg = CoexConfig(ctx.obj.get("config"))
    if gop is not None:
        if n_max is not None:
            raise typer.BadParameter("--gop et --n-max sont exclusifs")
        n_max = GopConfig.from_gop_length(gop).n_max
        cfg.apply_overrides("model", beta="fixed")
    cfg.apply_overrides("model", n_max=n_max, rho_l0=rho_l0, rho_l1=rho_l1, rho_d1=rho_d1)
    cfg.apply_overrides("output", precision=ctx.obj.get("precision"))

    problems = cfg.validate_config()
    if problems:
        raise ValueError("Configuration invalide : " + "; ".join(problems))
    return cfg


def _fmt(value: float, precision: int) -> str:
    return f"{value:.{precision}g}"


def _summary_table(title: str, rows, precision: int) -> Table:
    table = Table(title=title, show_header=True, header_style="bold magenta")
    table.add_column("Métrique", style="dim")
    table.add_column("Valeur", justify="right")
    for name, value in rows:
        table.add_row(name, _fmt(value, precision) if isinstance(value, float) else str(value))
    return table


def _write_frame(frame: pd.DataFrame, out: Optional[str], precision: int) -> None:
    """Écrit un CSV dans un fichier ou sur la sortie standard"""
    options = dict(EXPORT_CONFIG["csv"], float_format=f"%.{precision}g")
    if out:
        path = validate_output_path(out)
        frame.to_csv(path, **options)
        logger.info(f"CSV écrit: {path}")
    else:
        typer.echo(frame.to_csv(**options), nl=False)


def _resolve_policy(chain: GopChain, policy_file: Optional[str], const_p: Optional[float],
                    heuristic_p: Optional[float], aggressive_p: Optional[float],
                    required: bool = True) -> Optional[Policy]:
    """Une seule source de politique parmi fichier, constante, heuristiques"""
    given = [v is not None for v in (policy_file, const_p, heuristic_p, aggressive_p)]
    if sum(given) > 1:
        raise typer.BadParameter("Une seule source de politique : --policy, --const-p, --heuristic-p ou --aggressive-p")
    if policy_file is not None:
        return load_policy(policy_file).policy_for(chain)
    if const_p is not None:
        return Policy.constant(const_p)
    if heuristic_p is not None:
        return Policy.heuristic(heuristic_p)
    if aggressive_p is not None:
        return Policy.heuristic_aggressive(aggressive_p)
    if required:
        raise typer.BadParameter("Indiquer une politique : --policy, --const-p, --heuristic-p ou --aggressive-p")
    return None


@app.command()
@handle_errors
def channel(
    ctx: typer.Context,
    p_l: float = typer.Option(..., "--p-l", help="Puissance reçue LTE"),
    p_d: float = typer.Option(..., "--p-d", help="Puissance reçue D2D"),
    sigma2_l: float = typer.Option(..., "--sigma2-l", help="Bruit au récepteur LTE"),
    sigma2_d: float = typer.Option(..., "--sigma2-d", help="Bruit au récepteur D2D"),
    gamma: float = typer.Option(..., "--gamma", help="Seuil de décodage"),
    db: bool = typer.Option(False, "--db", help="Valeurs en dB"),
    sample_fading: bool = typer.Option(False, "--sample-fading", help="Valide par tirage des gains"),
    draws: int = typer.Option(1_000_000, "--draws", help="Tirages pour --sample-fading"),
    seed: int = SEED_OPTION,
    write_config: str = typer.Option(None, "--write-config", help="Écrit les rho dans une configuration"),
) -> None:
    """
    📡 Probabilités d'échec par slot sous évanouissement de Rayleigh
    """
    cfg = _load_config(ctx)
    precision = cfg.precision
    if db:
        params = ChannelParams.from_db(p_l, p_d, sigma2_l, sigma2_d, gamma)
    else:
        params = ChannelParams(p_l=p_l, p_d=p_d, sigma2_l=sigma2_l, sigma2_d=sigma2_d, gamma=gamma)
    probs = failure_probs(params)

    table = Table(title="Probabilités d'échec", show_header=True, header_style="bold magenta")
    table.add_column("Lien", style="dim")
    table.add_column("Forme close", justify="right")
    rows = [("rho_l0", probs.rho_l_0), ("rho_l1", probs.rho_l_1), ("rho_d1", probs.rho_d_1)]
    if sample_fading:
        seed = cfg.simulation["seed"] if seed is None else seed
        estimate = sample_failure_probs(params, draws=draws, seed=seed)
        empirical = [
            (estimate.probs.rho_l_0, estimate.stderr_l_0),
            (estimate.probs.rho_l_1, estimate.stderr_l_1),
            (estimate.probs.rho_d_1, estimate.stderr_d_1),
        ]
        table.add_column("Tirage", justify="right")
        table.add_column("Erreur std", justify="right")
        for (name, value), (mean, stderr) in zip(rows, empirical):
            table.add_row(name, _fmt(value, precision), _fmt(mean, precision), _fmt(stderr, 2))
    else:
        for name, value in rows:
            table.add_row(name, _fmt(value, precision))
    console.print(table)

    if write_config:
        cfg.set_channel(None)
        cfg.apply_overrides("model", **probs.to_dict())
        path = cfg.save_custom_config(validate_output_path(write_config))
        err_console.print(f"💾 Configuration écrite : [bold]{escape(str(path))}[/bold]")


def _policy_path_for(out_policy: str, delta: float) -> Path:
    base = Path(out_policy)
    return base.with_name(f"{base.stem}_delta{delta:.6g}{base.suffix or '.json'}")


@app.command()
@handle_errors
def solve(
    ctx: typer.Context,
    delta: float = typer.Option(None, "--delta", help="Taux de livraison LTE minimal"),
    sweep: str = typer.Option(None, "--sweep", help="Grille debut:fin:pas de delta"),
    out_policy: str = typer.Option(None, "--out-policy", help="Fichier de politique optimale"),
    out_curve: str = typer.Option(None, "--out-curve", help="CSV de la courbe T*(delta)"),
    jobs: int = typer.Option(None, "--jobs", help="Processus pour le balayage"),
    n_max: int = N_MAX_OPTION,
    gop: int = GOP_OPTION,
    rho_l0: float = RHO_L0_OPTION,
    rho_l1: float = RHO_L1_OPTION,
    rho_d1: float = RHO_D1_OPTION,
) -> None:
    """
    🎯 Résout le CMDP (un delta ou un balayage)
    """
    if (delta is None) == (sweep is None):
        raise typer.BadParameter("Indiquer exactement une option parmi --delta et --sweep")
    cfg = _load_config(ctx, n_max, gop, rho_l0, rho_l1, rho_d1)
    cfg.apply_overrides("simulation", jobs=jobs)
    precision = cfg.precision
    chain = cfg.build_chain()
    options = cfg.solver_options()

    if delta is not None:
        solution = solve_lp(build_lp(chain, delta), options)
        classes = class_transmit_probabilities(solution.z, chain, options.visit_tol)
        rows = [
            ("delta", float(delta)),
            ("T_D2D*", solution.objective),
            ("D_LTE atteint", solution.delivery),
            ("p_tx I-frame", classes.iframe),
            ("p_tx D-frame (i_rx=1)", classes.dframe_irx1),
            ("p_tx D-frame (i_rx=0)", classes.dframe_irx0),
        ] + [(f"résidu {k}", v) for k, v in solution.residuals.items()]
        console.print(_summary_table("Politique optimale", rows, precision))
        if out_policy:
            save_policy(validate_output_path(out_policy), chain, solution.policy)
        if out_curve:
            point = CurvePoint(delta=float(delta), feasible=True, t_d2d=solution.objective,
                               d_lte_achieved=solution.delivery, classes=classes, solution=solution)
            _write_frame(curve_to_frame([point]), out_curve, precision)
        return

    points = sweep_delta(chain, parse_grid(sweep), options, jobs=cfg.simulation["jobs"])
    feasible = [p for p in points if p.feasible]
    summary = console if out_curve else err_console
    summary.print(f"📈 {len(feasible)}/{len(points)} valeurs de delta faisables")
    if out_policy:
        for point in feasible:
            save_policy(validate_output_path(_policy_path_for(out_policy, point.delta)),
                        chain, point.solution.policy)
    _write_frame(curve_to_frame(points), out_curve, precision)
    if not feasible:
        err_console.print("[bold red]❌ Aucun delta faisable dans la grille[/bold red]")
        raise typer.Exit(ExitCode.INFEASIBLE)


def _parse_psnr_convention(value: str) -> PsnrConvention:
    try:
        return PsnrConvention(value)
    except ValueError:
        raise typer.BadParameter(f"Convention PSNR inconnue: {value} (linear, paper ou standard)") from None


@app.command()
@handle_errors
def evaluate(
    ctx: typer.Context,
    policy: str = POLICY_OPTION,
    const_p: float = CONST_P_OPTION,
    heuristic_p: float = HEURISTIC_P_OPTION,
    aggressive_p: float = AGGRESSIVE_P_OPTION,
    psnr_convention: str = typer.Option(None, "--psnr-convention",
                                        help="Crête du PSNR : linear (alias paper) ou standard"),
    n_max: int = N_MAX_OPTION,
    gop: int = GOP_OPTION,
    rho_l0: float = RHO_L0_OPTION,
    rho_l1: float = RHO_L1_OPTION,
    rho_d1: float = RHO_D1_OPTION,
) -> None:
    """
    📊 Évalue analytiquement une politique (D_LTE, T_D2D, PSNR)
    """
    cfg = _load_config(ctx, n_max, gop, rho_l0, rho_l1, rho_d1)
    convention = _parse_psnr_convention(psnr_convention) if psnr_convention else None
    cfg.apply_overrides("mse", psnr_convention=convention.value if convention else None)
    chain = cfg.build_chain()
    selected = _resolve_policy(chain, policy, const_p, heuristic_p, aggressive_p)
    report = evaluate_policy(chain, selected)
    mse_params = cfg.mse_params()
    rows = [
        ("D_LTE", report.d_lte),
        ("T_D2D", report.t_d2d),
        ("p_err", report.p_err),
        ("MSE", mse_from_error_rate(min(max(report.p_err, 0.0), 1.0), mse_params)),
        (f"PSNR ({cfg.psnr_convention.value}) dB", psnr_for_report(report, mse_params, cfg.psnr_convention)),
    ]
    console.print(_summary_table(f"Évaluation {selected.label}", rows, cfg.precision))


@app.command()
@handle_errors
def simulate(
    ctx: typer.Context,
    slots: int = typer.Option(None, "--slots", help="Slots par réplication"),
    replications: int = typer.Option(None, "--replications", help="Réplications indépendantes"),
    batches: int = typer.Option(None, "--batches", help="Lots pour l'erreur standard"),
    jobs: int = typer.Option(None, "--jobs", help="Processus pour les réplications"),
    seed: int = SEED_OPTION,
    policy: str = POLICY_OPTION,
    const_p: float = CONST_P_OPTION,
    heuristic_p: float = HEURISTIC_P_OPTION,
    aggressive_p: float = AGGRESSIVE_P_OPTION,
    delta: float = typer.Option(None, "--delta", help="Simule la politique optimale pour ce delta"),
    sample_fading: bool = typer.Option(False, "--sample-fading", help="Tire les gains (config channel requise)"),
    out_replications: str = typer.Option(None, "--out-replications", help="CSV par réplication"),
    n_max: int = N_MAX_OPTION,
    gop: int = GOP_OPTION,
    rho_l0: float = RHO_L0_OPTION,
    rho_l1: float = RHO_L1_OPTION,
    rho_d1: float = RHO_D1_OPTION,
) -> None:
    """
    🎲 Simulation Monte Carlo : D_LTE et T_D2D empiriques
    """
    cfg = _load_config(ctx, n_max, gop, rho_l0, rho_l1, rho_d1)
    cfg.apply_overrides("simulation", slots=slots, replications=replications,
                        batches=batches, jobs=jobs, seed=seed)
    problems = cfg.validate_config()
    if problems:
        raise ValueError("Configuration invalide : " + "; ".join(problems))
    chain = cfg.build_chain()

    selected = _resolve_policy(chain, policy, const_p, heuristic_p, aggressive_p, required=delta is None)
    if delta is not None:
        if selected is not None:
            raise typer.BadParameter("--delta est exclusif des autres sources de politique")
        selected = solve_lp(build_lp(chain, delta), cfg.solver_options()).policy

    channel_params = None
    if sample_fading:
        channel_params = cfg.channel_params()
        if channel_params is None:
            raise ValueError("--sample-fading exige un bloc model.channel dans la configuration")

    sim = cfg.simulation
    report = run_simulation(SimConfig(
        chain=chain, policy=selected, slots=sim["slots"], seed=sim["seed"],
        replications=sim["replications"], batches=sim["batches"], jobs=sim["jobs"],
        channel=channel_params,
    ))
    analytic = evaluate_policy(chain, selected)

    table = Table(title=f"Simulation {selected.label}", show_header=True, header_style="bold magenta")
    table.add_column("Métrique", style="dim")
    table.add_column("Empirique", justify="right")
    table.add_column("Erreur std", justify="right")
    table.add_column("Analytique", justify="right")
    p = cfg.precision
    table.add_row("D_LTE", _fmt(report.d_lte, p), _fmt(report.stderr_d_lte, 2), _fmt(analytic.d_lte, p))
    table.add_row("T_D2D", _fmt(report.t_d2d, p), _fmt(report.stderr_t_d2d, 2), _fmt(analytic.t_d2d, p))
    console.print(table)

    if out_replications:
        _write_frame(replications_to_frame(report), out_replications, p)


@app.command()
@handle_errors
def trace(
    ctx: typer.Context,
    frames: int = typer.Option(300, "--frames", help="Nombre de trames"),
    force_loss: str = typer.Option(None, "--force-loss", help="I-frames perdues imposées, ex. 121,241"),
    no_channel_loss: bool = typer.Option(False, "--no-channel-loss", help="Aucune perte aléatoire"),
    out: str = typer.Option(None, "--out", "-o", help="CSV de la trace (sortie standard sinon)"),
    seed: int = SEED_OPTION,
    policy: str = POLICY_OPTION,
    const_p: float = CONST_P_OPTION,
    heuristic_p: float = HEURISTIC_P_OPTION,
    aggressive_p: float = AGGRESSIVE_P_OPTION,
    n_max: int = N_MAX_OPTION,
    gop: int = GOP_OPTION,
    rho_l0: float = RHO_L0_OPTION,
    rho_l1: float = RHO_L1_OPTION,
    rho_d1: float = RHO_D1_OPTION,
) -> None:
    """
    🎞️  Trace trame par trame de la propagation d'erreur (MSE par trame)
    """
    if no_channel_loss:
        rho_l0 = rho_l1 = rho_d1 = 0.0
    cfg = _load_config(ctx, n_max, gop, rho_l0, rho_l1, rho_d1)
    cfg.apply_overrides("simulation", seed=seed)
    chain = cfg.build_chain()
    selected = _resolve_policy(chain, policy, const_p, heuristic_p, aggressive_p, required=False)
    selected = selected or Policy.constant(0.0)
    forced = parse_index_list(force_loss) if force_loss else None

    records = run_trace(
        SimConfig(chain=chain, policy=selected, slots=frames, seed=cfg.simulation["seed"], batches=1),
        cfg.mse_params(),
        forced_i_frame_losses=forced,
    )
    _write_frame(trace_to_frame(records), out, cfg.precision)
    corrupted = sum(r.frame_corrupted for r in records)
    summary = console if out else err_console
    summary.print(f"🎞️  {len(records)} trames, {corrupted} corrompues")


@app.command()
@handle_errors
def scatter(
    ctx: typer.Context,
    grid: str = typer.Option("0.1:1.0:0.1", "--grid", help="Grille debut:fin:pas de p_tx"),
    slots: int = typer.Option(None, "--slots", help="Slots par politique"),
    seed: int = SEED_OPTION,
    out: str = typer.Option(None, "--out", "-o", help="CSV du nuage (sortie standard sinon)"),
    n_max: int = N_MAX_OPTION,
    gop: int = GOP_OPTION,
    rho_l0: float = RHO_L0_OPTION,
    rho_l1: float = RHO_L1_OPTION,
    rho_d1: float = RHO_D1_OPTION,
) -> None:
    """
    📉 MSE moyen en fonction du débit D2D : politiques constante et heuristique
    """
    cfg = _load_config(ctx, n_max, gop, rho_l0, rho_l1, rho_d1)
    cfg.apply_overrides("simulation", slots=slots, seed=seed)
    chain = cfg.build_chain()
    p_grid = parse_grid(grid)
    if any(p > 1.0 for p in p_grid):
        raise ValueError("La grille de p_tx doit rester dans [0, 1]")
    policies = [Policy.constant(p) for p in p_grid] + [Policy.heuristic(p) for p in p_grid]

    sim = cfg.simulation
    points = mse_throughput_scatter(chain, policies, cfg.mse_params(), slots=sim["slots"],
                                    seed=sim["seed"], batches=sim["batches"])
    _write_frame(scatter_to_frame(points), out, cfg.precision)
    summary = console if out else err_console
    summary.print(f"📉 {len(points)} politiques simulées sur {sim['slots']} slots")


@app.command(name="chain")
@handle_errors
def chain_command(
    ctx: typer.Context,
    out: str = typer.Option(None, "--out", "-o", help="CSV du listing (sortie standard sinon)"),
    n_max: int = N_MAX_OPTION,
    gop: int = GOP_OPTION,
) -> None:
    """
    🔗 Listing diagnostique index -> état (i_rx, n_tx, n_rx)
    """
    cfg = _load_config(ctx, n_max, gop)
    _write_frame(chain_listing(cfg.build_chain()), out, cfg.precision)


def main() -> None:
    """Point d'entrée principal"""
    app()


if __name__ == "__main__":
    main()
