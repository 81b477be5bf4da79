#!/usr/bin/env python3
"""
Configuration centralisée Coex Toolkit

Configuration d'une exécution (RunConfig) : modèle, solveur, simulation,
modèle de distorsion et sortie. Les valeurs viennent, par ordre de priorité
croissante, des défauts intégrés, du fichier JSON puis des options CLI.
"""

import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv

from scripts.analysis.policy_metrics import MseModelParams
from scripts.model.channel import ChannelParams, LinkFailureProbs, failure_probs
from scripts.model.gop_model import GopChain, GopConfig, build_chain
from scripts.optimization.optimizer import SolverOptions
from scripts.utils.constants import (
    CONFIG_ENV_VAR, DEFAULT_MODEL, DEFAULT_MSE, DEFAULT_OUTPUT, DEFAULT_SIMULATION,
    DEFAULT_SOLVER, EXPORT_CONFIG, LOCAL_CONFIG_FILE, PsnrConvention,
)
from scripts.utils.errors import ConfigError
from scripts.utils.validators import validate_file_path

logger = logging.getLogger(__name__)

SECTIONS = ("model", "solver", "simulation", "mse", "output")
RHO_KEYS = ("rho_l0", "rho_l1", "rho_d1")
CHANNEL_KEYS = ("p_l", "p_d", "sigma2_l", "sigma2_d", "gamma")


class CoexConfig:
    """
    Configuration complète d'une exécution

    Sections :
    - model : n_max, beta, et soit rho_l0/rho_l1/rho_d1 soit channel
    - solver : tolérances et méthode du PL
    - simulation : slots, seed, replications, batches, jobs
    - mse : d_e, c, sigma_e, w, psnr_convention
    - output : precision
    """

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        explicit = config_file is not None
        self.config_file = str(config_file) if explicit else self._get_default_config_path()
        self.model: Dict[str, Any] = copy.deepcopy(DEFAULT_MODEL)
        self.channel: Optional[Dict[str, float]] = None
        self.solver: Dict[str, Any] = dict(DEFAULT_SOLVER)
        self.simulation: Dict[str, Any] = dict(DEFAULT_SIMULATION)
        self.mse: Dict[str, Any] = dict(DEFAULT_MSE)
        self.output: Dict[str, Any] = dict(DEFAULT_OUTPUT)

        if self.config_file:
            if not Path(self.config_file).is_file():
                if explicit:
                    raise ConfigError(f"Fichier de configuration introuvable: {self.config_file}")
            else:
                self._load_custom_config()

    def _get_default_config_path(self) -> Optional[str]:
        """Retourne le chemin de config : variable d'environnement, dossier courant, aucun"""
        load_dotenv()
        env_path = os.getenv(CONFIG_ENV_VAR)
        if env_path:
            try:
                return str(validate_file_path(env_path, must_exist=True))
            except ValueError as e:
                raise ConfigError(f"{CONFIG_ENV_VAR} invalide: {e}") from None

        if Path(LOCAL_CONFIG_FILE).is_file():
            return LOCAL_CONFIG_FILE

        return None

    def _load_custom_config(self) -> None:
        """Charge le fichier JSON par-dessus les défauts"""
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                custom = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(
                f"{self.config_file}: JSON invalide ligne {e.lineno}, colonne {e.colno}: {e.msg}"
            ) from None
        except OSError as e:
            raise ConfigError(f"Lecture impossible de {self.config_file}: {e}") from None

        if not isinstance(custom, dict):
            raise ConfigError(f"{self.config_file}: un objet JSON est attendu")
        unknown = sorted(set(custom) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"{self.config_file}: sections inconnues {unknown}")

        model = dict(custom.get("model", {}))
        if "channel" in model:
            if any(key in model for key in RHO_KEYS):
                raise ConfigError("model: indiquer soit rho_l0/rho_l1/rho_d1 soit channel, pas les deux")
            self.set_channel(model.pop("channel"))
        self._update_section("model", model)
        for section in ("solver", "simulation", "mse", "output"):
            self._update_section(section, custom.get(section, {}))
        logger.info(f"Configuration chargée: {self.config_file}")

    def _update_section(self, section: str, values: Dict[str, Any]) -> None:
        target = getattr(self, section)
        if not isinstance(values, dict):
            raise ConfigError(f"{section}: un objet est attendu")
        unknown = sorted(set(values) - set(target))
        if unknown:
            raise ConfigError(f"{section}: champs inconnus {unknown}")
        target.update(values)

    def set_channel(self, channel: Optional[Dict[str, float]]) -> None:
        """Remplace les rho directs par des paramètres de canal (unités linéaires)"""
        if channel is None:
            self.channel = None
            return
        if not isinstance(channel, dict) or set(channel) != set(CHANNEL_KEYS):
            raise ConfigError(f"model.channel doit contenir exactement {list(CHANNEL_KEYS)}")
        self.channel = {key: float(channel[key]) for key in CHANNEL_KEYS}

    def apply_overrides(self, section: str, **values: Any) -> None:
        """
        Applique les options CLI (les valeurs None sont ignorées)

        Un rho donné en option remplace un bloc channel venu du fichier.
        """
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return
        if section == "model" and any(key in values for key in RHO_KEYS) and self.channel:
            logger.info("Les rho passés en option remplacent le bloc channel")
            self.channel = None
        self._update_section(section, values)

    def gop_config(self) -> GopConfig:
        beta = self.model["beta"]
        if beta == "fixed":
            return GopConfig.fixed(self.model["n_max"])
        if isinstance(beta, str):
            raise ConfigError(f"model.beta: 'fixed' ou une liste attendue (reçu {beta!r})")
        return GopConfig(n_max=self.model["n_max"], beta=tuple(beta))

    def channel_params(self) -> Optional[ChannelParams]:
        return None if self.channel is None else ChannelParams(**self.channel)

    def failure_probs(self) -> LinkFailureProbs:
        """Probabilités d'échec, directes ou dérivées du canal"""
        params = self.channel_params()
        if params is not None:
            return failure_probs(params)
        return LinkFailureProbs(
            rho_l_0=self.model["rho_l0"],
            rho_l_1=self.model["rho_l1"],
            rho_d_1=self.model["rho_d1"],
        )

    def build_chain(self) -> GopChain:
        return build_chain(self.gop_config(), self.failure_probs())

    def solver_options(self) -> SolverOptions:
        return SolverOptions.from_dict(self.solver)

    def mse_params(self) -> MseModelParams:
        return MseModelParams(
            d_e=float(self.mse["d_e"]),
            c=float(self.mse["c"]),
            sigma_e=float(self.mse["sigma_e"]),
            w=self.mse["w"],
        )

    @property
    def psnr_convention(self) -> PsnrConvention:
        return PsnrConvention(self.mse["psnr_convention"])

    @property
    def precision(self) -> int:
        return int(self.output["precision"])

    def to_dict(self) -> Dict[str, Any]:
        """Document JSON relisible tel quel par toutes les commandes"""
        model = {"n_max": self.model["n_max"], "beta": self.model["beta"]}
        if self.channel is not None:
            model["channel"] = dict(self.channel)
        else:
            model.update({key: self.model[key] for key in RHO_KEYS})
        return {
            "model": model,
            "solver": dict(self.solver),
            "simulation": dict(self.simulation),
            "mse": dict(self.mse),
            "output": dict(self.output),
        }

    def save_custom_config(self, filepath: Optional[Union[str, Path]] = None) -> Path:
        """Sauvegarde la configuration actuelle"""
        filepath = Path(filepath or self.config_file or LOCAL_CONFIG_FILE)
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, **EXPORT_CONFIG["json"])
        logger.info(f"Configuration écrite: {filepath}")
        return filepath

    def validate_config(self) -> List[str]:
        """Valide la configuration et retourne les erreurs"""
        errors = []

        try:
            self.gop_config()
        except (ValueError, TypeError) as e:
            errors.append(f"model: {e}")

        try:
            self.failure_probs()
        except (ValueError, TypeError) as e:
            errors.append(f"model: {e}")

        try:
            self.mse_params()
            self.psnr_convention
        except (ValueError, TypeError) as e:
            errors.append(f"mse: {e}")

        for key in ("slots", "replications", "batches", "jobs"):
            value = self.simulation[key]
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                errors.append(f"simulation.{key} doit être un entier >= 1 (reçu {value!r})")
        seed = self.simulation["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            errors.append(f"simulation.seed doit être un entier >= 0 (reçu {seed!r})")

        for key in ("feasibility_tol", "optimality_tol", "residual_tol", "visit_tol"):
            value = self.solver[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                errors.append(f"solver.{key} doit être > 0 (reçu {value!r})")

        precision = self.output["precision"]
        if isinstance(precision, bool) or not isinstance(precision, int) or not 1 <= precision <= 17:
            errors.append(f"output.precision doit être un entier entre 1 et 17 (reçu {precision!r})")

        return errors
