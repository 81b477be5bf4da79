#!/usr/bin/env python3
"""
Tests unitaires pour le module de configuration
"""

import pytest
import sys
import json
from pathlib import Path

# Ajouter le chemin parent pour importer les modules
sys.path.insert(0, str(Path(__file__).parent.parent))
from scripts.config.coex_config import CoexConfig
from scripts.utils.constants import CONFIG_ENV_VAR, LOCAL_CONFIG_FILE, PsnrConvention
from scripts.utils.errors import ConfigError


CHANNEL = {"p_l": 1.0, "p_d": 1.4426950408889634, "sigma2_l": 1.0, "sigma2_d": 1.0, "gamma": 0.6931471805599453}


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """Dossier courant vide et variable d'environnement absente"""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)


def write_config(path, document):
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


class TestDefaults:
    """Tests des valeurs par défaut"""

    def test_default_values(self):
        """Test valeurs par défaut"""
        config = CoexConfig()
        assert config.config_file is None
        assert config.model["n_max"] == 24
        assert config.model["beta"] == "fixed"
        assert config.simulation["slots"] == 100_000
        assert config.mse["sigma_e"] == 100.0
        assert config.precision == 6
        assert config.psnr_convention == PsnrConvention.LINEAR

    def test_default_chain(self):
        """Test chaîne par défaut : 601 états"""
        chain = CoexConfig().build_chain()
        assert chain.n_states == 601
        assert chain.failure_probs.rho_l_1 == 0.1

    def test_validate_config_success(self):
        """Test validation config par défaut"""
        assert CoexConfig().validate_config() == []


class TestFileLoading:
    """Tests du chargement de fichier"""

    def test_load_custom_config(self, tmp_path):
        """Test surcharge partielle"""
        path = write_config(tmp_path / "run.json", {
            "model": {"n_max": 5, "rho_l1": 0.3},
            "simulation": {"seed": 42},
        })
        config = CoexConfig(config_file=path)
        assert config.model["n_max"] == 5
        assert config.model["rho_l1"] == 0.3
        assert config.model["rho_l0"] == 0.01
        assert config.simulation["seed"] == 42
        assert config.simulation["slots"] == 100_000

    def test_local_file(self, tmp_path):
        """Test fichier du dossier courant"""
        write_config(tmp_path / LOCAL_CONFIG_FILE, {"output": {"precision": 9}})
        config = CoexConfig()
        assert config.config_file == LOCAL_CONFIG_FILE
        assert config.precision == 9

    def test_env_variable(self, tmp_path, monkeypatch):
        """Test chemin config depuis variable environnement"""
        path = write_config(tmp_path / "env.json", {"model": {"n_max": 3}})
        monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
        config = CoexConfig()
        assert config.model["n_max"] == 3

    def test_env_variable_missing_file(self, tmp_path, monkeypatch):
        """Test variable d'environnement vers un fichier absent"""
        monkeypatch.setenv(CONFIG_ENV_VAR, str(tmp_path / "absent.json"))
        with pytest.raises(ConfigError, match=CONFIG_ENV_VAR):
            CoexConfig()

    def test_explicit_missing_file(self, tmp_path):
        """Test fichier explicite absent"""
        with pytest.raises(ConfigError, match="introuvable"):
            CoexConfig(config_file=tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        """Test JSON mal formé : ligne et colonne signalées"""
        path = tmp_path / "bad.json"
        path.write_text('{\n  "model": {\n    "n_max": ,\n  }\n}', encoding="utf-8")
        with pytest.raises(ConfigError, match="ligne 3"):
            CoexConfig(config_file=path)

    def test_not_an_object(self, tmp_path):
        """Test document qui n'est pas un objet"""
        with pytest.raises(ConfigError, match="objet"):
            CoexConfig(config_file=write_config(tmp_path / "list.json", [1, 2]))

    def test_unknown_section(self, tmp_path):
        """Test section inconnue"""
        with pytest.raises(ConfigError, match="sections inconnues"):
            CoexConfig(config_file=write_config(tmp_path / "c.json", {"platforms": {}}))

    def test_unknown_field(self, tmp_path):
        """Test champ inconnu dans une section"""
        with pytest.raises(ConfigError, match="champs inconnus"):
            CoexConfig(config_file=write_config(tmp_path / "c.json", {"solver": {"pivot": "bland"}}))

    def test_channel_and_rho(self, tmp_path):
        """Test channel et rho fournis ensemble"""
        path = write_config(tmp_path / "c.json", {"model": {"channel": CHANNEL, "rho_l0": 0.1}})
        with pytest.raises(ConfigError, match="pas les deux"):
            CoexConfig(config_file=path)

    def test_channel_incomplete(self, tmp_path):
        """Test bloc channel incomplet"""
        path = write_config(tmp_path / "c.json", {"model": {"channel": {"p_l": 1.0}}})
        with pytest.raises(ConfigError, match="model.channel"):
            CoexConfig(config_file=path)

    def test_channel_probabilities(self, tmp_path):
        """Test rho dérivés du canal"""
        config = CoexConfig(config_file=write_config(tmp_path / "c.json", {"model": {"channel": CHANNEL}}))
        probs = config.failure_probs()
        assert probs.rho_l_0 == pytest.approx(0.5, abs=1e-12)
        assert probs.rho_l_1 == pytest.approx(0.75, abs=1e-12)
        assert config.channel_params().gamma == pytest.approx(0.6931471805599453)

    def test_variable_beta(self, tmp_path):
        """Test GoP variable depuis le fichier"""
        path = write_config(tmp_path / "c.json", {"model": {"n_max": 2, "beta": [0.5, 1.0]}})
        gop = CoexConfig(config_file=path).gop_config()
        assert gop.beta == (0.5, 1.0)
        assert not gop.is_fixed


class TestOverrides:
    """Tests de la priorité des options CLI"""

    def test_flags_win_over_file(self, tmp_path):
        """Test options > fichier > défauts"""
        config = CoexConfig(config_file=write_config(tmp_path / "c.json", {"model": {"n_max": 5}}))
        config.apply_overrides("model", n_max=7, rho_l0=None)
        assert config.model["n_max"] == 7
        assert config.model["rho_l0"] == 0.01

    def test_rho_override_clears_channel(self, tmp_path):
        """Test un rho en option remplace le bloc channel"""
        config = CoexConfig(config_file=write_config(tmp_path / "c.json", {"model": {"channel": CHANNEL}}))
        config.apply_overrides("model", rho_l1=0.2)
        assert config.channel is None
        assert config.failure_probs().rho_l_1 == 0.2

    def test_unknown_override(self):
        """Test option inconnue"""
        with pytest.raises(ConfigError):
            CoexConfig().apply_overrides("simulation", speed=3)

    def test_solver_options(self):
        """Test options du solveur"""
        config = CoexConfig()
        config.apply_overrides("solver", feasibility_tol=1e-7)
        assert config.solver_options().feasibility_tol == 1e-7


class TestSaveAndValidate:
    """Tests de sauvegarde et validation"""

    def test_save_round_trip(self, tmp_path):
        """Test sauvegarde puis relecture identique"""
        config = CoexConfig()
        config.apply_overrides("model", n_max=4, rho_d1=0.2)
        path = config.save_custom_config(tmp_path / "saved.json")
        reloaded = CoexConfig(config_file=path)
        assert reloaded.to_dict() == config.to_dict()

    def test_save_channel(self, tmp_path):
        """Test bloc channel écrit à la place des rho"""
        config = CoexConfig()
        config.set_channel(CHANNEL)
        saved = json.loads(config.save_custom_config(tmp_path / "s.json").read_text(encoding="utf-8"))
        assert saved["model"]["channel"] == CHANNEL
        assert "rho_l0" not in saved["model"]

    def test_validate_config_problems(self):
        """Test validation avec valeurs invalides"""
        config = CoexConfig()
        config.model["rho_l0"] = 0.5
        config.simulation["slots"] = 0
        config.output["precision"] = 40
        config.mse["psnr_convention"] = "db"
        errors = config.validate_config()
        assert any(e.startswith("model:") for e in errors)
        assert any("simulation.slots" in e for e in errors)
        assert any("output.precision" in e for e in errors)
        assert any(e.startswith("mse:") for e in errors)

    def test_validate_bad_beta(self):
        """Test beta incohérent avec n_max"""
        config = CoexConfig()
        config.model["beta"] = [0.5, 1.0]
        assert any("model" in e for e in config.validate_config())
