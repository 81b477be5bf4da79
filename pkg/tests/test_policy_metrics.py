#!/usr/bin/env python3
"""
Tests unitaires pour le module policy_metrics
"""

import json
import math
import pytest
import sys
from pathlib import Path

import numpy as np

# Ajouter le chemin parent pour importer les modules
sys.path.insert(0, str(Path(__file__).parent.parent))
from scripts.analysis.policy_metrics import (
    MseModelParams, Policy, baseline_delivery_rate, baseline_probability_for_rate,
    baseline_throughput, evaluate, load_policy, mse_from_error_rate, psnr_for_report,
    psnr_from_mse, save_policy
)
from scripts.model.channel import LinkFailureProbs
from scripts.model.gop_model import GopConfig, build_chain
from scripts.utils.constants import POLICY_FILE_FIELDS, PolicyKind, PsnrConvention
from scripts.utils.errors import ModelDomainError, PolicyFileError


REFERENCE_PROBS = LinkFailureProbs(rho_l_0=0.01, rho_l_1=0.1, rho_d_1=0.1)
P_GRID = [round(0.1 * k, 1) for k in range(11)]


@pytest.fixture(scope="module")
def chain24():
    return build_chain(GopConfig.fixed(24), REFERENCE_PROBS)


class TestPolicy:
    """Tests pour Policy"""

    def test_constant(self, chain24):
        """Test p_tx dans tous les états"""
        q = Policy.constant(0.3).transmit_probabilities(chain24)
        assert np.all(q == 0.3)

    def test_heuristic(self, chain24):
        """Test I-frame protégée"""
        q = Policy.heuristic(0.7).transmit_probabilities(chain24)
        assert q[0] == 0.0
        assert np.all(q[1:] == 0.7)

    def test_heuristic_aggressive(self, chain24):
        """Test émission certaine quand l'I-frame est perdue"""
        q = Policy.heuristic_aggressive(0.2).transmit_probabilities(chain24)
        assert q[0] == 0.0
        assert np.all(q[chain24.irx0_mask] == 1.0)
        assert np.all(q[chain24.irx1_mask] == 0.2)

    def test_action_distribution(self, chain24):
        """Test distribution d'actions sommant à 1"""
        dist = Policy.heuristic(0.4).action_distribution(chain24)
        assert dist.shape == (chain24.n_states, 2)
        assert np.allclose(dist.sum(axis=1), 1.0)

    def test_invalid(self, chain24):
        """Test politiques refusées"""
        with pytest.raises(ModelDomainError):
            Policy.constant(1.5)
        with pytest.raises(ModelDomainError):
            Policy.tabular([0.5, -0.1])
        with pytest.raises(ModelDomainError):
            Policy(kind=PolicyKind.HEURISTIC)
        with pytest.raises(ModelDomainError, match="Table"):
            Policy.tabular([0.5, 0.5]).transmit_probabilities(chain24)

    def test_kind_from_string(self):
        """Test kind donné sous forme de chaîne"""
        assert Policy(kind="heuristic-aggressive", p_tx=0.5).kind == PolicyKind.HEURISTIC_AGGRESSIVE


class TestEvaluate:
    """Tests pour evaluate"""

    @pytest.mark.parametrize("n_max", [23, 24])
    def test_closed_form_oracle(self, n_max):
        """Test politique constante = formes closes à 1e-9"""
        chain = build_chain(GopConfig.fixed(n_max), REFERENCE_PROBS)
        for p in P_GRID:
            report = evaluate(chain, Policy.constant(p))
            assert report.d_lte == pytest.approx(baseline_delivery_rate(n_max, 0.01, 0.1, p), abs=1e-9)
            assert report.t_d2d == pytest.approx(baseline_throughput(0.1, p), abs=1e-9)

    def test_reference_values(self, chain24):
        """Test D_LTE(0) = 0.980496, D_LTE(1) = 0.8136, T(1) = 0.9"""
        idle = evaluate(chain24, Policy.constant(0.0))
        assert idle.d_lte == pytest.approx(0.980496, abs=1e-9)
        assert idle.t_d2d == 0.0
        busy = evaluate(chain24, Policy.constant(1.0))
        assert busy.d_lte == pytest.approx(0.8136, abs=1e-9)
        assert busy.t_d2d == pytest.approx(0.9, abs=1e-9)

    def test_perfect_channel(self):
        """Test canal parfait : toutes les trames livrées"""
        chain = build_chain(GopConfig.fixed(24), LinkFailureProbs(0.0, 0.0, 0.0))
        for policy in (Policy.constant(0.3), Policy.heuristic(1.0)):
            assert evaluate(chain, policy).d_lte == pytest.approx(1.0, abs=1e-12)

    def test_heuristic_closed_form(self, chain24):
        """Test heuristique p=1 : 0.99 (24*0.9 + 1)/25"""
        report = evaluate(chain24, Policy.heuristic(1.0))
        assert report.d_lte == pytest.approx(0.99 * (24 * 0.9 + 1) / 25, abs=1e-9)
        assert report.d_lte == pytest.approx(0.89496, abs=1e-9)

    def test_aggressive_costs_nothing(self, chain24):
        """Test émettre quand l'I-frame est perdue ne change pas D_LTE"""
        plain = evaluate(chain24, Policy.heuristic(0.4))
        aggressive = evaluate(chain24, Policy.heuristic_aggressive(0.4))
        assert aggressive.d_lte == pytest.approx(plain.d_lte, abs=1e-12)
        assert aggressive.t_d2d > plain.t_d2d

    def test_delivery_nonincreasing(self):
        """Test augmenter une probabilité d'émission ne profite jamais au LTE"""
        chain = build_chain(GopConfig.variable([0.3, 0.6, 1.0]), REFERENCE_PROBS)
        rng = np.random.default_rng(17)
        for _ in range(10):
            q = rng.random(chain.n_states)
            base = evaluate(chain, Policy.tabular(q)).d_lte
            for s in range(chain.n_states):
                raised = q.copy()
                raised[s] = min(1.0, q[s] + 0.3)
                assert evaluate(chain, Policy.tabular(raised)).d_lte <= base + 1e-12

    def test_throughput_linear(self, chain24):
        """Test T_D2D = somme des marginales * q * (1 - rho_d1)"""
        q = np.random.default_rng(3).random(chain24.n_states)
        report = evaluate(chain24, Policy.tabular(q))
        marginal = report.pi.sum(axis=1)
        assert report.t_d2d == pytest.approx(float((marginal * q).sum() * 0.9), abs=1e-12)
        assert 0.0 <= report.t_d2d <= 0.9


class TestBaselines:
    """Tests pour les formes closes de la politique constante"""

    def test_delivery_rate(self):
        """Test valeurs de référence"""
        assert baseline_delivery_rate(24, 0.01, 0.1, 0.0) == pytest.approx(0.980496, abs=1e-12)
        assert baseline_delivery_rate(24, 0.0, 1.0, 1.0) == 0.0

    def test_degenerate_mixture(self):
        """Test rho0 = rho1 : indépendant de p_tx"""
        values = {round(baseline_delivery_rate(10, 0.2, 0.2, p), 12) for p in P_GRID}
        assert len(values) == 1

    def test_throughput(self):
        """Test T = p (1 - rho_d1)"""
        assert baseline_throughput(0.1, 1.0) == pytest.approx(0.9)
        assert baseline_throughput(0.7, 0.0) == 0.0
        assert baseline_throughput(0.0, 0.37) == pytest.approx(0.37)

    def test_range_checks(self):
        """Test entrées hors domaine"""
        with pytest.raises(ValueError):
            baseline_delivery_rate(0, 0.01, 0.1, 0.5)
        with pytest.raises(ValueError):
            baseline_throughput(0.1, 1.2)

    def test_probability_for_rate(self):
        """Test racine de D_LTE(p) = delta"""
        for delta in (0.82, 0.9, 0.95, 0.98):
            p = baseline_probability_for_rate(24, 0.01, 0.1, delta)
            assert 0.0 < p < 1.0
            assert baseline_delivery_rate(24, 0.01, 0.1, p) == pytest.approx(delta, abs=1e-12)

    def test_probability_clamped(self):
        """Test bornes : contrainte inactive ou plafond dépassé"""
        assert baseline_probability_for_rate(24, 0.01, 0.1, 0.5) == 1.0
        assert baseline_probability_for_rate(24, 0.01, 0.1, 0.99) == 0.0


class TestMseModel:
    """Tests pour le modèle MSE/PSNR"""

    def test_mse_examples(self):
        """Test MSE = D_e + C p_err sigma_e"""
        assert mse_from_error_rate(0.0, MseModelParams(d_e=3.0)) == 3.0
        assert mse_from_error_rate(0.5, MseModelParams(d_e=1.0, c=1.0, sigma_e=2.0)) == pytest.approx(2.0)
        assert mse_from_error_rate(1.0, MseModelParams(d_e=0.0, c=3.0, sigma_e=2.0)) == pytest.approx(6.0)

    def test_psnr_examples(self):
        """Test PSNR = 10 log10(2^W / MSE)"""
        assert psnr_from_mse(256.0, 8) == pytest.approx(0.0, abs=1e-12)
        assert psnr_from_mse(1.0, 8) == pytest.approx(24.0824, abs=1e-4)
        assert psnr_from_mse(2.56, 8) == pytest.approx(20.0, abs=1e-9)

    def test_psnr_standard_convention(self):
        """Test crête (2^W - 1)^2"""
        value = psnr_from_mse(1.0, 8, PsnrConvention.STANDARD)
        assert value == pytest.approx(10 * math.log10(255.0 ** 2))
        assert psnr_from_mse(1.0, 8, "standard") == value

    def test_psnr_convention_alias(self):
        """Test "paper" désigne la crête 2^W"""
        assert PsnrConvention("paper") is PsnrConvention.LINEAR
        assert psnr_from_mse(2.56, 8, "paper") == pytest.approx(20.0, abs=1e-9)
        with pytest.raises(ValueError):
            PsnrConvention("db")

    def test_psnr_domain(self):
        """Test MSE non positive refusée"""
        for mse in (0.0, -1.0):
            with pytest.raises(ModelDomainError):
                psnr_from_mse(mse, 8)

    def test_monotonicity(self):
        """Test PSNR décroissant en MSE, MSE croissant en p_err"""
        psnr = [psnr_from_mse(m, 8) for m in (0.5, 1.0, 10.0, 100.0)]
        assert all(a > b for a, b in zip(psnr, psnr[1:]))
        params = MseModelParams(d_e=1.0, c=2.0, sigma_e=10.0)
        mse = [mse_from_error_rate(p, params) for p in (0.0, 0.25, 0.5, 1.0)]
        assert mse == pytest.approx([1.0, 6.0, 11.0, 21.0])

    def test_params_validated(self):
        """Test paramètres négatifs refusés"""
        with pytest.raises(ModelDomainError):
            MseModelParams(d_e=-1.0)
        with pytest.raises(ModelDomainError):
            MseModelParams(w=0)

    def test_psnr_for_report(self, chain24):
        """Test D_LTE -> p_err -> MSE -> PSNR"""
        report = evaluate(chain24, Policy.constant(1.0))
        params = MseModelParams(d_e=1.0, c=1.0, sigma_e=100.0, w=8)
        expected = 10 * math.log10(256.0 / (1.0 + (1.0 - 0.8136) * 100.0))
        assert psnr_for_report(report, params) == pytest.approx(expected, abs=1e-6)


class TestPolicyFile:
    """Tests pour save_policy / load_policy"""

    def test_save_and_load(self, chain24, tmp_path):
        """Test fichier auto-descriptif relu à l'identique"""
        policy = Policy.heuristic_aggressive(0.35)
        path = save_policy(tmp_path / "policy.json", chain24, policy)

        document = json.loads(path.read_text(encoding="utf-8"))
        assert list(document) == POLICY_FILE_FIELDS
        assert POLICY_FILE_FIELDS == ["n_max", "beta", "rho_l0", "rho_l1", "rho_d1", "policy"]
        assert document["beta"] == "fixed"
        assert set(document["policy"][0]) == {"i_rx", "n_tx", "n_rx", "p_transmit"}

        loaded = load_policy(path)
        assert loaded.gop == chain24.gop
        assert loaded.failure_probs == chain24.failure_probs
        assert np.allclose(loaded.policy_for(chain24).transmit_probabilities(chain24),
                           policy.transmit_probabilities(chain24))

    def test_json_syntax_error(self, tmp_path):
        """Test diagnostic ligne/colonne"""
        path = tmp_path / "broken.json"
        path.write_text('{\n  "n_max": 1,\n  oops\n}\n', encoding="utf-8")
        with pytest.raises(PolicyFileError, match="ligne 3"):
            load_policy(path)

    def test_missing_state(self, tmp_path):
        """Test état manquant signalé"""
        path = tmp_path / "partial.json"
        path.write_text(json.dumps({
            "n_max": 1, "beta": "fixed", "rho_l0": 0.01, "rho_l1": 0.1, "rho_d1": 0.1,
            "policy": [{"i_rx": 0, "n_tx": 0, "n_rx": 0, "p_transmit": 0.0}],
        }), encoding="utf-8")
        with pytest.raises(PolicyFileError, match="manquant") as excinfo:
            load_policy(path)
        assert excinfo.value.path == str(path)

    def test_invalid_state(self, tmp_path):
        """Test état hors de l'espace"""
        entries = [
            {"i_rx": 0, "n_tx": 0, "n_rx": 0, "p_transmit": 0.0},
            {"i_rx": 0, "n_tx": 1, "n_rx": 0, "p_transmit": 1.0},
            {"i_rx": 1, "n_tx": 1, "n_rx": 1, "p_transmit": 0.5},
        ]
        path = tmp_path / "invalid.json"
        path.write_text(json.dumps({
            "n_max": 1, "beta": "fixed", "rho_l0": 0.01, "rho_l1": 0.1, "rho_d1": 0.1, "policy": entries,
        }), encoding="utf-8")
        with pytest.raises(PolicyFileError, match="policy.2"):
            load_policy(path)

    def test_schema_error(self, tmp_path):
        """Test champ hors domaine"""
        path = tmp_path / "schema.json"
        path.write_text(json.dumps({
            "n_max": 1, "beta": "fixed", "rho_l0": 0.01, "rho_l1": 1.1, "rho_d1": 0.1, "policy": [],
        }), encoding="utf-8")
        with pytest.raises(PolicyFileError, match="rho_l1"):
            load_policy(path)

    def test_chain_mismatch(self, chain24, tmp_path):
        """Test politique appliquée à une chaîne d'une autre taille"""
        small = build_chain(GopConfig.fixed(2), REFERENCE_PROBS)
        path = save_policy(tmp_path / "small.json", small, Policy.constant(0.5))
        with pytest.raises(PolicyFileError, match="n_max"):
            load_policy(path).policy_for(chain24)
