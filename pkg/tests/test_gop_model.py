#!/usr/bin/env python3
"""
Tests unitaires pour le module gop_model
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Ajouter le chemin parent pour importer les modules
sys.path.insert(0, str(Path(__file__).parent.parent))
from scripts.model.channel import LinkFailureProbs
from scripts.model.gop_model import (
    IFRAME_STATE, GopConfig, State, build_chain, chain_listing,
    enumerate_states, solve_stationary, stationary_distribution, transmit_vector
)
from scripts.utils.errors import ModelDomainError, NumericalFailure


REFERENCE_PROBS = LinkFailureProbs(rho_l_0=0.01, rho_l_1=0.1, rho_d_1=0.1)


def lazy_power_iteration(transition: np.ndarray, steps: int = 20_000) -> np.ndarray:
    """Distribution limite de la chaîne paresseuse (P + I)/2, même loi stationnaire"""
    lazy = 0.5 * (transition + np.eye(transition.shape[0]))
    x = np.full(transition.shape[0], 1.0 / transition.shape[0])
    for _ in range(steps):
        x = x @ lazy
    return x


class TestGopConfig:
    """Tests pour GopConfig"""

    def test_fixed(self):
        """Test GoP fixe : beta nul sauf beta(N) = 1"""
        gop = GopConfig.fixed(3)
        assert gop.beta == (0.0, 0.0, 1.0)
        assert gop.is_fixed
        assert gop.gop_length == 4
        assert gop.beta_field() == "fixed"

    def test_from_gop_length(self):
        """Test GoP de 24 trames => N = 23"""
        assert GopConfig.from_gop_length(24).n_max == 23
        with pytest.raises(ModelDomainError):
            GopConfig.from_gop_length(1)

    def test_variable(self):
        """Test GoP variable"""
        gop = GopConfig.variable([0.2, 0.5, 1.0])
        assert gop.n_max == 3
        assert not gop.is_fixed
        assert gop.gop_length is None
        assert gop.beta_field() == [0.2, 0.5, 1.0]
        assert gop.termination(0) == 0.0
        assert gop.termination(2) == 0.5

    def test_invalid(self):
        """Test configurations refusées"""
        with pytest.raises(ModelDomainError):
            GopConfig.fixed(0)
        with pytest.raises(ModelDomainError, match="beta"):
            GopConfig(n_max=2, beta=(0.5, 0.5))
        with pytest.raises(ModelDomainError, match="beta"):
            GopConfig(n_max=3, beta=(0.0, 1.0))


class TestStateSpace:
    """Tests pour enumerate_states"""

    def test_counts(self):
        """Test |S| = 1 + N(N+1)"""
        assert len(enumerate_states(1)) == 3
        assert len(enumerate_states(24)) == 601

    def test_lexicographic(self):
        """Test ordre lexicographique, I-frame en tête"""
        states = enumerate_states(4)
        assert states[0] == IFRAME_STATE
        assert list(states) == sorted(states)

    def test_validity(self):
        """Test n_rx < n_tx pour les trames différentielles"""
        for s in enumerate_states(5)[1:]:
            assert 1 <= s.n_tx <= 5
            assert 0 <= s.n_rx < s.n_tx
            assert s.i_rx in (0, 1)


class TestBuildChain:
    """Tests pour build_chain"""

    @pytest.fixture
    def chain2(self):
        return build_chain(GopConfig.fixed(2), REFERENCE_PROBS)

    def test_rows_stochastic(self):
        """Test chaque ligne du noyau somme à 1"""
        chain = build_chain(GopConfig.variable([0.3, 0.6, 1.0]), REFERENCE_PROBS)
        assert np.allclose(chain.kernel.sum(axis=2), 1.0, atol=1e-12)

    def test_iframe_transitions(self, chain2):
        """Test depuis l'I-frame : succès vers (1,1,0), échec vers (0,1,0)"""
        i0 = chain2.state_index(IFRAME_STATE)
        ok = chain2.state_index((1, 1, 0))
        lost = chain2.state_index((0, 1, 0))
        assert chain2.kernel[i0, 0, ok] == pytest.approx(0.99)
        assert chain2.kernel[i0, 0, lost] == pytest.approx(0.01)
        assert chain2.kernel[i0, 1, ok] == pytest.approx(0.9)
        assert chain2.kernel[i0, 1, lost] == pytest.approx(0.1)

    def test_dframe_transitions(self):
        """Test trame différentielle : fin de GoP, réception, perte"""
        chain = build_chain(GopConfig.variable([0.25, 1.0]), REFERENCE_PROBS)
        s = chain.state_index((1, 1, 0))
        assert chain.kernel[s, 1, 0] == pytest.approx(0.25)
        assert chain.kernel[s, 1, chain.state_index((1, 2, 1))] == pytest.approx(0.75 * 0.9)
        assert chain.kernel[s, 1, chain.state_index((1, 2, 0))] == pytest.approx(0.75 * 0.1)

    def test_last_frame_resets(self, chain2):
        """Test n_tx = N : retour certain à l'I-frame"""
        for state in [(0, 2, 0), (0, 2, 1), (1, 2, 0), (1, 2, 1)]:
            s = chain2.state_index(state)
            assert chain2.kernel[s, 0, 0] == 1.0
            assert chain2.kernel[s, 1, 0] == 1.0

    def test_rewards(self, chain2):
        """Test omega et phi"""
        assert np.all(chain2.omega[0] == 0.0)
        s = chain2.state_index((1, 2, 1))
        assert chain2.omega[s, 0] == pytest.approx(1 + 1 + 0.99)
        assert chain2.omega[s, 1] == pytest.approx(1 + 1 + 0.9)
        assert chain2.omega[chain2.state_index((0, 2, 1)), 1] == 0.0
        assert chain2.omega[chain2.state_index((1, 1, 0)), 0] == 0.0
        assert np.all(chain2.phi[:, 0] == 0.0)
        assert np.allclose(chain2.phi[:, 1], 0.9)

    def test_read_only(self, chain2):
        """Test tableaux immuables"""
        with pytest.raises(ValueError):
            chain2.kernel[0, 0, 0] = 0.5

    def test_masks(self, chain2):
        """Test partition des états en trois classes"""
        total = chain2.iframe_mask.astype(int) + chain2.irx1_mask + chain2.irx0_mask
        assert np.all(total == 1)
        assert chain2.iframe_mask.sum() == 1

    def test_unknown_state(self, chain2):
        """Test état hors de l'espace"""
        with pytest.raises(ModelDomainError):
            chain2.state_index((1, 3, 0))

    def test_listing(self, chain2):
        """Test listing index -> état"""
        listing = chain_listing(chain2)
        assert list(listing.columns) == ["index", "i_rx", "n_tx", "n_rx"]
        assert len(listing) == chain2.n_states
        assert tuple(listing.iloc[-1][["i_rx", "n_tx", "n_rx"]]) == (1, 2, 1)


class TestStationaryDistribution:
    """Tests pour stationary_distribution"""

    def test_sums_to_one(self):
        """Test pi somme à 1 et positivité"""
        chain = build_chain(GopConfig.fixed(24), REFERENCE_PROBS)
        pi = stationary_distribution(chain, np.full(chain.n_states, 0.3))
        assert pi.shape == (chain.n_states, 2)
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(pi >= 0.0)

    def test_iframe_marginal(self):
        """Test GoP fixe de 24 trames : l'I-frame occupe 1/24 des slots"""
        chain = build_chain(GopConfig.from_gop_length(24), REFERENCE_PROBS)
        for p in (0.0, 0.4, 1.0):
            pi = stationary_distribution(chain, np.full(chain.n_states, p))
            assert pi[0].sum() == pytest.approx(1.0 / 24.0, abs=1e-12)

    @pytest.mark.parametrize("beta", [(1.0,), (0.0, 1.0), (0.3, 0.5, 1.0), (0.0, 0.0, 1.0)])
    def test_matches_power_iteration(self, beta):
        """Test accord avec l'itération de puissance sur de petites chaînes"""
        chain = build_chain(GopConfig.variable(list(beta)), REFERENCE_PROBS)
        q = np.random.default_rng(5).random(chain.n_states)
        pi = stationary_distribution(chain, q)
        reference = lazy_power_iteration(chain.policy_kernel(q))
        assert np.allclose(pi.sum(axis=1), reference, atol=1e-10)
        assert np.allclose(pi[:, 1], reference * q, atol=1e-10)

    def test_residual(self):
        """Test résidu d'équilibre sous la tolérance"""
        chain = build_chain(GopConfig.fixed(10), REFERENCE_PROBS)
        x, residual = solve_stationary(chain.policy_kernel(np.full(chain.n_states, 0.5)))
        assert residual <= 1e-10
        assert x.sum() == pytest.approx(1.0)

    def test_tolerance_enforced(self):
        """Test NumericalFailure si la tolérance est inatteignable"""
        chain = build_chain(GopConfig.fixed(10), REFERENCE_PROBS)
        with pytest.raises(NumericalFailure, match="balance_residual"):
            stationary_distribution(chain, np.full(chain.n_states, 0.5), tol=-1.0)

    def test_policy_shape_checked(self):
        """Test politique de mauvaise taille ou hors [0, 1]"""
        chain = build_chain(GopConfig.fixed(2), REFERENCE_PROBS)
        with pytest.raises(ModelDomainError):
            transmit_vector(chain, np.zeros(3))
        with pytest.raises(ModelDomainError):
            transmit_vector(chain, np.full(chain.n_states, 1.5))

    def test_state_tuple(self):
        """Test State nommé"""
        assert State(0, 0, 0).is_iframe
        assert not State(1, 2, 1).is_iframe
