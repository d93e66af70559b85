import inspect
import logging
import unittest

import numpy as np
import pytest

from rainskit import emax, rains, channels, linalg
from rainskit.channels import BipartiteState
from rainskit.rainskit import SepConeMode, DimensionGateError

def phi2() -> BipartiteState:
    return BipartiteState(linalg.max_entangled_state(2), (2, 2))

class Test_Modes(unittest.TestCase):

    def test_auto_mode(self):
        self.assertIs(emax.resolve_mode(2, 3), SepConeMode.ExactSmallDims)
        self.assertIs(emax.resolve_mode(3, 3), SepConeMode.PptRelaxation)

    def test_exact_mode_is_gated(self):
        with self.assertRaises(DimensionGateError):
            emax.resolve_mode(2, 4, SepConeMode.ExactSmallDims)

    def test_relaxation_is_flagged(self):
        rho = BipartiteState(linalg.max_entangled_state(3), (3, 3))
        with self.assertLogs("rainskit.emax", level="INFO"):
            result = emax.w_sep(rho)
        self.assertFalse(result.exact)
        self.assertGreaterEqual(result.log2_value, np.log2(3) - 1e-6)

class Test_StateValues(unittest.TestCase):

    def test_phi2(self):
        result = emax.w_sep(phi2())
        self.assertTrue(result.exact)
        self.assertAlmostEqual(result.value, 2.0, delta=1e-6)
        self.assertAlmostEqual(emax.e_max_state(phi2()), 1.0, delta=1e-6)

    def test_separable_state(self):
        rho = channels.random_ppt_state((2, 2), seed=2)
        self.assertAlmostEqual(emax.e_max_state(rho), 0.0, delta=1e-6)

    def test_rains_never_exceeds_emax(self):
        rng = np.random.default_rng(3)
        for _ in range(4):
            rho = channels.random_state((2, 2), rng)
            self.assertLessEqual(rains.r_max_state(rho), emax.e_max_state(rho) + 1e-6)

    def test_optimizer_is_in_the_cone(self):
        rho = channels.random_state((2, 2), 4)
        x = emax.w_sep(rho)["X"]
        self.assertGreater(linalg.min_eigenvalue(x - rho.matrix), -1e-6)
        self.assertGreater(linalg.min_eigenvalue(linalg.partial_transpose(x, (2, 2), 1)), -1e-6)

class Test_ChannelValues(unittest.TestCase):

    def test_identity_matches_gamma(self):
        self.assertAlmostEqual(emax.sigma_channel(channels.make_identity(2)).value, 2.0, delta=1e-6)

    def test_completely_depolarizing(self):
        self.assertAlmostEqual(emax.sigma_channel(channels.make_depolarizing(2, 1.0)).value, 1.0, delta=1e-6)

    def test_constant_erasure(self):
        self.assertAlmostEqual(emax.e_max_channel(channels.make_erasure(2, 1.0)), 0.0, delta=1e-6)

def test_product_construction_matches_contraction():
    rng = np.random.default_rng(6)
    P = channels.random_density(4, rng)
    Q = channels.random_density(2, rng)
    L = channels.random_density(2, rng)
    M = channels.random_density(3, rng)
    general = emax.construct_feasible_E_sep(np.kron(P, Q), np.kron(L, M), (2, 2, 2))
    np.testing.assert_allclose(general, emax.product_feasible_E(P, Q, L, M, 2), atol=1e-12)

def test_emax_amortization_tight_case():
    rho = BipartiteState(linalg.max_entangled_state(2), (2, 2, 1))
    report = emax.verify_emax_amortization(channels.make_identity(2), rho)
    assert report.exact
    assert report.w_output.value == pytest.approx(2.0, abs=1e-6)
    assert report.margin == pytest.approx(0.0, abs=1e-5)
    assert report.ok, report.failures()

@pytest.mark.parametrize("dims", [(2, 2, 1), (1, 2, 2)])
def test_emax_amortization_random(dims):
    rng = np.random.default_rng(sum(dims))
    n = channels.random_channel(2, 2, 2, rng)
    rho = channels.random_state(dims, rng)
    report = emax.verify_emax_amortization(n, rho)
    assert report.ok, report.failures()
    assert report.feasibility_residuals["ppt"] >= -1e-8 * report.scale

def test_emax_amortization_beyond_the_gate(caplog):
    rng = np.random.default_rng(6)
    n = channels.random_channel(2, 2, 2, rng)
    rho = channels.random_state((2, 2, 2), rng)
    with pytest.raises(DimensionGateError):
        emax.verify_emax_amortization(n, rho, SepConeMode.ExactSmallDims)
    with caplog.at_level(logging.WARNING, logger="rainskit.emax"):
        report = emax.verify_emax_amortization(n, rho)
    assert not report.exact
    assert "PPT relaxation" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="rainskit.emax"):
        emax.verify_emax_amortization(n, rho, SepConeMode.PptRelaxation)
    assert "PPT relaxation" not in caplog.text

def test_minimax_consistency():
    report = emax.minimax_consistency_check(channels.make_identity(2), samples=4, seed=1)
    assert report.ok
    assert report.inner_values[0] == pytest.approx(1.0, abs=1e-6)
    assert report.bound == pytest.approx(1.0, abs=1e-6)

def test_minimax_default_sample_count():
    assert inspect.signature(emax.minimax_consistency_check).parameters["samples"].default == 200

def test_sandwiched_choi_of_pure_input_is_product():
    rho_s = np.diag([1.0, 0.0])
    state = emax.sandwiched_choi(channels.make_identity(2), rho_s)
    assert emax.e_max_state(state) == pytest.approx(0.0, abs=1e-6)

def test_floor_spectrum():
    floored = emax.floor_spectrum(np.diag([1.0, 0.0]))
    assert np.trace(floored).real == pytest.approx(1.0)
    assert linalg.min_eigenvalue(floored) > 0

def test_subadditivity_probe():
    report = emax.sigma_subadditivity_probe(channels.make_depolarizing(2, 0.5), channels.make_identity(2))
    assert report.exact_parts == (True, True)
    assert report.difference >= -1e-5
