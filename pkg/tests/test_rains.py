import dataclasses
import math
import unittest

import numpy as np
import pytest

from rainskit import rains, channels, linalg, sdp, jsonio
from rainskit.channels import BipartiteState
from rainskit.rainskit import Status, NotPositiveError, SolverError

def phi(d: int) -> BipartiteState:
    return BipartiteState(linalg.max_entangled_state(d), (d, d))

class Test_Dmax(unittest.TestCase):

    def test_equal_states(self):
        rho = channels.random_density(3, 0)
        self.assertAlmostEqual(rains.dmax(rho, rho), 0.0, places=9)

    def test_against_maximally_mixed(self):
        self.assertAlmostEqual(rains.dmax(linalg.max_entangled_state(2), np.eye(4) / 4), 2.0, places=9)

    def test_support_mismatch_is_infinite(self):
        self.assertEqual(rains.dmax(np.diag([0.5, 0.5]), np.diag([1.0, 0.0])), math.inf)

    def test_rejects_non_positive(self):
        self.assertRaises(NotPositiveError, rains.dmax, np.diag([1.0, -1.0]), np.eye(2))

def test_ppt_prime_membership():
    for d in (2, 3):
        assert rains.ppt_prime_member(linalg.max_entangled_state(d) / d, (d, d))
        assert not rains.ppt_prime_member(linalg.max_entangled_state(d), (d, d))
    assert not rains.ppt_prime_member(-np.eye(4) / 4, (2, 2))

class Test_StateMeasures(unittest.TestCase):

    def test_maximally_entangled(self):
        for d in (2, 3):
            result = rains.w_state(phi(d))
            self.assertAlmostEqual(result.value, d, delta=1e-6)
            self.assertAlmostEqual(result.log2_value, math.log2(d), delta=1e-6)
            self.assertTrue(result.certificate.ok)
            self.assertTrue(result.certificate.contains(result.value))

    def test_ppt_states_have_zero_rains(self):
        rng = np.random.default_rng(0)
        for dims in ((2, 2), (2, 3)):
            for _ in range(3):
                self.assertAlmostEqual(rains.r_max_state(channels.random_ppt_state(dims, rng)), 0.0, delta=1e-6)

    def test_product_state(self):
        rho = BipartiteState(np.diag([1.0, 0, 0, 0]), (2, 2))
        self.assertAlmostEqual(rains.r_max_state(rho), 0.0, delta=1e-6)

    def test_optimizers_are_feasible(self):
        rho = channels.random_state((2, 2), 3)
        result = rains.w_state(rho)
        flipped = linalg.partial_transpose(result["C"] - result["D"], (2, 2), 1)
        self.assertGreater(linalg.min_eigenvalue(flipped - rho.matrix), -1e-6)
        self.assertAlmostEqual(np.trace(result["C"] + result["D"]).real, result.value, delta=1e-6)
        self.assertGreaterEqual(result.value, 1 - 1e-6)

    def test_bounded_by_log_negativity(self):
        rng = np.random.default_rng(1)
        for _ in range(3):
            rho = channels.random_state((2, 2), rng)
            self.assertLessEqual(rains.r_max_state(rho), rains.log_negativity(rho) + 1e-6)

    def test_cut_selection(self):
        rho = BipartiteState(np.kron(linalg.max_entangled_state(2), np.diag([1.0, 0.0])), (2, 2, 2))
        self.assertAlmostEqual(rains.r_max_state(rho, 2), 0.0, delta=1e-6)
        self.assertAlmostEqual(rains.r_max_state(rho, (1, 2)), 1.0, delta=1e-6)

    def test_one_way_locc_never_increases_rains(self):
        rng = np.random.default_rng(21)
        outputs = []
        for _ in range(3):
            rho = channels.random_state((4, 2), rng, rank=1)
            p = channels.random_one_way_locc((4, 2), (2, 2), branches=2, seed=rng)
            out = rains.r_max_state(channels.apply_channel(p, rho, (0, 1)))
            self.assertLessEqual(out, rains.r_max_state(rho) + 1e-6)
            outputs.append(out)
        self.assertGreater(max(outputs), 1e-3)

class Test_ChannelMeasures(unittest.TestCase):

    def test_identity(self):
        result = rains.gamma_channel(channels.make_identity(2))
        self.assertAlmostEqual(result.value, 2.0, delta=1e-6)
        rho_s = result["rho_S"]
        self.assertAlmostEqual(np.trace(rho_s).real, 1.0, delta=1e-6)
        self.assertGreater(linalg.min_eigenvalue(rho_s), -1e-6)

    def test_completely_depolarizing(self):
        self.assertAlmostEqual(rains.gamma_channel(channels.make_depolarizing(2, 1.0)).value, 1.0, delta=1e-6)

    def test_erasure_endpoints(self):
        self.assertAlmostEqual(rains.r_max_channel(channels.make_erasure(2, 0.0)), 1.0, delta=1e-6)
        self.assertAlmostEqual(rains.r_max_channel(channels.make_erasure(2, 1.0)), 0.0, delta=1e-6)
        middle = rains.r_max_channel(channels.make_erasure(2, 0.5))
        self.assertTrue(0 < middle < 1)

    def test_transpose_diamond_norm(self):
        self.assertAlmostEqual(rains.transpose_diamond_norm(channels.make_identity(2)).value, 2.0, delta=1e-6)
        self.assertAlmostEqual(rains.q_theta(channels.make_identity(2)), 1.0, delta=1e-6)
        self.assertAlmostEqual(rains.q_theta(channels.make_depolarizing(2, 1.0)), 0.0, delta=1e-6)

    def test_rains_below_q_theta(self):
        rng = np.random.default_rng(5)
        for _ in range(3):
            n = channels.random_channel(2, 2, 2, rng)
            self.assertLessEqual(rains.r_max_channel(n), rains.q_theta(n) + 1e-6)

def test_optimal_input_attains_channel_value():
    n = channels.random_channel(2, 2, 2, seed=21)
    gamma = rains.gamma_channel(n)
    phi_sa = rains.optimal_channel_input(n, gamma)
    omega = channels.apply_channel(n, phi_sa, 1)
    assert rains.r_max_state(omega) == pytest.approx(gamma.log2_value, abs=1e-4)

def test_sampled_inputs_stay_below_channel_value():
    report = rains.sampled_input_check(channels.make_amplitude_damping(0.3), samples=4, seed=2)
    assert report.ok
    assert len(report.sampled_values) == 4

def test_solver_trouble_dumps_problem(monkeypatch, tmp_path):
    real_solve = sdp.solve

    def troubled(problem, tol=1e-8, max_iters=200):
        return dataclasses.replace(real_solve(problem, tol, 2), status=Status.NumericalTrouble)

    monkeypatch.setattr(sdp, "solve", troubled)
    monkeypatch.setenv("RAINSKIT_DUMP_DIR", str(tmp_path))
    with pytest.raises(SolverError, match="numerical_trouble") as info:
        rains.w_state(phi(2))
    assert info.value.solution is not None

    dumped = jsonio.load_problem(tmp_path / "W.json.lz4")
    assert dumped.blocks == (8, 8, 8)
    assert dumped.m == 16
