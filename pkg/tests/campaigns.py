"""
Full-size property campaigns. Slow: a few minutes in total.

Run with:
    python -m pytest tests/campaigns.py -s
"""

import math
import time

import numpy as np
import pytest

from rainskit import amortization, channels, emax, linalg, rains, sdp
from rainskit.channels import BipartiteState
from rainskit.rainskit import SepConeMode, Status

start = time.time()

def finish(what: str, count: int):
    print(f"{what}: ran through {count} instances in", time.time() - start, "seconds")

def test_exact_values():
    for d in (2, 3):
        phi = BipartiteState(linalg.max_entangled_state(d), (d, d))
        assert rains.r_max_state(phi) == pytest.approx(math.log2(d), abs=1e-6)
        # σ = Φ_d/d is in PPT′ and attains the value
        assert rains.ppt_prime_member(linalg.max_entangled_state(d) / d, (d, d))
        assert amortization.fidelity_rmax_lower_bound(phi, d, 0.0)
    for seed in range(5):
        assert rains.r_max_state(channels.random_ppt_state((2, 2), seed)) == pytest.approx(0, abs=1e-6)
    assert rains.gamma_channel(channels.make_identity(2)).value == pytest.approx(2, abs=1e-6)
    assert rains.gamma_channel(channels.make_depolarizing(2, 1.0)).value == pytest.approx(1, abs=1e-6)
    for d in (2, 3):
        assert rains.r_max_channel(channels.make_erasure(d, 0.0)) == pytest.approx(math.log2(d), abs=1e-6)
        assert rains.r_max_channel(channels.make_erasure(d, 1.0)) == pytest.approx(0, abs=1e-6)
    finish("exact values", 15)

def test_amortization_campaign():
    campaign = amortization.amortization_campaign(50, seed=2024, dims=(2, 2, 2), jobs=4)
    for index, report in enumerate(campaign.reports):
        assert report.margin >= -1e-6 * report.scale, index
        assert report.construction_margin >= -1e-6 * report.scale, index
        assert report.sandwich_margin >= -1e-6 * report.scale, index
    assert campaign.passed == 50
    print("smallest margin", min(campaign.margins))
    finish("amortization", 50)

def test_one_way_locc_never_increases_r_max():
    rng = np.random.default_rng(31)
    worst = -math.inf
    outputs = []
    for i in range(30):
        rho = channels.random_state((4, 2), rng, rank=1 + i % 2)
        # two branches on a four-dimensional input keep entanglement
        p = channels.random_one_way_locc((4, 2), (2, 2), branches=2, seed=rng)
        outputs.append(rains.r_max_state(channels.apply_channel(p, rho, (0, 1))))
        increase = outputs[-1] - rains.r_max_state(rho)
        worst = max(worst, increase)
        assert increase <= 1e-6
    assert max(outputs) > 1e-3
    print("largest increase", worst, "largest output", max(outputs))
    finish("monotonicity", 30)

def test_entanglement_test_on_ppt_prime():
    rng = np.random.default_rng(77)
    for M in (2, 3):
        for _ in range(100):
            sigma = channels.random_ppt_prime_operator((M, M), seed=rng)
            assert amortization.entanglement_test_bound(sigma, M) <= 1 / M + 1e-9
    finish("entanglement test", 200)

def test_two_round_protocols():
    reports = []
    for seed in range(10):
        n = channels.random_channel(2, 2, 2, seed=seed)
        report = amortization.run_protocol_and_check(amortization.random_transcript(n, rounds=2, seed=seed))
        assert report.final_value <= 2 * report.r_max_channel + 1e-5
        assert report.ok, report.checks
        assert report.converse.bound_holds
        reports.append(report)
    assert max(max(r.sigma_values) for r in reports) > 1e-3
    print("largest interleaved R_max", max(r.rho_values[1] for r in reports),
          "largest final R_max", max(r.final_value for r in reports))
    finish("protocols", 10)

def test_emax_suite():
    phi = BipartiteState(linalg.max_entangled_state(2), (2, 2))
    assert emax.e_max_state(phi) == pytest.approx(1, abs=1e-6)
    assert emax.e_max_state(channels.random_ppt_state((2, 2), 5)) == pytest.approx(0, abs=1e-6)

    rng = np.random.default_rng(55)
    for i in range(30):
        dims = (1, 2, 2) if i % 2 else (2, 2, 1)
        n = channels.random_channel(2, 2, 2, seed=rng)
        report = emax.verify_emax_amortization(n, channels.random_state(dims, rng), SepConeMode.ExactSmallDims)
        assert report.exact
        assert report.ok, report.failures()

    for _ in range(50):
        rho = channels.random_state((2, 2), rng)
        assert rains.r_max_state(rho) <= emax.e_max_state(rho) + 1e-6

    minimax = emax.minimax_consistency_check(channels.make_identity(2), seed=8)
    assert minimax.max_inner <= minimax.bound + 1e-6
    assert minimax.bound - minimax.max_inner <= 0.05
    finish("E_max", 283)

def test_rains_below_q_theta():
    for seed in range(20):
        n = channels.random_channel(2, 2, 2, seed=100 + seed)
        assert rains.r_max_channel(n) <= rains.q_theta(n) + 1e-6
    finish("cross-bound ordering", 20)

def test_certificates():
    rng = np.random.default_rng(9)
    results = [rains.w_state(channels.random_state((2, 2), rng)) for _ in range(10)]
    results += [rains.gamma_channel(channels.random_channel(2, 2, 2, seed=rng)) for _ in range(5)]
    results += [rains.transpose_diamond_norm(channels.random_channel(2, 2, 2, seed=rng)) for _ in range(5)]
    for result in results:
        c = result.certificate
        scale = max(1.0, abs(result.value))
        assert c.contains(result.value, 1e-9 * scale)
        assert c.width <= 1e-7 * scale, result.name

    for k in range(20):
        n = 2 + k % 4
        m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        program = sdp.HermitianProgram(f"regression{k}")
        x = program.hermitian_psd_var(n, "X")
        program.hermitian_lmi([(x, sdp.identity_map())], (m + m.conj().T) / 2, "dominance")
        program.minimize(x, weight=np.eye(n) + np.diag(rng.uniform(0, 1, n)))
        solution = sdp.solve(program.build())
        assert solution.status is Status.Optimal, k
        assert solution.relative_gap <= 1e-8
    finish("certification", 40)
