import unittest

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rainskit import channels, linalg
from rainskit.channels import Channel, BipartiteState
from rainskit.rainskit import DimensionError, InvalidChannelError, InvalidStateError, NotHermitianError

seeds = st.integers(min_value=0, max_value=2**32 - 1)

def kraus_sum(kraus, x):
    return sum(k @ x @ k.conj().T for k in kraus)

class Test_Channel(unittest.TestCase):

    def test_identity_choi_is_unnormalized_phi(self):
        upsilon = linalg.max_entangled_vector(2)
        np.testing.assert_allclose(channels.make_identity(2).choi, upsilon @ upsilon.T, atol=1e-15)

    def test_rejects_non_trace_preserving(self):
        with self.assertRaises(InvalidChannelError):
            Channel(2, 2, kraus=(np.diag([1, 0.5]),))

    def test_rejects_bad_shapes(self):
        with self.assertRaises(DimensionError):
            Channel(2, 3, kraus=(np.eye(2),))
        with self.assertRaises(DimensionError):
            Channel(2, 2, choi=np.eye(2))

    def test_rejects_non_positive_choi(self):
        choi = np.diag([1.5, -0.5, 0.5, 0.5])
        with self.assertRaises(InvalidChannelError):
            Channel(2, 2, choi=choi)

    def test_choi_and_kraus_must_agree(self):
        with self.assertRaises(InvalidChannelError):
            Channel(2, 2, kraus=(np.eye(2),), choi=np.eye(4) / 2)

    def test_probability_range(self):
        self.assertRaises(InvalidChannelError, channels.make_depolarizing, 2, 1.5)
        self.assertRaises(InvalidChannelError, channels.make_erasure, 2, -0.1)

class Test_State(unittest.TestCase):

    def test_trace_must_be_one(self):
        with self.assertRaises(InvalidStateError):
            BipartiteState(np.eye(4) / 2, (2, 2))

    def test_must_be_positive(self):
        with self.assertRaises(InvalidStateError):
            BipartiteState(np.diag([1.5, -0.5, 0, 0]), (2, 2))

    def test_must_be_hermitian(self):
        m = np.eye(4) / 4
        m[0, 1] = 0.1
        with self.assertRaises(NotHermitianError):
            BipartiteState(m, (2, 2))

    def test_dims_must_match(self):
        with self.assertRaises(DimensionError):
            BipartiteState(np.eye(4) / 4, (2, 3))

    def test_tiny_defects_are_symmetrized(self):
        m = np.eye(4, dtype=complex) / 4
        m[0, 1] = 1e-13
        state = BipartiteState(m, (2, 2))
        self.assertEqual(state.matrix[0, 1], state.matrix[1, 0].conjugate())

@settings(max_examples=20, deadline=None)
@given(seeds)
def test_apply_channel_matches_kraus_sum(seed):
    rng = np.random.default_rng(seed)
    n = channels.random_channel(2, 3, 2, rng)
    rho = channels.random_state((2, 2), rng)

    on_second = channels.apply_channel(n, rho, 1)
    expected = kraus_sum([np.kron(np.eye(2), k) for k in n.kraus], rho.matrix)
    assert on_second.dims.factors == (2, 3)
    np.testing.assert_allclose(on_second.matrix, expected, atol=1e-10)

    on_first = channels.apply_channel(n, rho, 0)
    expected = kraus_sum([np.kron(k, np.eye(2)) for k in n.kraus], rho.matrix)
    assert on_first.dims.factors == (3, 2)
    np.testing.assert_allclose(on_first.matrix, expected, atol=1e-10)

def test_apply_channel_on_middle_of_three():
    rng = np.random.default_rng(4)
    n = channels.random_channel(2, 2, 3, rng)
    rho = channels.random_state((2, 2, 2), rng)
    expected = kraus_sum([linalg.kron(np.eye(2), k, np.eye(2)) for k in n.kraus], rho.matrix)
    np.testing.assert_allclose(channels.apply_channel(n, rho, 1).matrix, expected, atol=1e-10)

def test_apply_channel_on_both_factors():
    rng = np.random.default_rng(12)
    n = channels.random_one_way_locc((2, 2), (2, 2), branches=1, seed=rng)
    rho = channels.random_state((2, 2), rng)
    out = channels.apply_channel(n, rho, (0, 1))
    assert out.dims.factors == (2, 2)
    np.testing.assert_allclose(out.matrix, kraus_sum(n.kraus, rho.matrix), atol=1e-10)

def test_apply_channel_on_first_of_three_keeps_order():
    rng = np.random.default_rng(13)
    n = channels.random_channel(2, 3, 2, rng)
    rho = channels.random_state((2, 2, 2), rng)
    out = channels.apply_channel(n, rho, 0)
    assert out.dims.factors == (3, 2, 2)
    expected = kraus_sum([linalg.kron(k, np.eye(2), np.eye(2)) for k in n.kraus], rho.matrix)
    np.testing.assert_allclose(out.matrix, expected, atol=1e-10)

def test_apply_channel_dimension_mismatch():
    with pytest.raises(DimensionError, match="expects input dimension"):
        channels.apply_channel(channels.make_identity(3), channels.random_state((2, 2), 0), 1)

def test_family_endpoints():
    assert channels.same_channel(channels.make_depolarizing(2, 0), channels.make_identity(2))
    assert channels.same_channel(channels.make_amplitude_damping(0), channels.make_identity(2))
    assert channels.same_channel(channels.make_dephasing(0), channels.make_identity(2))
    np.testing.assert_allclose(channels.make_depolarizing(2, 1).choi, np.eye(4) / 2, atol=1e-12)

    erased = channels.make_erasure(2, 1)
    flag = np.zeros((3, 3))
    flag[2, 2] = 1
    rho = channels.random_density(2, 3)
    np.testing.assert_allclose(channels.apply_kraus(erased, rho), flag, atol=1e-12)

def test_erasure_embeds_inputs():
    rho = channels.random_density(2, 8)
    out = channels.apply_kraus(channels.make_erasure(2, 0.25), rho)
    np.testing.assert_allclose(out[:2, :2], 0.75 * rho, atol=1e-12)
    assert out[2, 2].real == pytest.approx(0.25)

@pytest.mark.parametrize("d, p, q", [(2, 0.3, 0.4), (3, 0.1, 0.5), (2, 0.0, 1.0)])
def test_erasures_compose(d, p, q):
    combined = 1 - (1 - q) * (1 - p)
    twice = channels.compose(channels.make_flagged_erasure(d, q), channels.make_erasure(d, p))
    assert channels.same_channel(twice, channels.make_erasure(d, combined))
    flagged = channels.compose(channels.make_flagged_erasure(d, q), channels.make_flagged_erasure(d, p))
    np.testing.assert_allclose(flagged.choi, channels.make_flagged_erasure(d, combined).choi, atol=1e-12)

def test_flagged_erasure_fixes_the_flag():
    flag = np.zeros((3, 3))
    flag[2, 2] = 1
    np.testing.assert_allclose(channels.apply_kraus(channels.make_flagged_erasure(2, 0.7), flag), flag, atol=1e-12)

def test_weyl_operators_are_orthogonal_unitaries():
    weyl = channels.weyl_operators(3)
    assert len(weyl) == 9
    for i, a in enumerate(weyl):
        np.testing.assert_allclose(a @ a.conj().T, np.eye(3), atol=1e-12)
        for b in weyl[i + 1:]:
            assert abs(np.trace(a.conj().T @ b)) < 1e-12

def test_random_unitary_channel_has_rank_one_choi():
    n = channels.random_channel(2, 2, env_dim=1, seed=12)
    assert np.linalg.matrix_rank(n.choi, tol=1e-8) == 1

def test_random_channels_are_reproducible():
    a = channels.random_channel(2, 2, 2, seed=5)
    b = channels.random_channel(2, 2, 2, seed=5)
    assert channels.same_channel(a, b)

def test_compose_and_tensor():
    dep = channels.make_depolarizing(2, 0.3)
    assert channels.same_channel(channels.compose(dep, channels.make_identity(2)), dep)
    # depolarizing parameters compose as 1 - (1 - p)(1 - q)
    twice = channels.compose(dep, dep)
    assert channels.same_channel(twice, channels.make_depolarizing(2, 1 - 0.7 * 0.7), 1e-10)

    joint = channels.tensor(dep, channels.make_erasure(2, 0.5))
    assert (joint.dim_in, joint.dim_out) == (4, 6)
    assert joint.dims_out == (2, 3)
    rho = channels.random_density(2, 1)
    sigma = channels.random_density(2, 2)
    out = channels.apply_kraus(joint, np.kron(rho, sigma))
    expected = np.kron(channels.apply_kraus(dep, rho), channels.apply_kraus(channels.make_erasure(2, 0.5), sigma))
    np.testing.assert_allclose(out, expected, atol=1e-12)

def test_choi_only_compose_and_tensor():
    dep = channels.make_depolarizing(2, 0.4)
    choi_only = Channel(2, 2, choi=dep.choi)
    assert channels.same_channel(channels.compose(choi_only, choi_only), channels.compose(dep, dep), 1e-10)
    assert channels.same_channel(channels.tensor(choi_only, dep), channels.tensor(dep, dep), 1e-10)

def test_partial_trace_channel():
    rng = np.random.default_rng(0)
    a = channels.random_density(2, rng)
    b = channels.random_density(3, rng)
    np.testing.assert_allclose(channels.apply_kraus(channels.make_partial_trace((2, 3), 1), np.kron(a, b)), a, atol=1e-12)
    np.testing.assert_allclose(channels.apply_kraus(channels.make_partial_trace((2, 3), 0), np.kron(a, b)), b, atol=1e-12)

def test_replacer_outputs_its_state():
    state = channels.random_state((2, 2), 6)
    p = channels.make_replacer(3, state)
    np.testing.assert_allclose(channels.apply_kraus(p, channels.random_density(3, 1)), state.matrix, atol=1e-10)

@settings(max_examples=15, deadline=None)
@given(seeds)
def test_random_ppt_objects(seed):
    rng = np.random.default_rng(seed)
    rho = channels.random_ppt_state((2, 2, 2), rng)
    for cut in (1, 2, (1, 2)):
        assert linalg.min_eigenvalue(linalg.partial_transpose(rho.matrix, rho.dims, cut)) >= -1e-12
    sigma = channels.random_ppt_prime_operator((2, 3), seed=rng)
    assert linalg.trace_norm(linalg.partial_transpose(sigma, (2, 3), 1)) == pytest.approx(1.0)

@pytest.mark.parametrize("branches", [1, 2, 4])
def test_one_way_locc_is_ppt_preserving(branches):
    n = channels.random_one_way_locc((2, 4), (4, 2), branches=branches, seed=branches)
    assert n.dims_in == (2, 4) and n.dims_out == (4, 2)
    assert channels.is_ppt_preserving(n)

def test_is_ppt_preserving_rejects_swap():
    swap = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            swap[j * 2 + i, i * 2 + j] = 1
    n = Channel(4, 4, kraus=(swap,), dims_in=(2, 2), dims_out=(2, 2))
    assert not channels.is_ppt_preserving(n)
