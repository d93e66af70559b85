"""
Amortization: the feasible pair built from the optimizers of W(ρ) and Γ(N), the
inequality W(ω) ≤ Γ(N)·W(ρ), protocol transcripts and the strong converse bound.

Tripartite inputs are ordered (A′, A, B′): the channel acts on A and the output state
ω = N(ρ) is ordered (A′, B, B′).
"""

import concurrent.futures
import dataclasses
import logging
import math
import typing

import numpy as np
import numpy.typing as npt

from .rainskit import (
    ComplexMatrix, DimSpec, DimensionError, InvalidStateError, PropertyViolation,
    SDP_TOL, ASSERT_TOL, PSD_TOL, as_hermitian, max_abs,
)
from . import linalg, channels, rains
from .channels import Channel, BipartiteState
from .rains import MeasureResult

logger = logging.getLogger(__name__)

STATE_MATCH_TOL = 1e-10

#region: feasible pair

def repair_dominance(positive: npt.ArrayLike, negative: npt.ArrayLike, target: npt.ArrayLike,
                     dims: DimSpec | typing.Sequence[int], cut: int | typing.Sequence[int]) -> ComplexMatrix:
    """
    Shift `positive` by the smallest multiple of I making T_B(positive − negative) ⪰ target
    hold exactly. T_B(I) = I, so the shift is the constraint's most negative eigenvalue.
    """
    gap = linalg.partial_transpose(np.asarray(positive) - np.asarray(negative), dims, cut) - target
    shift = max(0.0, -linalg.min_eigenvalue(gap))
    return as_hermitian(positive) + shift * np.eye(gap.shape[0])

def contract_io(state_op: npt.ArrayLike, channel_op: npt.ArrayLike, dims: DimSpec | typing.Sequence[int],
                dim_out: int) -> ComplexMatrix:
    """⟨Υ|_SA X_{A′AB′} ⊗ Z_{SB} |Υ⟩_SA, reordered to (A′, B, B′)."""
    dims = DimSpec.of(dims)
    if len(dims) != 3:
        raise DimensionError(f"expected dims (A′, A, B′), got {dims}")
    a_prime, a, b_prime = dims
    joint = np.kron(np.asarray(state_op, dtype=np.complex128), np.asarray(channel_op, dtype=np.complex128))
    out = linalg.sandwich_max_entangled(joint, (a_prime, a, b_prime, a, dim_out), 1, 3)
    return linalg.permute_systems(out, (a_prime, b_prime, dim_out), (0, 2, 1))

def construct_feasible_pair(C: npt.ArrayLike, D: npt.ArrayLike, V: npt.ArrayLike, Y: npt.ArrayLike,
                            dims: DimSpec | typing.Sequence[int]) -> tuple[ComplexMatrix, ComplexMatrix]:
    """
    E = ⟨Υ| C⊗V + D⊗Y |Υ⟩ and F = ⟨Υ| C⊗Y + D⊗V |Υ⟩, contracting the channel's reference
    S against the state's A.
    """
    dims = DimSpec.of(dims)
    a = dims[1] if len(dims) == 3 else 0
    side = np.asarray(V).shape[0]
    if len(dims) != 3 or side % a:
        raise DimensionError(f"cannot contract a channel operator of side {side} against dims {dims}")
    dim_out = side // a
    E = contract_io(C, V, dims, dim_out) + contract_io(D, Y, dims, dim_out)
    F = contract_io(C, Y, dims, dim_out) + contract_io(D, V, dims, dim_out)
    return as_hermitian(E), as_hermitian(F)

def pair_residuals(E: npt.ArrayLike, F: npt.ArrayLike, omega: BipartiteState) -> dict[str, float]:
    """Smallest eigenvalues of E, F and T_{BB′}(E − F) − ω."""
    cut = tuple(range(1, len(omega.dims)))
    dominance = linalg.partial_transpose(np.asarray(E) - F, omega.dims, cut) - omega.matrix
    return {
        "E": linalg.min_eigenvalue(E),
        "F": linalg.min_eigenvalue(F),
        "dominance": linalg.min_eigenvalue(dominance),
    }

#endregion

#region: amortization inequality

@dataclasses.dataclass
class AmortizationReport:
    w_input: MeasureResult
    gamma: MeasureResult
    w_output: MeasureResult
    constructed_E: ComplexMatrix = dataclasses.field(repr=False)
    constructed_F: ComplexMatrix = dataclasses.field(repr=False)
    feasibility_residuals: dict[str, float]
    construction_value: float

    @property
    def scale(self) -> float:
        return max(1.0, self.w_input.value, self.gamma.value, self.w_output.value)

    @property
    def margin(self) -> float:
        """Γ·W_in − W_out."""
        return self.gamma.value * self.w_input.value - self.w_output.value

    @property
    def construction_margin(self) -> float:
        """Γ·W_in − Tr(E + F)."""
        return self.gamma.value * self.w_input.value - self.construction_value

    @property
    def sandwich_margin(self) -> float:
        """Tr(E + F) − W_out; the solved optimum never beats a feasible point."""
        return self.construction_value - self.w_output.value

    @property
    def log_margin(self) -> float:
        return self.gamma.log2_value + self.w_input.log2_value - self.w_output.log2_value

    def failures(self, tol: float = ASSERT_TOL, psd_tol: float = PSD_TOL) -> list[str]:
        scale = self.scale
        failed = []
        if self.margin < -tol * scale:
            failed.append(f"margin {self.margin:.3e}")
        if self.construction_margin < -tol * scale:
            failed.append(f"construction margin {self.construction_margin:.3e}")
        if self.sandwich_margin < -tol * scale:
            failed.append(f"sandwich margin {self.sandwich_margin:.3e}")
        if self.log_margin < -tol:
            failed.append(f"log margin {self.log_margin:.3e}")
        for key, value in self.feasibility_residuals.items():
            if value < -psd_tol * scale:
                failed.append(f"{key} min eigenvalue {value:.3e}")
        return failed

    @property
    def ok(self) -> bool:
        return not self.failures()

    def check(self, tol: float = ASSERT_TOL) -> "AmortizationReport":
        failed = self.failures(tol)
        if failed:
            raise PropertyViolation("amortization inequality violated: " + ", ".join(failed))
        return self

def verify_amortization(n: Channel, rho: BipartiteState, tol: float = SDP_TOL) -> AmortizationReport:
    """
    Solve W(A′A;B′)_ρ, Γ(N) and W(A′;BB′)_ω for ω = N(ρ), and build the feasible pair
    for the output program from the input optimizers.
    """
    if len(rho.dims) != 3:
        raise DimensionError(f"expected a state on (A′, A, B′), got dims {rho.dims}")
    if rho.dims[1] != n.dim_in:
        raise DimensionError(f"{n!r} does not act on A of dimension {rho.dims[1]}")
    omega = channels.apply_channel(n, rho, 1).refactor((rho.dims[0], n.dim_out, rho.dims[2]))

    w_in = rains.w_state(rho, 2, tol)
    gamma = rains.gamma_channel(n, tol)
    w_out = rains.w_state(omega, (1, 2), tol)

    C = repair_dominance(w_in["C"], w_in["D"], rho.matrix, rho.dims, 2)
    V = repair_dominance(gamma["V"], gamma["Y"], n.choi, n.choi_dims, 1)
    E, F = construct_feasible_pair(C, w_in["D"], V, gamma["Y"], rho.dims)
    residuals = pair_residuals(E, F, omega)
    report = AmortizationReport(w_in, gamma, w_out, E, F, residuals, float(np.trace(E + F).real))
    logger.debug("amortization: W_in %.9f  Gamma %.9f  W_out %.9f  Tr(E+F) %.9f",
                 w_in.value, gamma.value, w_out.value, report.construction_value)
    return report

@dataclasses.dataclass
class CampaignReport:
    seed: int
    dims: tuple[int, int, int]
    reports: list[AmortizationReport]

    @property
    def margins(self) -> list[float]:
        return [r.margin for r in self.reports]

    @property
    def passed(self) -> int:
        return sum(r.ok for r in self.reports)

    @property
    def ok(self) -> bool:
        return self.passed == len(self.reports)

def random_instance(index: int, seed: int, dims: typing.Sequence[int], dim_out: int | None = None,
                    channel: Channel | None = None) -> tuple[Channel, BipartiteState]:
    """Instance `index` of a campaign; depends only on (seed, index)."""
    rng = np.random.default_rng([seed, index])
    dims = DimSpec.of(dims)
    if channel is None:
        channel = channels.random_channel(dims[1], dim_out or dims[1], 2, rng)
    return channel, channels.random_state(dims, rng)

def amortization_campaign(trials: int, seed: int = 0, dims: typing.Sequence[int] = (2, 2, 2),
                          tol: float = SDP_TOL, jobs: int = 1, dim_out: int | None = None,
                          channel: Channel | None = None) -> CampaignReport:
    """`verify_amortization` on `trials` random instances, reports ordered by index."""
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")

    def run(index: int) -> AmortizationReport:
        n, rho = random_instance(index, seed, dims, dim_out, channel)
        report = verify_amortization(n, rho, tol)
        if not report.ok:
            logger.warning("instance %d fails: %s", index, ", ".join(report.failures()))
        return report

    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as executor:
        reports = list(executor.map(run, range(trials)))
    return CampaignReport(seed, tuple(dims), reports)

@dataclasses.dataclass
class SandwichReport:
    """Sampled lower bound and the channel upper bound on the amortized R_max."""
    upper: float
    gains: list[float]
    tol: float = ASSERT_TOL

    @property
    def lower(self) -> float:
        return max(self.gains)

    @property
    def ok(self) -> bool:
        return self.lower <= self.upper + self.tol

def amortization_sandwich(n: Channel, samples: int = 5, seed: int = 0, tol: float = SDP_TOL,
                          b_prime: int = 2) -> SandwichReport:
    """
    R_max(ω) − R_max(ρ) over the trivial-B′ optimal-input instance and `samples` random
    ones, against R_max(N).
    """
    gamma = rains.gamma_channel(n, tol)
    phi = rains.optimal_channel_input(n, gamma, tol)
    instances = [phi.refactor((n.dim_in, n.dim_in, 1))]
    rng = np.random.default_rng(seed)
    instances += [channels.random_state((2, n.dim_in, b_prime), rng) for _ in range(samples)]
    gains = []
    for rho in instances:
        omega = channels.apply_channel(n, rho, 1).refactor((rho.dims[0], n.dim_out, rho.dims[2]))
        gains.append(rains.r_max_state(omega, (1, 2), tol) - rains.r_max_state(rho, 2, tol))
    return SandwichReport(gamma.log2_value, gains)

#endregion

#region: entanglement test and converse

def entanglement_test_bound(sigma: npt.ArrayLike, M: int, tol: float = 1e-9) -> float:
    """Tr(Φ_M σ) for σ ∈ PPT′ on M⊗M, which never exceeds 1/M."""
    if not rains.ppt_prime_member(sigma, (M, M)):
        raise InvalidStateError("operator is not in PPT′")
    overlap = float(np.real(np.vdot(linalg.max_entangled_state(M), sigma)))
    if overlap > 1 / M + tol:
        raise PropertyViolation(f"Tr(Φσ) = {overlap!r} exceeds 1/{M}")
    return overlap

def fidelity_rmax_lower_bound(omega: BipartiteState, M: int, epsilon: float, tol: float = SDP_TOL,
                              assert_tol: float = ASSERT_TOL) -> bool:
    """
    Whether R_max(ω) ≥ log₂((1 − ε)M) for ω with F(ω, Φ_M) ≥ 1 − ε. When ω is
    further from Φ_M the check uses its measured fidelity F instead: R_max(ω) ≥ log₂(F·M).
    """
    if epsilon >= 1:
        return True
    fidelity = linalg.fidelity(omega.matrix, linalg.max_entangled_state(M))
    threshold = 1 - epsilon
    if fidelity < threshold - STATE_MATCH_TOL:
        logger.warning("fidelity %.9f with Φ_%d is below 1 − ε = %.9f, checking against the fidelity",
                       fidelity, M, threshold)
        threshold = fidelity
    if threshold <= 0:
        return True
    return rains.r_max_state(omega, None, tol) >= math.log2(threshold * M) - assert_tol

@dataclasses.dataclass
class ConverseReport:
    bound_holds: bool
    qubit_rate: float
    fidelity_ceiling: float

def strong_converse_bound(n: int, M: int, epsilon: float, r_max: float, rate: float | None = None,
                          tol: float = 1e-12) -> ConverseReport:
    """
    Check log₂ M ≤ n·R_max + log₂(1/(1 − ε)) and return the fidelity ceiling
    min(1, 2^{−n(Q − R_max)}) at rate Q (default log₂ M / n).
    """
    if n < 1 or M < 1:
        raise ValueError(f"need n ≥ 1 and M ≥ 1, got n={n}, M={M}")
    if not 0 <= epsilon < 1:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon!r}")
    qubit_rate = math.log2(M) / n
    rate = qubit_rate if rate is None else rate
    holds = math.log2(M) <= n * r_max + math.log2(1 / (1 - epsilon)) + tol
    ceiling = min(1.0, 2.0 ** (-n * (rate - r_max)))
    return ConverseReport(holds, qubit_rate, ceiling)

def fidelity_ceiling_curve(r_max: float, rate: float, ns: typing.Iterable[int]) -> list[tuple[int, float]]:
    """(n, 2^{−n(Q − R_max)} capped at 1) for each n."""
    return [(n, min(1.0, 2.0 ** (-n * (rate - r_max)))) for n in ns]

#endregion

#region: protocols

@dataclasses.dataclass
class ProtocolTranscript:
    """
    n rounds of: channel on A, then a PPT-preserving operation from (A′ : BB′) to
    (A′A : B′), except after the last round where it maps to (M_A : M_B).
    """
    channel: Channel
    rhos: list[BipartiteState]
    sigmas: list[BipartiteState]
    interleaved: list[Channel]
    final: Channel
    final_state: BipartiteState
    M: int

    @property
    def rounds(self) -> int:
        return len(self.rhos)

    @property
    def infidelity(self) -> float:
        overlap = np.real(np.vdot(linalg.max_entangled_state(self.M), self.final_state.matrix))
        return float(min(1.0, max(0.0, 1 - overlap)))

    def check(self, tol: float = STATE_MATCH_TOL) -> "ProtocolTranscript":
        """Recompute every state from its predecessor."""
        if len(self.sigmas) != self.rounds or len(self.interleaved) != self.rounds - 1:
            raise PropertyViolation("transcript lists have inconsistent lengths")
        for i, (rho, sigma) in enumerate(zip(self.rhos, self.sigmas)):
            expected = _channel_step(self.channel, rho)
            if max_abs(expected.matrix - sigma.matrix) > tol:
                raise PropertyViolation(f"round {i + 1}: σ is not N(ρ)")
            if i + 1 < self.rounds:
                following = _interleave(self.interleaved[i], sigma, self.rhos[i + 1].dims)
                if max_abs(following.matrix - self.rhos[i + 1].matrix) > tol:
                    raise PropertyViolation(f"round {i + 2}: ρ is not P(σ)")
        final = _interleave(self.final, self.sigmas[-1], self.final_state.dims)
        if max_abs(final.matrix - self.final_state.matrix) > tol:
            raise PropertyViolation("final state is not P(σ)")
        return self

def _channel_step(n: Channel, rho: BipartiteState) -> BipartiteState:
    return channels.apply_channel(n, rho, 1).refactor((rho.dims[0], n.dim_out, rho.dims[2]))

def _interleave(p: Channel, sigma: BipartiteState, dims: typing.Sequence[int]) -> BipartiteState:
    """Apply a bipartite operation on (A′ : BB′) to the whole of σ."""
    grouped = sigma.refactor(p.dims_in)
    return channels.apply_channel(p, grouped, tuple(range(len(p.dims_in)))).refactor(dims)

def build_transcript(n: Channel, initial: BipartiteState, interleaved: typing.Sequence[Channel],
                     final: Channel, M: int = 2) -> ProtocolTranscript:
    rhos = [initial]
    sigmas = []
    for p in interleaved:
        sigmas.append(_channel_step(n, rhos[-1]))
        rhos.append(_interleave(p, sigmas[-1], initial.dims))
    sigmas.append(_channel_step(n, rhos[-1]))
    omega = _interleave(final, sigmas[-1], (M, M))
    return ProtocolTranscript(n, rhos, sigmas, list(interleaved), final, omega, M)

def random_transcript(n: Channel, rounds: int = 2, seed: channels.Seed = 0, a_prime: int = 2,
                      b_prime: int = 2, M: int = 2) -> ProtocolTranscript:
    """
    A start that is a product across A′A : B′, with A′A a random pure state, and
    one-way LOCC operations drawn at random. Alice's instruments split an isometry
    into fewer branches than her input dimension, so they keep entanglement.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be at least 1, got {rounds}")
    rng = channels._rng(seed)
    a, b = n.dim_in, n.dim_out
    alice = channels.random_pure_state((a_prime, a), rng).matrix
    initial = BipartiteState(np.kron(alice, channels.random_density(b_prime, rng)), (a_prime, a, b_prime))
    branches = max(1, a_prime - 1)
    interleaved = [channels.random_one_way_locc((a_prime, b * b_prime), (a_prime * a, b_prime), branches, rng)
                   for _ in range(rounds - 1)]
    final = channels.random_one_way_locc((a_prime, b * b_prime), (M, M), branches, rng)
    return build_transcript(n, initial, interleaved, final, M)

def teleportation_transcript() -> ProtocolTranscript:
    """One use of the qubit identity carrying half of Φ₂ from A to B, then B′ discarded."""
    n = channels.make_identity(2)
    zero = np.diag([1.0, 0.0])
    initial = BipartiteState(np.kron(linalg.max_entangled_state(2), zero), (2, 2, 2))
    final = channels.tensor(channels.make_identity(2), channels.make_partial_trace((2, 2), 1))
    return build_transcript(n, initial, [], final, 2)

def replacement_transcript(n: Channel, rounds: int = 2, seed: channels.Seed = 0, a_prime: int = 2,
                           b_prime: int = 2) -> ProtocolTranscript:
    """Every operation discards its input and prepares a fresh separable state."""
    rng = channels._rng(seed)
    a, b = n.dim_in, n.dim_out
    dims = (a_prime, a, b_prime)
    initial = channels.random_ppt_state(dims, rng)

    def replacer(state: BipartiteState) -> Channel:
        p = channels.make_replacer(a_prime * b * b_prime, state)
        return Channel(p.dim_in, p.dim_out, kraus=p.kraus, dims_in=(a_prime, b * b_prime),
                       dims_out=p.dims_out, name="replacer")

    interleaved = [replacer(channels.random_ppt_state(dims, rng)) for _ in range(rounds - 1)]
    final = replacer(channels.random_ppt_state((2, 2), rng))
    return build_transcript(n, initial, interleaved, final, 2)

@dataclasses.dataclass
class ProtocolReport:
    rounds: int
    r_max_channel: float
    rho_values: list[float]
    sigma_values: list[float]
    final_value: float
    infidelity: float
    converse: ConverseReport
    checks: dict[str, bool]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

def run_protocol_and_check(transcript: ProtocolTranscript, tol: float = SDP_TOL,
                           assert_tol: float = ASSERT_TOL) -> ProtocolReport:
    """
    Solve every round's R_max and check: (a) the start has R_max zero, (b) interleaved
    operations never increase it, (c) each channel use gains at most R_max(N), (d) the end
    state stays below n·R_max(N); plus the converse arithmetic on the measured fidelity.
    """
    transcript.check()
    r_channel = rains.r_max_channel(transcript.channel, tol)
    rho_values = [rains.r_max_state(rho, 2, tol) for rho in transcript.rhos]
    sigma_values = [rains.r_max_state(sigma, (1, 2), tol) for sigma in transcript.sigmas]
    final_value = rains.r_max_state(transcript.final_state, 1, tol)
    n = transcript.rounds
    epsilon = transcript.infidelity
    checks = {
        "initial_ppt": rho_values[0] <= assert_tol,
        "interleaved_monotone": all(r <= s + assert_tol for r, s in zip(rho_values[1:], sigma_values[:-1])),
        "round_gain": all(s - r <= r_channel + assert_tol for r, s in zip(rho_values, sigma_values)),
        "final": final_value <= n * r_channel + 10 * assert_tol,
    }
    if epsilon < 1:
        converse = strong_converse_bound(n, transcript.M, epsilon, r_channel, tol=assert_tol)
        checks["converse"] = converse.bound_holds
    else:
        converse = ConverseReport(True, math.log2(transcript.M) / n, 0.0)
    for key, passed in checks.items():
        if not passed:
            logger.warning("protocol check %s failed", key)
    return ProtocolReport(n, r_channel, rho_values, sigma_values, final_value, epsilon, converse, checks)

#endregion
