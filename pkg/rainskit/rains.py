"""
Max-Rains quantities: D_max, PPT′ membership, W and R_max for states, Γ and R_max for
channels, and the transpose-diamond-norm bound Q_Θ.
"""

import dataclasses
import logging
import math
import os
import typing

import numpy as np
import numpy.typing as npt

from .rainskit import (
    ComplexMatrix, DimSpec, NotPositiveError, SolverError, Status,
    SDP_TOL, ASSERT_TOL, PSD_TOL, SUPPORT_TOL, as_hermitian, max_abs,
)
from . import linalg, channels, sdp
from .channels import Channel, BipartiteState

logger = logging.getLogger(__name__)

Cut = int | typing.Sequence[int] | None

@dataclasses.dataclass
class MeasureResult:
    """
    Optimal value of one of the measure programs, with its optimal operators and the
    interval certified by `sdp.verify`.
    """
    name: str
    value: float
    optimizers: dict[str, ComplexMatrix]
    certificate: sdp.Certificate
    exact: bool = True
    program: sdp.HermitianProgram | None = dataclasses.field(default=None, repr=False)
    solution: sdp.SdpSolution | None = dataclasses.field(default=None, repr=False)

    @property
    def log2_value(self) -> float:
        return math.log2(self.value) if self.value > 0 else -math.inf

    @property
    def residuals(self) -> dict[str, float]:
        c = self.certificate
        return {"primal": c.primal_residual, "dual": c.dual_residual, "gap": c.relative_gap}

    def __getitem__(self, key: str) -> ComplexMatrix:
        return self.optimizers[key]

def resolve_cut(dims: DimSpec, cut: Cut) -> tuple[int, ...]:
    """B-side subsystem indices; defaults to the last factor."""
    if cut is None:
        return (len(dims) - 1,)
    return dims.indices(cut)

def solve_measure(program: sdp.HermitianProgram, variables: typing.Sequence[sdp.Variable],
                  tol: float = SDP_TOL) -> MeasureResult:
    """
    Solve a measure program and package it. Any status but Optimal raises `SolverError`;
    the problem is dumped first when RAINSKIT_DUMP_DIR is set.
    """
    problem = program.build()
    solution = sdp.solve(problem, tol)
    if solution.status is not Status.Optimal:
        dump_dir = os.environ.get("RAINSKIT_DUMP_DIR")
        if dump_dir:
            from . import jsonio
            path = os.path.join(dump_dir, f"{program.name}.json.lz4")
            jsonio.dump_problem(problem, path)
            logger.warning("dumped %s to %s", program.name, path)
        raise SolverError(f"{program.name}: solver finished with status {solution.status.value}", solution)
    certificate = sdp.verify(problem, solution, tol)
    if not certificate.ok:
        logger.warning("%s: verification residuals exceed tol %.1e: %s", program.name, tol, certificate)
    optimizers = {v.name: program.value(solution, v) for v in variables}
    return MeasureResult(program.name, solution.primal_obj, optimizers, certificate, program=program, solution=solution)

#region: D_max and PPT′

def _check_psd(name: str, x: np.ndarray) -> np.ndarray:
    x = as_hermitian(x)
    if linalg.min_eigenvalue(x) < -PSD_TOL * (1 + max_abs(x)):
        raise NotPositiveError(f"{name} is not positive semidefinite")
    return x

def dmax(rho: npt.ArrayLike, sigma: npt.ArrayLike) -> float:
    """log₂ of the least λ with ρ ≤ λσ; +∞ when supp ρ ⊄ supp σ."""
    rho = _check_psd("rho", rho)
    sigma = _check_psd("sigma", sigma)
    w, v = linalg.eigh(sigma)
    support = w > SUPPORT_TOL * max(w[-1], 1.0)
    outside = v[:, ~support]
    if outside.size and np.trace(outside.conj().T @ rho @ outside).real > SUPPORT_TOL:
        return math.inf
    inside = v[:, support] / np.sqrt(w[support])
    lam = linalg.eigvalsh(inside.conj().T @ rho @ inside)[-1]
    return math.log2(lam) if lam > 0 else -math.inf

def ppt_prime_member(sigma: npt.ArrayLike, dims: DimSpec | typing.Sequence[int], tol: float = PSD_TOL,
                     cut: Cut = None) -> bool:
    """σ ⪰ 0 and ‖T_B σ‖₁ ≤ 1."""
    dims = DimSpec.of(dims)
    sigma = as_hermitian(sigma)
    if linalg.min_eigenvalue(sigma) < -tol:
        return False
    return linalg.trace_norm(linalg.partial_transpose(sigma, dims, resolve_cut(dims, cut))) <= 1 + tol

def log_negativity(rho: BipartiteState, cut: Cut = None) -> float:
    """log₂‖T_B ρ‖₁, an upper bound on R_max."""
    flipped = linalg.partial_transpose(rho.matrix, rho.dims, resolve_cut(rho.dims, cut))
    return math.log2(linalg.trace_norm(flipped))

#endregion

#region: states

def w_program(rho: BipartiteState, cut: Cut = None) -> tuple[sdp.HermitianProgram, list[sdp.Variable]]:
    """min Tr(C + D) s.t. T_B(C − D) ⪰ ρ, C, D ⪰ 0."""
    side = rho.dims.total
    t_b = sdp.partial_transpose_map(rho.dims, resolve_cut(rho.dims, cut))
    program = sdp.HermitianProgram("W")
    c = program.hermitian_psd_var(side, "C")
    d = program.hermitian_psd_var(side, "D")
    program.hermitian_lmi([(c, t_b), (d, -t_b)], rho.matrix, "dominance")
    program.minimize(c)
    program.minimize(d)
    return program, [c, d]

def w_state(rho: BipartiteState, cut: Cut = None, tol: float = SDP_TOL) -> MeasureResult:
    program, variables = w_program(rho, cut)
    result = solve_measure(program, variables, tol)
    if result.value < 1 - ASSERT_TOL:
        logger.warning("W = %.12g below its trace lower bound 1", result.value)
    return result

def r_max_state(rho: BipartiteState, cut: Cut = None, tol: float = SDP_TOL) -> float:
    return w_state(rho, cut, tol).log2_value

#endregion

#region: channels

def epigraph(program: sdp.HermitianProgram, n: Channel, variables: typing.Sequence[sdp.Variable]) -> sdp.Variable:
    """t·I_S ⪰ Tr_B of the sum of `variables`, objective t."""
    tr_b = sdp.partial_trace_map(n.choi_dims, 1)
    t = program.scalar_var("t")
    program.hermitian_lmi([(t, sdp.scalar_times(np.eye(n.dim_in)))] + [(v, -tr_b) for v in variables],
                          np.zeros((n.dim_in, n.dim_in)), "epigraph")
    program.minimize(t)
    return t

def gamma_program(n: Channel) -> tuple[sdp.HermitianProgram, list[sdp.Variable]]:
    """min ‖Tr_B(V + Y)‖_∞ s.t. T_B(V − Y) ⪰ J, V, Y ⪰ 0."""
    side = n.dim_in * n.dim_out
    t_b = sdp.partial_transpose_map(n.choi_dims, 1)
    program = sdp.HermitianProgram("Gamma")
    v = program.hermitian_psd_var(side, "V")
    y = program.hermitian_psd_var(side, "Y")
    program.hermitian_lmi([(v, t_b), (y, -t_b)], n.choi, "dominance")
    epigraph(program, n, [v, y])
    return program, [v, y]

def gamma_channel(n: Channel, tol: float = SDP_TOL) -> MeasureResult:
    program, variables = gamma_program(n)
    result = solve_measure(program, variables, tol)
    result.optimizers["rho_S"] = program.dual(result.solution, "epigraph")
    return result

def r_max_channel(n: Channel, tol: float = SDP_TOL) -> float:
    return gamma_channel(n, tol).log2_value

def optimal_channel_input(n: Channel, gamma: MeasureResult | None = None, tol: float = SDP_TOL) -> BipartiteState:
    """
    The pure input (√ρ_S ⊗ I)|Υ⟩⟨Υ|(√ρ_S ⊗ I) on S⊗A built from the dual operator ρ_S
    of the epigraph constraint; N applied to it attains Γ(N).
    """
    gamma = gamma or gamma_channel(n, tol)
    rho_s = linalg.psd_part(gamma.optimizers["rho_S"])
    rho_s = rho_s / np.trace(rho_s).real
    root = np.kron(linalg.psd_sqrt(rho_s), np.eye(n.dim_in))
    upsilon = linalg.max_entangled_vector(n.dim_in)
    phi = root @ upsilon @ upsilon.conj().T @ root
    phi = phi / np.trace(phi).real
    return BipartiteState(phi, (n.dim_in, n.dim_in))

@dataclasses.dataclass
class InputSampleReport:
    channel_value: float
    sampled_values: list[float]
    tol: float

    @property
    def max_sampled(self) -> float:
        return max(self.sampled_values, default=-math.inf)

    @property
    def ok(self) -> bool:
        return self.max_sampled <= self.channel_value + self.tol

def sampled_input_check(n: Channel, samples: int = 10, seed: channels.Seed = 0, tol: float = SDP_TOL,
                        assert_tol: float = ASSERT_TOL) -> InputSampleReport:
    """R_max of N applied to random pure inputs on S⊗A never exceeds R_max(N)."""
    rng = channels._rng(seed)
    bound = r_max_channel(n, tol)
    values = []
    for _ in range(samples):
        phi = channels.random_pure_state((n.dim_in, n.dim_in), rng)
        omega = channels.apply_channel(n, phi, 1)
        values.append(r_max_state(omega, 1, tol))
    report = InputSampleReport(bound, values, assert_tol)
    if not report.ok:
        logger.warning("sampled input reaches %.9f above R_max(N) = %.9f", report.max_sampled, bound)
    return report

#endregion

#region: transpose diamond norm

def transpose_diamond_program(n: Channel) -> tuple[sdp.HermitianProgram, list[sdp.Variable]]:
    """‖T∘N‖_◇ = min ‖Tr_B(P + Q)‖_∞ s.t. P − Q = T_B(J), P, Q ⪰ 0."""
    side = n.dim_in * n.dim_out
    program = sdp.HermitianProgram("TransposeDiamond")
    p = program.hermitian_psd_var(side, "P")
    q = program.hermitian_psd_var(side, "Q")
    flipped = linalg.partial_transpose(n.choi, n.choi_dims, 1)
    program.add_equality([(p, sdp.identity_map()), (q, -sdp.identity_map())], flipped, "split")
    epigraph(program, n, [p, q])
    return program, [p, q]

def transpose_diamond_norm(n: Channel, tol: float = SDP_TOL) -> MeasureResult:
    program, variables = transpose_diamond_program(n)
    return solve_measure(program, variables, tol)

def q_theta(n: Channel, tol: float = SDP_TOL) -> float:
    """log₂‖T∘N‖_◇."""
    return transpose_diamond_norm(n, tol).log2_value

#endregion
