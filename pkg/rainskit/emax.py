"""
Max-relative entropy of entanglement: W_sep and E_max for states, Σ and E_max for
channels.

The separable cone is encoded as {X ⪰ 0, T_B X ⪰ 0}. That is exact when the two sides
of the cut have dimensions multiplying to at most 6 and a relaxation (a lower bound on
every minimum below) otherwise; results carry the flag.
"""

import dataclasses
import logging
import typing

import numpy as np
import numpy.typing as npt

from .rainskit import (
    ComplexMatrix, DimSpec, DimensionError, DimensionGateError, SepConeMode,
    SDP_TOL, ASSERT_TOL, PSD_TOL, as_hermitian,
)
from . import linalg, channels, sdp, rains
from .channels import Channel, BipartiteState
from .rains import MeasureResult, Cut
from .amortization import contract_io

logger = logging.getLogger(__name__)

EXACT_DIM_LIMIT = 6
INPUT_FLOOR = 1e-8

def resolve_mode(dim_a: int, dim_b: int, mode: SepConeMode | None = None) -> SepConeMode:
    """The requested mode, or the exact one whenever the dimensions allow it."""
    fits = dim_a * dim_b <= EXACT_DIM_LIMIT
    if mode is None:
        mode = SepConeMode.ExactSmallDims if fits else SepConeMode.PptRelaxation
    if mode is SepConeMode.ExactSmallDims and not fits:
        raise DimensionGateError(f"the PPT encoding of the separable cone is exact only for |A|·|B| ≤ {EXACT_DIM_LIMIT}, got {dim_a}·{dim_b}")
    if mode is SepConeMode.PptRelaxation:
        logger.info("separable cone relaxed to PPT for %d⊗%d", dim_a, dim_b)
    return mode

def _ppt_cone_var(program: sdp.HermitianProgram, side: int, dims, cut, name: str) -> sdp.Variable:
    """X ⪰ 0 with T_B X ⪰ 0 through an auxiliary P = T_B X."""
    x = program.hermitian_psd_var(side, name)
    p = program.hermitian_psd_var(side, f"T_B({name})")
    program.add_equality([(x, sdp.partial_transpose_map(dims, cut)), (p, -sdp.identity_map())],
                         np.zeros((side, side)), "cone")
    return x

#region: states

def w_sep_program(rho: BipartiteState, cut: Cut = None) -> tuple[sdp.HermitianProgram, list[sdp.Variable]]:
    """min Tr X s.t. X ⪰ ρ, X in the cone."""
    cut = rains.resolve_cut(rho.dims, cut)
    program = sdp.HermitianProgram("W_sep")
    x = _ppt_cone_var(program, rho.dims.total, rho.dims, cut, "X")
    program.hermitian_lmi([(x, sdp.identity_map())], rho.matrix, "dominance")
    program.minimize(x)
    return program, [x]

def w_sep(rho: BipartiteState, cut: Cut = None, mode: SepConeMode | None = None,
          tol: float = SDP_TOL) -> MeasureResult:
    indices = rains.resolve_cut(rho.dims, cut)
    mode = resolve_mode(rho.dims.dim_of(rho.dims.complement(indices)), rho.dims.dim_of(indices), mode)
    program, variables = w_sep_program(rho, indices)
    result = rains.solve_measure(program, variables, tol)
    result.exact = mode.exactness_flag
    return result

def e_max_state(rho: BipartiteState, cut: Cut = None, mode: SepConeMode | None = None,
                tol: float = SDP_TOL) -> float:
    return w_sep(rho, cut, mode, tol).log2_value

#endregion

#region: channels

def sigma_program(n: Channel) -> tuple[sdp.HermitianProgram, list[sdp.Variable]]:
    """min ‖Tr_B Y‖_∞ s.t. Y ⪰ J, Y in the cone."""
    program = sdp.HermitianProgram("Sigma")
    y = _ppt_cone_var(program, n.dim_in * n.dim_out, n.choi_dims, 1, "Y")
    program.hermitian_lmi([(y, sdp.identity_map())], n.choi, "dominance")
    rains.epigraph(program, n, [y])
    return program, [y]

def sigma_channel(n: Channel, mode: SepConeMode | None = None, tol: float = SDP_TOL) -> MeasureResult:
    mode = resolve_mode(n.dim_in, n.dim_out, mode)
    program, variables = sigma_program(n)
    result = rains.solve_measure(program, variables, tol)
    result.exact = mode.exactness_flag
    return result

def e_max_channel(n: Channel, mode: SepConeMode | None = None, tol: float = SDP_TOL) -> float:
    return sigma_channel(n, mode, tol).log2_value

#endregion

#region: amortization

def construct_feasible_E_sep(C: npt.ArrayLike, Y: npt.ArrayLike, dims: DimSpec | typing.Sequence[int]) -> ComplexMatrix:
    """E = ⟨Υ|_SA C ⊗ Y |Υ⟩_SA on (A′, B, B′)."""
    dims = DimSpec.of(dims)
    side = np.asarray(Y).shape[0]
    if len(dims) != 3 or side % dims[1]:
        raise DimensionError(f"cannot contract a channel operator of side {side} against dims {dims}")
    return as_hermitian(contract_io(C, Y, dims, side // dims[1]))

def product_feasible_E(P: npt.ArrayLike, Q: npt.ArrayLike, L: npt.ArrayLike, M: npt.ArrayLike,
                       a_prime: int) -> ComplexMatrix:
    """
    E for C = P_{A′A} ⊗ Q_{B′} and Y = L_S ⊗ M_B, in closed form: Tr_A{P·T_A(L)} ⊗ M ⊗ Q.
    """
    L = np.asarray(L, dtype=np.complex128)
    a = L.shape[0]
    head = linalg.partial_trace(np.asarray(P) @ np.kron(np.eye(a_prime), L.T), (a_prime, a), 1)
    return linalg.kron(head, M, Q)

def repair_cone_dominance(x: npt.ArrayLike, target: npt.ArrayLike) -> ComplexMatrix:
    """Shift X by a multiple of I so that X ⪰ target exactly; stays in the cone."""
    x = as_hermitian(x)
    shift = max(0.0, -linalg.min_eigenvalue(x - target))
    return x + shift * np.eye(x.shape[0])

@dataclasses.dataclass
class EmaxAmortizationReport:
    w_input: MeasureResult
    sigma: MeasureResult
    w_output: MeasureResult
    constructed_E: ComplexMatrix = dataclasses.field(repr=False)
    feasibility_residuals: dict[str, float]
    construction_value: float

    @property
    def exact(self) -> bool:
        return self.w_input.exact and self.sigma.exact and self.w_output.exact

    @property
    def scale(self) -> float:
        return max(1.0, self.w_input.value, self.sigma.value, self.w_output.value)

    @property
    def margin(self) -> float:
        return self.sigma.value * self.w_input.value - self.w_output.value

    @property
    def construction_margin(self) -> float:
        return self.sigma.value * self.w_input.value - self.construction_value

    @property
    def sandwich_margin(self) -> float:
        return self.construction_value - self.w_output.value

    def failures(self, tol: float = ASSERT_TOL, psd_tol: float = PSD_TOL) -> list[str]:
        scale = self.scale
        failed = [f"{name} {value:.3e}" for name, value in (
            ("margin", self.margin),
            ("construction margin", self.construction_margin),
            ("sandwich margin", self.sandwich_margin),
        ) if value < -tol * scale]
        failed += [f"{key} min eigenvalue {value:.3e}" for key, value in self.feasibility_residuals.items()
                   if value < -psd_tol * scale]
        return failed

    @property
    def ok(self) -> bool:
        return not self.failures()

def verify_emax_amortization(n: Channel, rho: BipartiteState, mode: SepConeMode | None = None,
                             tol: float = SDP_TOL) -> EmaxAmortizationReport:
    """W_sep(A′;BB′)_ω ≤ Σ(N)·W_sep(A′A;B′)_ρ with the feasible point E built from the optimizers."""
    if len(rho.dims) != 3 or rho.dims[1] != n.dim_in:
        raise DimensionError(f"expected a state on (A′, A, B′) with |A| = {n.dim_in}, got dims {rho.dims}")
    omega = channels.apply_channel(n, rho, 1).refactor((rho.dims[0], n.dim_out, rho.dims[2]))

    w_in = w_sep(rho, 2, mode, tol)
    sigma = sigma_channel(n, mode, tol)
    w_out = w_sep(omega, (1, 2), mode, tol)

    X = repair_cone_dominance(w_in["X"], rho.matrix)
    Y = repair_cone_dominance(sigma["Y"], n.choi)
    E = construct_feasible_E_sep(X, Y, rho.dims)
    residuals = {
        "E": linalg.min_eigenvalue(E),
        "dominance": linalg.min_eigenvalue(E - omega.matrix),
        "ppt": linalg.min_eigenvalue(linalg.partial_transpose(E, omega.dims, (1, 2))),
    }
    report = EmaxAmortizationReport(w_in, sigma, w_out, E, residuals, float(np.trace(E).real))
    if mode is None and not report.exact:
        logger.warning("dims %s exceed the exact separable cone; checked on its PPT relaxation", rho.dims)
    return report

#endregion

#region: consistency probes

def sandwiched_choi(n: Channel, rho_s: npt.ArrayLike) -> BipartiteState:
    """ρ_S^{1/2} J ρ_S^{1/2}, the output for the purification of ρ_S."""
    root = np.kron(linalg.psd_sqrt(rho_s), np.eye(n.dim_out))
    out = root @ n.choi @ root
    return BipartiteState(out / np.trace(out).real, n.choi_dims)

def floor_spectrum(rho: npt.ArrayLike, floor: float = INPUT_FLOOR) -> ComplexMatrix:
    w, v = linalg.eigh(rho)
    w = np.maximum(w, floor)
    w = w / w.sum()
    return (v * w) @ v.conj().T

@dataclasses.dataclass
class MinimaxReport:
    bound: float
    inner_values: list[float]
    tol: float = ASSERT_TOL
    reach_tol: float = 0.05

    @property
    def max_inner(self) -> float:
        return max(self.inner_values)

    @property
    def ok(self) -> bool:
        return self.max_inner <= self.bound + self.tol and self.bound - self.max_inner <= self.reach_tol

def minimax_consistency_check(n: Channel, samples: int = 200, seed: channels.Seed = 0,
                              tol: float = SDP_TOL) -> MinimaxReport:
    """
    For sampled input densities ρ_S, E_max of ρ_S^{1/2} J ρ_S^{1/2} never exceeds E_max(N),
    and the best sample comes close to it. The maximally mixed input is sampled first.
    """
    mode = resolve_mode(n.dim_in, n.dim_out, SepConeMode.ExactSmallDims)
    bound = e_max_channel(n, mode, tol)
    rng = channels._rng(seed)
    d = n.dim_in
    inputs = [np.eye(d) / d]
    for i in range(samples - 1):
        # every third sample is nearly pure
        rank = 1 if i % 3 == 2 else None
        inputs.append(floor_spectrum(channels.random_density(d, rng, rank)))
    values = [e_max_state(sandwiched_choi(n, rho_s), 1, mode, tol) for rho_s in inputs]
    report = MinimaxReport(bound, values)
    logger.debug("minimax: bound %.9f, best sample %.9f", bound, report.max_inner)
    return report

@dataclasses.dataclass
class SubadditivityReport:
    tensor_value: float
    parts: tuple[float, float]
    exact_parts: tuple[bool, bool]

    @property
    def difference(self) -> float:
        return sum(self.parts) - self.tensor_value

def sigma_subadditivity_probe(n: Channel, m: Channel, tol: float = SDP_TOL) -> SubadditivityReport:
    """
    Relaxed E_max(N ⊗ M) against E_max(N) + E_max(M). Observes the relaxation only;
    nothing is asserted.
    """
    joint = channels.tensor(n, m)
    joint_result = sigma_channel(joint, SepConeMode.PptRelaxation, tol)
    first = sigma_channel(n, None, tol)
    second = sigma_channel(m, None, tol)
    report = SubadditivityReport(joint_result.log2_value, (first.log2_value, second.log2_value),
                                 (first.exact, second.exact))
    logger.info("relaxed E_max(%s) = %.9f, parts sum to %.9f", joint.name, report.tensor_value, sum(report.parts))
    return report

#endregion
