"""
Small dense semidefinite programs.

Primal   minimize ⟨C, X⟩  subject to ⟨A_k, X⟩ = b_k,  X ⪰ 0 (block diagonal, real symmetric)
Dual     maximize bᵀy     subject to Σ_k y_k A_k + S = C,  S ⪰ 0

`solve` is an infeasible-start primal-dual path-following method with Nesterov-Todd
scaling and Mehrotra's predictor-corrector. Complex Hermitian programs are written with
`HermitianProgram`, which maps every Hermitian variable onto a real symmetric block of
twice the side.
"""

import dataclasses
import logging
import typing

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .rainskit import (
    ComplexMatrix, RealMatrix, Status, IllPosedProblemError, NotHermitianError,
    SDP_TOL, SYMMETRIZE_TOL, as_hermitian, is_hermitian,
)
from . import linalg

logger = logging.getLogger(__name__)

STEP_FRACTION = 0.98
RANK_TOL = 1e-10

#region: problem and solution

@dataclasses.dataclass(eq=False)
class SdpProblem:
    """
    A block-diagonal SDP in standard form. `C[j]` and `A[j][k]` are the block-j parts of
    the objective and of the k-th constraint matrix.
    """
    blocks: tuple[int, ...]
    C: list[RealMatrix]
    A: list[np.ndarray]
    b: np.ndarray
    name: str = "sdp"
    check_rank: bool = True

    def __post_init__(self):
        self.blocks = tuple(int(n) for n in self.blocks)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        m = self.b.shape[0]
        if len(self.C) != len(self.blocks) or len(self.A) != len(self.blocks):
            raise IllPosedProblemError(f"{self.name}: {len(self.blocks)} blocks but {len(self.C)} objective and {len(self.A)} constraint parts")
        self.C = [np.asarray(c, dtype=np.float64) for c in self.C]
        self.A = [np.asarray(a, dtype=np.float64) for a in self.A]
        for j, n in enumerate(self.blocks):
            if self.C[j].shape != (n, n):
                raise IllPosedProblemError(f"{self.name}: objective block {j} has shape {self.C[j].shape}, expected {(n, n)}")
            if self.A[j].shape != (m, n, n):
                raise IllPosedProblemError(f"{self.name}: constraint block {j} has shape {self.A[j].shape}, expected {(m, n, n)}")
            if np.max(np.abs(self.C[j] - self.C[j].T), initial=0) > SYMMETRIZE_TOL * (1 + np.max(np.abs(self.C[j]), initial=0)):
                raise IllPosedProblemError(f"{self.name}: objective block {j} is not symmetric")
            self.C[j] = (self.C[j] + self.C[j].T) / 2
            self.A[j] = (self.A[j] + self.A[j].transpose(0, 2, 1)) / 2
        if self.check_rank and m:
            singular = scipy.linalg.svdvals(self.stacked())
            rank = int(np.sum(singular > RANK_TOL * singular[0])) if singular[0] > 0 else 0
            if rank < m:
                raise IllPosedProblemError(f"{self.name}: constraint matrices are linearly dependent (rank {rank} < {m})")

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def constraints(self) -> list[tuple[list[RealMatrix], float]]:
        return [([a[k] for a in self.A], float(self.b[k])) for k in range(self.m)]

    def stacked(self) -> np.ndarray:
        """All constraints as one (m, Σ n_j²) matrix."""
        return np.hstack([a.reshape(self.m, -1) for a in self.A])

    def apply(self, X: typing.Sequence[np.ndarray]) -> np.ndarray:
        """(⟨A_k, X⟩)_k."""
        total = np.zeros(self.m)
        for a, x in zip(self.A, X):
            total += a.reshape(self.m, -1) @ x.reshape(-1)
        return total

    def adjoint(self, y: np.ndarray) -> list[RealMatrix]:
        """Σ_k y_k A_k, per block."""
        return [np.tensordot(y, a, axes=1) for a in self.A]

    def objective(self, X: typing.Sequence[np.ndarray]) -> float:
        return float(sum(np.vdot(c, x) for c, x in zip(self.C, X)))

    @property
    def c_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(c * c) for c in self.C)))

@dataclasses.dataclass(eq=False)
class SdpSolution:
    X: list[RealMatrix]
    y: np.ndarray
    S: list[RealMatrix]
    primal_obj: float
    dual_obj: float
    gap: float
    primal_residual: float
    dual_residual: float
    status: Status
    iterations: int = 0

    @property
    def relative_gap(self) -> float:
        return self.gap / (1 + abs(self.primal_obj) + abs(self.dual_obj))

    @property
    def optimal(self) -> bool:
        return self.status is Status.Optimal

@dataclasses.dataclass
class Certificate:
    """Residuals recomputed from (X, y) alone, and the certified bound interval."""
    lower: float
    upper: float
    primal_residual: float
    dual_residual: float
    min_eig_x: float
    min_eig_s: float
    relative_gap: float
    tol: float
    ok: bool

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack

#endregion

#region: solver

class _Scaling:
    """Nesterov-Todd scaling of one block: Gᵀ S G = G⁻¹ X G⁻ᵀ = diag(d), W = G Gᵀ."""
    __slots__ = ("G", "Ginv", "W", "d")

    def __init__(self, X: np.ndarray, S: np.ndarray):
        lx = scipy.linalg.cholesky(X, lower=True)
        ls = scipy.linalg.cholesky(S, lower=True)
        _, d, vt = scipy.linalg.svd(ls.T @ lx)
        root = np.sqrt(d)
        self.G = (lx @ vt.T) / root
        self.Ginv = (root[:, None] * vt) @ scipy.linalg.solve_triangular(lx, np.eye(X.shape[0]), lower=True)
        self.W = self.G @ self.G.T
        self.d = d

    def lift(self, rhs: np.ndarray) -> np.ndarray:
        """Solve diag(d)∘R = rhs in the scaled space and map R back: G R Gᵀ."""
        r = 2 * rhs / (self.d[:, None] + self.d[None, :])
        return self.G @ r @ self.G.T

def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest α with X + α dX ⪰ 0."""
    lx = scipy.linalg.cholesky(X, lower=True)
    t = scipy.linalg.solve_triangular(lx, dX, lower=True)
    t = scipy.linalg.solve_triangular(lx, t.T, lower=True)
    lam = scipy.linalg.eigvalsh((t + t.T) / 2)[0]
    return np.inf if lam >= 0 else -1.0 / lam

def _sym(x: np.ndarray) -> np.ndarray:
    return (x + x.T) / 2

def solve(problem: SdpProblem, tol: float = SDP_TOL, max_iters: int = 200) -> SdpSolution:
    """
    Solve `problem` to relative gap and relative residuals below `tol`.

    Never raises on numerical difficulty: the best iterate is returned with status
    NumericalTrouble instead.
    """
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-12, 1e-4], got {tol!r}")
    p = problem
    m, blocks = p.m, p.blocks
    n_total = sum(blocks)
    b_norm = float(np.linalg.norm(p.b))
    c_norm = p.c_norm
    flat = [a.reshape(m, -1) for a in p.A]

    eta = 1 + max(float(np.max(np.abs(p.b), initial=0)), max(float(np.max(np.abs(c), initial=0)) for c in p.C))
    X = [eta * np.eye(n) for n in blocks]
    S = [eta * np.eye(n) for n in blocks]
    y = np.zeros(m)

    best: SdpSolution | None = None
    status = Status.NumericalTrouble
    stalls = 0

    def snapshot(status: Status, it: int) -> SdpSolution:
        return SdpSolution([x.copy() for x in X], y.copy(), [s.copy() for s in S], pobj, dobj, abs(pobj - dobj),
                           pinf, dinf, status, it)

    for it in range(max_iters + 1):
        rp = p.b - p.apply(X)
        aty = p.adjoint(y)
        Rd = [c - a - s for c, a, s in zip(p.C, aty, S)]
        pobj = p.objective(X)
        dobj = float(p.b @ y)
        pinf = float(np.linalg.norm(rp)) / (1 + b_norm)
        dinf = float(np.sqrt(sum(np.sum(r * r) for r in Rd))) / (1 + c_norm)
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        merit = max(relgap, pinf, dinf)
        logger.debug("%s it %3d  pobj %+.10e  dobj %+.10e  gap %.2e  pinf %.2e  dinf %.2e",
                     p.name, it, pobj, dobj, relgap, pinf, dinf)

        if best is None or merit < max(best.relative_gap, best.primal_residual, best.dual_residual):
            best = snapshot(Status.NumericalTrouble, it)
        if merit <= tol:
            status = Status.Optimal
            break
        if dobj > 0 and float(np.sqrt(sum(np.sum((a + s) ** 2) for a, s in zip(aty, S)))) / dobj < tol:
            status = Status.PrimalInfeasibleCertificate
            break
        if pobj < 0 and float(np.linalg.norm(p.apply(X))) / -pobj < tol:
            status = Status.DualInfeasibleCertificate
            break
        if it == max_iters:
            logger.info("%s: iteration limit %d reached (gap %.2e, pinf %.2e, dinf %.2e)", p.name, max_iters, relgap, pinf, dinf)
            break

        try:
            scalings = [_Scaling(x, s) for x, s in zip(X, S)]
            schur = np.zeros((m, m))
            for a, f, sc in zip(p.A, flat, scalings):
                waw = sc.W @ a @ sc.W
                schur += f @ waw.reshape(m, -1).T
            schur = (schur + schur.T) / 2
            try:
                factor = scipy.linalg.cho_factor(schur)
                schur_solve = lambda rhs: scipy.linalg.cho_solve(factor, rhs)
            except np.linalg.LinAlgError:
                schur_solve = lambda rhs: scipy.linalg.lstsq(schur, rhs)[0]
        except (np.linalg.LinAlgError, ValueError) as error:
            logger.info("%s: factorization failed at iteration %d: %s", p.name, it, error)
            break

        def direction(rhs: list[np.ndarray]):
            Rc = [sc.lift(r) for sc, r in zip(scalings, rhs)]
            t = [rc - sc.W @ rd @ sc.W for rc, sc, rd in zip(Rc, scalings, Rd)]
            dy = schur_solve(rp - p.apply(t))
            dS = [rd - a for rd, a in zip(Rd, p.adjoint(dy))]
            dX = [_sym(rc - sc.W @ ds @ sc.W) for rc, sc, ds in zip(Rc, scalings, dS)]
            return dX, dy, [_sym(ds) for ds in dS]

        def steps(dX, dS):
            try:
                ap = min(1.0, STEP_FRACTION * min(_max_step(x, dx) for x, dx in zip(X, dX)))
                ad = min(1.0, STEP_FRACTION * min(_max_step(s, ds) for s, ds in zip(S, dS)))
            except (np.linalg.LinAlgError, ValueError):
                return 0.0, 0.0
            return ap, ad

        def predict_correct():
            mu = sum(np.vdot(x, s) for x, s in zip(X, S)) / n_total

            # predictor
            dX_a, dy_a, dS_a = direction([-np.diag(sc.d ** 2) for sc in scalings])
            ap, ad = steps(dX_a, dS_a)
            mu_aff = sum(np.vdot(x + ap * dx, s + ad * ds) for x, dx, s, ds in zip(X, dX_a, S, dS_a)) / n_total
            sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0)) if mu > 0 else 0.0

            # corrector
            rhs = []
            for sc, dx, ds in zip(scalings, dX_a, dS_a):
                dxs = sc.Ginv @ dx @ sc.Ginv.T
                dss = sc.G.T @ ds @ sc.G
                second = (dxs @ dss + dss @ dxs) / 2
                rhs.append(sigma * mu * np.eye(len(sc.d)) - np.diag(sc.d ** 2) - second)
            dX, dy, dS = direction(rhs)
            return dX, dy, dS, *steps(dX, dS)

        try:
            dX, dy, dS, ap, ad = predict_correct()
        except (np.linalg.LinAlgError, ValueError) as error:
            logger.info("%s: direction failed at iteration %d: %s", p.name, it, error)
            break

        if max(ap, ad) < 1e-10:
            stalls += 1
            if stalls >= 3:
                logger.info("%s: step length collapsed at iteration %d", p.name, it)
                break
        else:
            stalls = 0
        X = [x + ap * dx for x, dx in zip(X, dX)]
        y = y + ad * dy
        S = [s + ad * ds for s, ds in zip(S, dS)]

    if status is Status.Optimal or status in (Status.PrimalInfeasibleCertificate, Status.DualInfeasibleCertificate):
        solution = snapshot(status, it)
    else:
        solution = best
    logger.debug("%s: %s after %d iterations, pobj %.12g dobj %.12g", p.name, solution.status.value,
                 solution.iterations, solution.primal_obj, solution.dual_obj)
    return solution

def verify(problem: SdpProblem, solution: SdpSolution, tol: float = SDP_TOL) -> Certificate:
    """
    Recompute residuals from the primal X and dual y only (the dual slack is rebuilt as
    C − Σ y_k A_k) and report the interval [dual, primal] they certify.
    """
    p = problem
    X = solution.X
    rp = p.apply(X) - p.b
    s_hat = [c - a for c, a in zip(p.C, p.adjoint(solution.y))]
    pobj = p.objective(X)
    dobj = float(p.b @ solution.y)
    c_norm = p.c_norm
    primal_residual = float(np.linalg.norm(rp)) / (1 + float(np.linalg.norm(p.b)))
    rd = [s - sol_s for s, sol_s in zip(s_hat, solution.S)]
    dual_residual = float(np.sqrt(sum(np.sum(r * r) for r in rd))) / (1 + c_norm)
    min_eig_x = min(float(scipy.linalg.eigvalsh(_sym(x))[0]) for x in X)
    min_eig_s = min(float(scipy.linalg.eigvalsh(_sym(s))[0]) for s in s_hat)
    relative_gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
    ok = (primal_residual <= tol and dual_residual <= tol and relative_gap <= tol
          and min_eig_x >= -tol * (1 + max(abs(pobj), 1.0)) and min_eig_s >= -tol * (1 + c_norm))
    return Certificate(min(pobj, dobj), max(pobj, dobj), primal_residual, dual_residual, min_eig_x, min_eig_s,
                       relative_gap, tol, ok)

#endregion

#region: complex Hermitian programs

@dataclasses.dataclass(frozen=True)
class HermitianMap:
    """A real-linear map between Hermitian spaces, with its adjoint."""
    forward: typing.Callable[[typing.Any], ComplexMatrix]
    adjoint: typing.Callable[[ComplexMatrix], typing.Any]
    name: str = "map"

    def __neg__(self) -> "HermitianMap":
        return HermitianMap(lambda x: -self.forward(x), lambda h: -self.adjoint(h), f"-{self.name}")

def identity_map() -> HermitianMap:
    return HermitianMap(lambda x: x, lambda h: h, "id")

def partial_transpose_map(dims, systems) -> HermitianMap:
    """Self-adjoint: ⟨T_B(X), Y⟩ = ⟨X, T_B(Y)⟩."""
    fn = lambda x: linalg.partial_transpose(x, dims, systems)
    return HermitianMap(fn, fn, "T")

def partial_trace_map(dims, traced) -> HermitianMap:
    return HermitianMap(lambda x: linalg.partial_trace(x, dims, traced),
                        lambda h: linalg.embed_identity(h, dims, traced), "Tr")

def composed_map(outer: HermitianMap, inner: HermitianMap) -> HermitianMap:
    return HermitianMap(lambda x: outer.forward(inner.forward(x)), lambda h: inner.adjoint(outer.adjoint(h)),
                        f"{outer.name}∘{inner.name}")

def scalar_times(q: npt.ArrayLike) -> HermitianMap:
    """t ↦ t·Q for a scalar variable t."""
    q = as_hermitian(q)
    return HermitianMap(lambda t: t * q, lambda h: float(np.real(np.vdot(q, h))), "scalar")

def hermitian_basis(n: int) -> list[ComplexMatrix]:
    """Orthonormal basis of n×n Hermitian matrices under Re Tr(A†B)."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=np.complex128)
        e[i, i] = 1
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            re = np.zeros((n, n), dtype=np.complex128)
            re[i, j] = re[j, i] = 1 / np.sqrt(2)
            im = np.zeros((n, n), dtype=np.complex128)
            im[i, j], im[j, i] = 1j / np.sqrt(2), -1j / np.sqrt(2)
            basis += [re, im]
    return basis

def hermitian_psd_block(g: npt.ArrayLike) -> RealMatrix:
    """
    Real block representing ⟨G, X⟩ for a Hermitian variable X stored as a real
    symmetric Z with X = complex_from_embedding(Z): the embedding doubles traces, so
    ⟨G, X⟩ = ⟨real_embedding(G)/2, Z⟩.
    """
    return linalg.real_embedding(g) / 2

@dataclasses.dataclass(frozen=True)
class Variable:
    index: int
    size: int
    scalar: bool
    name: str

@dataclasses.dataclass
class _Equality:
    name: str
    terms: list[tuple[Variable, HermitianMap]]
    rhs: ComplexMatrix
    start: int = 0

class HermitianProgram:
    """
    Builder for programs over complex Hermitian PSD variables and nonnegative scalars,
    with Hermitian-valued equality constraints Σ_j M_j(X_j) = R.
    """

    def __init__(self, name: str = "program"):
        self.name = name
        self.variables: list[Variable] = []
        self.equalities: list[_Equality] = []
        self.objective: list[tuple[Variable, typing.Any]] = []
        self.problem: SdpProblem | None = None

    def hermitian_psd_var(self, n: int, name: str) -> Variable:
        var = Variable(len(self.variables), n, False, name)
        self.variables.append(var)
        return var

    def scalar_var(self, name: str) -> Variable:
        var = Variable(len(self.variables), 1, True, name)
        self.variables.append(var)
        return var

    def add_equality(self, terms: typing.Sequence[tuple[Variable, HermitianMap]], rhs: npt.ArrayLike, name: str):
        rhs = np.asarray(rhs, dtype=np.complex128)
        if not is_hermitian(rhs, SYMMETRIZE_TOL):
            raise NotHermitianError(f"{self.name}/{name}: right-hand side is not Hermitian")
        self.equalities.append(_Equality(name, list(terms), as_hermitian(rhs)))

    def hermitian_lmi(self, terms: typing.Sequence[tuple[Variable, HermitianMap]], rhs: npt.ArrayLike,
                      name: str) -> Variable:
        """Σ_j M_j(X_j) ⪰ R, through an explicit PSD slack. Returns the slack variable."""
        rhs = np.asarray(rhs, dtype=np.complex128)
        slack = self.hermitian_psd_var(rhs.shape[0], f"{name}_slack")
        self.add_equality(list(terms) + [(slack, -identity_map())], rhs, name)
        return slack

    def minimize(self, var: Variable, weight: typing.Any = None):
        """Add ⟨G, X⟩ (Hermitian variable, G defaults to I) or c·t (scalar) to the objective."""
        if weight is None:
            weight = 1.0 if var.scalar else np.eye(var.size)
        self.objective.append((var, weight))

    def build(self) -> SdpProblem:
        blocks = [1 if v.scalar else 2 * v.size for v in self.variables]
        C = [np.zeros((n, n)) for n in blocks]
        for var, weight in self.objective:
            if var.scalar:
                C[var.index][0, 0] += float(weight)
            else:
                C[var.index] += hermitian_psd_block(weight)

        rows: list[list[np.ndarray]] = []
        b: list[float] = []
        for eq in self.equalities:
            eq.start = len(b)
            for h in hermitian_basis(eq.rhs.shape[0]):
                row = [np.zeros((n, n)) for n in blocks]
                for var, fn in eq.terms:
                    g = fn.adjoint(h)
                    if var.scalar:
                        row[var.index][0, 0] += float(np.real(g))
                    else:
                        row[var.index] += hermitian_psd_block(g)
                rows.append(row)
                b.append(float(np.real(np.vdot(h, eq.rhs))))
        A = [np.stack([row[j] for row in rows]) if rows else np.zeros((0, n, n)) for j, n in enumerate(blocks)]
        self.problem = SdpProblem(tuple(blocks), C, A, np.array(b), name=self.name)
        return self.problem

    def value(self, solution: SdpSolution, var: Variable):
        z = solution.X[var.index]
        if var.scalar:
            return float(z[0, 0])
        return linalg.complex_from_embedding(z)

    def dual(self, solution: SdpSolution, name: str) -> ComplexMatrix:
        """Σ_r y_r H_r over the rows of the named equality."""
        eq = next(e for e in self.equalities if e.name == name)
        basis = hermitian_basis(eq.rhs.shape[0])
        ys = solution.y[eq.start:eq.start + len(basis)]
        return sum(y * h for y, h in zip(ys, basis))

    def residual(self, solution: SdpSolution, name: str) -> float:
        """Largest entry of Σ_j M_j(X_j) − R for the named equality."""
        eq = next(e for e in self.equalities if e.name == name)
        total = -eq.rhs
        for var, fn in eq.terms:
            total = total + fn.forward(self.value(solution, var))
        return float(np.max(np.abs(total)))

    def solve(self, tol: float = SDP_TOL, max_iters: int = 200) -> SdpSolution:
        problem = self.problem or self.build()
        return solve(problem, tol, max_iters)

#endregion
