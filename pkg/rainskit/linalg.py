"""
Dense Hermitian linear algebra on tensor-product spaces.

Every operator is a plain complex numpy matrix whose tensor structure is carried
by a `DimSpec` alongside it. Subsystems are addressed by index into the factors.
The computational basis is fixed; partial transposes use it.
"""

import functools
import typing

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .rainskit import (
    ComplexMatrix, RealMatrix, DimSpec, DimensionError, NotHermitianError, NotPositiveError,
    HERMITIAN_TOL, SYMMETRIZE_TOL, as_hermitian, is_hermitian, max_abs,
)

Systems = int | typing.Sequence[int]
Dims = DimSpec | typing.Sequence[int]

#region: tensor structure

def kron(*operators: npt.ArrayLike) -> ComplexMatrix:
    """Kronecker product of any number of matrices, left to right."""
    if not operators:
        raise ValueError("kron needs at least one operand")
    return functools.reduce(np.kron, (np.asarray(op, dtype=np.complex128) for op in operators))

def _tensor(x: np.ndarray, dims: Dims) -> tuple[DimSpec, np.ndarray]:
    dims = DimSpec.of(dims)
    x = np.asarray(x, dtype=np.complex128)
    dims.check_square(x)
    return dims, x.reshape(dims.factors + dims.factors)

def permute_systems(x: npt.ArrayLike, dims: Dims, order: typing.Sequence[int]) -> ComplexMatrix:
    """Reorder the tensor factors of `x`: factor `order[i]` becomes factor `i`."""
    dims, t = _tensor(x, dims)
    order = tuple(order)
    if sorted(order) != list(range(len(dims))):
        raise DimensionError(f"{order} is not a permutation of the {len(dims)} subsystems")
    k = len(dims)
    t = t.transpose(order + tuple(k + i for i in order))
    return t.reshape(dims.total, dims.total)

def permute_vector(v: npt.ArrayLike, dims: Dims, order: typing.Sequence[int]) -> ComplexMatrix:
    """Reorder the tensor factors of the rows of `v` (a column vector or a stack of columns)."""
    dims = DimSpec.of(dims)
    v = np.asarray(v, dtype=np.complex128)
    cols = v.shape[1] if v.ndim == 2 else 1
    t = v.reshape(dims.factors + (cols,))
    t = t.transpose(tuple(order) + (len(dims),))
    return t.reshape(dims.total, cols)

def partial_trace(x: npt.ArrayLike, dims: Dims, traced: Systems) -> ComplexMatrix:
    """Trace out the subsystem(s) `traced`; the remaining factors keep their order."""
    dims, t = _tensor(x, dims)
    traced = dims.indices(traced)
    k = len(dims)
    rows = list(range(k))
    cols = [k + i if i not in traced else i for i in range(k)]
    kept = dims.complement(traced)
    out = [rows[i] for i in kept] + [cols[i] for i in kept]
    side = dims.dim_of(kept) if kept else 1
    return np.einsum(t, rows + cols, out).reshape(side, side)

def partial_transpose(x: npt.ArrayLike, dims: Dims, transposed: Systems) -> ComplexMatrix:
    """Transpose the subsystem(s) `transposed` in the computational basis."""
    dims, t = _tensor(x, dims)
    k = len(dims)
    axes = list(range(2 * k))
    for i in dims.indices(transposed):
        axes[i], axes[k + i] = axes[k + i], axes[i]
    return t.transpose(axes).reshape(dims.total, dims.total)

def embed_identity(x: npt.ArrayLike, dims: Dims, position: Systems) -> ComplexMatrix:
    """
    Adjoint of the partial trace: tensor `x` (acting on the factors of `dims` not in
    `position`) with identities on the factors in `position`.
    """
    dims = DimSpec.of(dims)
    position = dims.indices(position)
    kept = dims.complement(position)
    x = np.asarray(x, dtype=np.complex128)
    identity = np.eye(dims.dim_of(position)) if position else np.eye(1)
    full = np.kron(x, identity)
    # full is ordered kept + position; move factors back to their slots
    current = list(kept) + list(position)
    order = [current.index(i) for i in range(len(dims))]
    return permute_systems(full, [dims[i] for i in current], order)

#endregion

#region: spectra and norms

def eigh(x: npt.ArrayLike) -> tuple[RealMatrix, ComplexMatrix]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    h = as_hermitian(x)
    return scipy.linalg.eigh(h)

def eigvalsh(x: npt.ArrayLike) -> RealMatrix:
    return scipy.linalg.eigvalsh(as_hermitian(x))

def min_eigenvalue(x: npt.ArrayLike) -> float:
    return float(eigvalsh(x)[0])

def trace_norm(x: npt.ArrayLike) -> float:
    """Sum of singular values; for Hermitian input the sum of absolute eigenvalues."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {x.shape}")
    if is_hermitian(x, SYMMETRIZE_TOL):
        return float(np.sum(np.abs(eigvalsh(x))))
    return float(np.sum(scipy.linalg.svdvals(x)))

def operator_norm(x: npt.ArrayLike) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    x = np.asarray(x, dtype=np.complex128)
    if not is_hermitian(x, SYMMETRIZE_TOL):
        raise NotHermitianError("operator_norm expects a Hermitian matrix")
    return float(np.max(np.abs(eigvalsh(x))))

def psd_part(x: npt.ArrayLike) -> ComplexMatrix:
    """The positive part of a Hermitian matrix."""
    w, v = eigh(x)
    return (v * np.clip(w, 0, None)) @ v.conj().T

def psd_sqrt(x: npt.ArrayLike, tol: float = 1e-10) -> ComplexMatrix:
    w, v = eigh(x)
    if w[0] < -tol * (1 + max(abs(w[0]), abs(w[-1]))):
        raise NotPositiveError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T

def fidelity(tau: npt.ArrayLike, kappa: npt.ArrayLike) -> float:
    """F(τ, κ) = ‖√τ √κ‖₁², clipped to [0, 1]."""
    root_tau = psd_sqrt(tau)
    root_kappa = psd_sqrt(kappa)
    f = float(np.sum(scipy.linalg.svdvals(root_tau @ root_kappa))) ** 2
    return min(1.0, max(0.0, f))

#endregion

#region: maximally entangled vectors

def max_entangled_vector(d: int, normalized: bool = False) -> ComplexMatrix:
    """
    Column vector Σ_i |i⟩|i⟩ of length d².

    The unnormalized flavor (squared norm d) is the one the Choi operator is built from;
    `normalized=True` gives |Φ⟩ = (1/√d) Σ_i |i⟩|i⟩.
    """
    if d < 1:
        raise DimensionError(f"dimension must be positive, got {d}")
    v = np.eye(d, dtype=np.complex128).reshape(d * d, 1)
    if normalized:
        v = v / np.sqrt(d)
    return v

def max_entangled_state(d: int) -> ComplexMatrix:
    """Normalized projector Φ_d."""
    v = max_entangled_vector(d, normalized=True)
    return v @ v.conj().T

def sandwich_max_entangled(m: npt.ArrayLike, dims: Dims, left: int, right: int) -> ComplexMatrix:
    """
    ⟨Υ| m |Υ⟩ with the unnormalized Υ spanning subsystems `left` and `right`.

    Both legs must have equal dimension. The result acts on the remaining factors in
    their original order.
    """
    dims, t = _tensor(m, dims)
    left, right = dims.indices((left, right))
    if dims[left] != dims[right]:
        raise DimensionError(f"contraction legs differ in dimension: {dims[left]} vs {dims[right]}")
    k = len(dims)
    rows = list(range(k))
    cols = list(range(k, 2 * k))
    rows[right] = rows[left]
    cols[right] = cols[left]
    kept = dims.complement((left, right))
    out = [rows[i] for i in kept] + [cols[i] for i in kept]
    side = dims.dim_of(kept) if kept else 1
    return np.einsum(t, rows + cols, out).reshape(side, side)

def transpose_trick_check(x: npt.ArrayLike, dims: Dims, tol: float = HERMITIAN_TOL) -> bool:
    """
    Check (X_SR ⊗ I_A)|Υ⟩_RA = (T_A(X_SA) ⊗ I_R)|Υ⟩_RA for `x` on S⊗R, with A ≅ R.

    Both sides are compared as maps from S into S⊗R⊗A.
    """
    dims = DimSpec.of(dims)
    if len(dims) != 2:
        raise DimensionError("transpose_trick_check expects dims (S, R)")
    x = np.asarray(x, dtype=np.complex128)
    dims.check_square(x)
    d_s, d_r = dims.factors
    upsilon = max_entangled_vector(d_r)
    embed = np.kron(np.eye(d_s), upsilon)
    lhs = np.kron(x, np.eye(d_r)) @ embed
    # same operator relabeled onto S⊗A, transposed on A, acting on S⊗A⊗R
    rhs = np.kron(partial_transpose(x, dims, 1), np.eye(d_r)) @ embed
    rhs = permute_vector(rhs, (d_s, d_r, d_r), (0, 2, 1))
    return bool(max_abs(lhs - rhs) <= tol * (1 + max_abs(x)))

#endregion

#region: real embedding

def real_embedding(h: npt.ArrayLike) -> RealMatrix:
    """[[A, −B], [B, A]] for h = A + iB; doubles each eigenvalue's multiplicity."""
    h = np.asarray(h, dtype=np.complex128)
    if not is_hermitian(h, SYMMETRIZE_TOL):
        raise NotHermitianError("real_embedding expects a Hermitian matrix")
    h = as_hermitian(h)
    a, b = h.real, h.imag
    return np.block([[a, -b], [b, a]])

def complex_from_embedding(z: npt.ArrayLike) -> ComplexMatrix:
    """
    Map a real symmetric 2n×2n matrix back to an n×n Hermitian one.

    Inverse of `real_embedding` on its range, and a PSD-preserving projection in general:
    ((Z11 + Z22) + i(Z21 − Z12)) / 2.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0] // 2
    z11, z12, z21, z22 = z[:n, :n], z[:n, n:], z[n:, :n], z[n:, n:]
    x = ((z11 + z22) + 1j * (z21 - z12)) / 2
    return (x + x.conj().T) / 2

#endregion
