"""
Quantum channels and bipartite states: construction, validation, Choi form,
application to subsystems, standard families and seeded random instances.
"""

import dataclasses
import logging
import math
import typing

import numpy as np
import numpy.typing as npt

from .rainskit import (
    ComplexMatrix, DimSpec, DimensionError, InvalidChannelError, InvalidStateError,
    STATE_TOL, as_hermitian, max_abs,
)
from . import linalg

logger = logging.getLogger(__name__)

CHANNEL_TOL = 1e-10

Seed = int | np.random.Generator | None

def _rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)

#region: types

@dataclasses.dataclass(frozen=True, eq=False)
class Channel:
    """
    A completely positive trace-preserving map, kept as Kraus operators and/or its
    Choi operator J on S⊗B (S the reference copy of the input).

    Compare channels with `same_channel`, never through their Kraus lists.
    """
    dim_in: int
    dim_out: int
    kraus: tuple[ComplexMatrix, ...] | None = None
    choi: ComplexMatrix | None = None
    dims_in: tuple[int, ...] = ()
    dims_out: tuple[int, ...] = ()
    name: str = "channel"

    def __post_init__(self):
        if self.dim_in < 1 or self.dim_out < 1:
            raise InvalidChannelError(f"{self.name}: dimensions must be positive")
        if self.kraus is None and self.choi is None:
            raise InvalidChannelError(f"{self.name}: need Kraus operators or a Choi operator")
        for attr, dim in (("dims_in", self.dim_in), ("dims_out", self.dim_out)):
            factors = tuple(getattr(self, attr)) or (dim,)
            if math.prod(factors) != dim:
                raise DimensionError(f"{self.name}: {attr} {factors} do not multiply to {dim}")
            object.__setattr__(self, attr, factors)

        choi_from_ops = None
        if self.kraus is not None:
            kraus = tuple(np.asarray(k, dtype=np.complex128) for k in self.kraus)
            if not kraus:
                raise InvalidChannelError(f"{self.name}: empty Kraus list")
            for k in kraus:
                if k.shape != (self.dim_out, self.dim_in):
                    raise DimensionError(f"{self.name}: Kraus operator of shape {k.shape}, expected {(self.dim_out, self.dim_in)}")
            residual = tp_residual(kraus)
            if residual > CHANNEL_TOL:
                raise InvalidChannelError(f"{self.name}: Kraus operators are not trace preserving (residual {residual:.3e})")
            object.__setattr__(self, "kraus", kraus)
            choi_from_ops = choi_from_kraus(kraus)

        if self.choi is None:
            object.__setattr__(self, "choi", choi_from_ops)
            return

        choi = np.asarray(self.choi, dtype=np.complex128)
        side = self.dim_in * self.dim_out
        if choi.shape != (side, side):
            raise DimensionError(f"{self.name}: Choi operator of shape {choi.shape}, expected {(side, side)}")
        choi = as_hermitian(choi)
        scale = 1 + max_abs(choi)
        if linalg.min_eigenvalue(choi) < -CHANNEL_TOL * scale:
            raise InvalidChannelError(f"{self.name}: Choi operator is not positive semidefinite")
        marginal = linalg.partial_trace(choi, (self.dim_in, self.dim_out), 1)
        if max_abs(marginal - np.eye(self.dim_in)) > CHANNEL_TOL * scale:
            raise InvalidChannelError(f"{self.name}: Choi operator is not trace preserving")
        if choi_from_ops is not None and max_abs(choi_from_ops - choi) > CHANNEL_TOL * scale:
            raise InvalidChannelError(f"{self.name}: Kraus and Choi representations disagree")
        object.__setattr__(self, "choi", choi)

    @property
    def choi_dims(self) -> DimSpec:
        return DimSpec((self.dim_in, self.dim_out))

    def __repr__(self):
        return f"Channel({self.name!r}, {self.dim_in}->{self.dim_out})"

@dataclasses.dataclass(frozen=True, eq=False)
class BipartiteState:
    """A density matrix with its subsystem dimensions."""
    matrix: ComplexMatrix
    dims: DimSpec

    def __post_init__(self):
        dims = DimSpec.of(self.dims)
        matrix = np.asarray(self.matrix, dtype=np.complex128)
        dims.check_square(matrix)
        matrix = as_hermitian(matrix)
        if abs(np.trace(matrix).real - 1) > STATE_TOL * matrix.shape[0]:
            raise InvalidStateError(f"state trace is {np.trace(matrix).real!r}, expected 1")
        if linalg.min_eigenvalue(matrix) < -STATE_TOL * matrix.shape[0]:
            raise InvalidStateError("state is not positive semidefinite")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "dims", dims)

    def refactor(self, dims: DimSpec | typing.Sequence[int]) -> "BipartiteState":
        """Same matrix, different factorization of its space."""
        return BipartiteState(self.matrix, DimSpec.of(dims))

    def __repr__(self):
        return f"BipartiteState(dims={self.dims})"

def pure_state(vector: npt.ArrayLike, dims: DimSpec | typing.Sequence[int]) -> BipartiteState:
    v = np.asarray(vector, dtype=np.complex128).reshape(-1, 1)
    v = v / np.linalg.norm(v)
    return BipartiteState(v @ v.conj().T, DimSpec.of(dims))

#endregion

#region: Choi form and application

def tp_residual(kraus: typing.Sequence[np.ndarray]) -> float:
    """‖Σ K†K − I‖_∞."""
    total = sum(k.conj().T @ k for k in kraus)
    return linalg.operator_norm(total - np.eye(total.shape[0]))

def choi_from_kraus(kraus: typing.Sequence[npt.ArrayLike]) -> ComplexMatrix:
    """J = Σ_k (I ⊗ K_k)|Υ⟩⟨Υ|(I ⊗ K_k)†, ordered reference ⊗ output."""
    kraus = [np.asarray(k, dtype=np.complex128) for k in kraus]
    if tp_residual(kraus) > CHANNEL_TOL:
        raise InvalidChannelError("Kraus operators are not trace preserving")
    # (I ⊗ K)|Υ⟩ has entry K[b, i] at index i·d_out + b
    columns = np.stack([k.T.reshape(-1) for k in kraus], axis=1)
    return columns @ columns.conj().T

def apply_to_operator(n: Channel, x: npt.ArrayLike, dims: DimSpec | typing.Sequence[int],
                      acted: int | typing.Sequence[int]) -> tuple[ComplexMatrix, DimSpec]:
    """
    Apply `n` to the subsystem(s) `acted` of the operator `x` through ⟨Υ| x ⊗ J |Υ⟩.

    The output factors `n.dims_out` take the place of the first acted subsystem.
    """
    dims = DimSpec.of(dims)
    acted = dims.indices(acted)
    if dims.dim_of(acted) != n.dim_in:
        raise DimensionError(f"{n!r} expects input dimension {n.dim_in}, subsystems {acted} have {dims.dim_of(acted)}")
    rest = dims.complement(acted)
    order = acted + rest
    merged = [n.dim_in] + [dims[i] for i in rest]
    x = linalg.permute_systems(x, dims, order)
    joint = np.kron(x, n.choi)
    joint_dims = merged + [n.dim_in, n.dim_out]
    out = linalg.sandwich_max_entangled(joint, joint_dims, 0, len(merged))
    # out acts on rest + output; move the output to the first acted slot
    slot = sum(1 for i in rest if i < min(acted))
    current = list(range(len(rest)))
    target = current[:slot] + [len(rest)] + current[slot:]
    out_dims = [dims[i] for i in rest] + [n.dim_out]
    out = linalg.permute_systems(out, out_dims, target)
    rest_dims = [dims[i] for i in rest]
    new_dims = DimSpec(tuple(rest_dims[:slot]) + n.dims_out + tuple(rest_dims[slot:]))
    return out, new_dims

def apply_channel(n: Channel, rho: BipartiteState, acted: int | typing.Sequence[int]) -> BipartiteState:
    """N applied to subsystem(s) `acted` of `rho`."""
    out, dims = apply_to_operator(n, rho.matrix, rho.dims, acted)
    return BipartiteState(out, dims)

def apply_kraus(n: Channel, x: npt.ArrayLike) -> ComplexMatrix:
    """Σ K x K† on the whole input space."""
    if n.kraus is None:
        raise InvalidChannelError(f"{n!r} has no Kraus representation")
    x = np.asarray(x, dtype=np.complex128)
    return sum(k @ x @ k.conj().T for k in n.kraus)

def same_channel(a: Channel, b: Channel, tol: float = CHANNEL_TOL) -> bool:
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        return False
    return max_abs(a.choi - b.choi) <= tol

def compose(second: Channel, first: Channel) -> Channel:
    """second ∘ first."""
    if first.dim_out != second.dim_in:
        raise DimensionError(f"cannot compose {second!r} after {first!r}")
    name = f"{second.name}∘{first.name}"
    if first.kraus is not None and second.kraus is not None:
        kraus = tuple(l @ k for l in second.kraus for k in first.kraus)
        return Channel(first.dim_in, second.dim_out, kraus=kraus, dims_in=first.dims_in, dims_out=second.dims_out, name=name)
    choi, _ = apply_to_operator(second, first.choi, first.choi_dims, 1)
    return Channel(first.dim_in, second.dim_out, choi=choi, dims_in=first.dims_in, dims_out=second.dims_out, name=name)

def tensor(n: Channel, m: Channel) -> Channel:
    """N ⊗ M as a bipartite channel with dims_in (|A_N|, |A_M|)."""
    name = f"{n.name}⊗{m.name}"
    dims_in = (n.dim_in, m.dim_in)
    dims_out = (n.dim_out, m.dim_out)
    if n.kraus is not None and m.kraus is not None:
        kraus = tuple(np.kron(k, l) for k in n.kraus for l in m.kraus)
        return Channel(n.dim_in * m.dim_in, n.dim_out * m.dim_out, kraus=kraus, dims_in=dims_in, dims_out=dims_out, name=name)
    joint = np.kron(n.choi, m.choi)
    choi = linalg.permute_systems(joint, (n.dim_in, n.dim_out, m.dim_in, m.dim_out), (0, 2, 1, 3))
    return Channel(n.dim_in * m.dim_in, n.dim_out * m.dim_out, choi=choi, dims_in=dims_in, dims_out=dims_out, name=name)

def is_ppt_preserving(n: Channel, tol: float = 1e-8) -> bool:
    """
    Whether T_{B'} ∘ N ∘ T_B is completely positive, for N with dims_in (A, B) and
    dims_out (A', B'). Its Choi operator is N's Choi partially transposed on the
    reference copy of B and on B'.
    """
    if len(n.dims_in) != 2 or len(n.dims_out) != 2:
        raise DimensionError(f"{n!r} is not declared bipartite")
    dims = n.dims_in + n.dims_out
    composite = linalg.partial_transpose(n.choi, dims, (1, 3))
    return linalg.min_eigenvalue(composite) >= -tol * (1 + max_abs(composite))

#endregion

#region: families

def _check_probability(name: str, value: float):
    if not 0 <= value <= 1:
        raise InvalidChannelError(f"{name} must lie in [0, 1], got {value!r}")

def make_identity(d: int) -> Channel:
    return Channel(d, d, kraus=(np.eye(d, dtype=np.complex128),), name=f"identity({d})")

def weyl_operators(d: int) -> list[ComplexMatrix]:
    """The d² operators X^a Z^b, identity first."""
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            for a in range(d) for b in range(d)]

def make_depolarizing(d: int, p: float) -> Channel:
    """ρ ↦ (1 − p)ρ + p·Tr(ρ)·I/d."""
    _check_probability("p", p)
    weyl = weyl_operators(d)
    kraus = [np.sqrt(1 - p + p / d**2) * weyl[0]]
    kraus += [np.sqrt(p / d**2) * w for w in weyl[1:]]
    return Channel(d, d, kraus=tuple(kraus), name=f"depolarizing({d},{p:g})")

def make_erasure(d: int, p: float) -> Channel:
    """
    With probability p replace the input by the flag |e⟩ = |d⟩; the output space is
    the input space ⊕ span{|e⟩}, inputs embedded in the first d coordinates.
    """
    _check_probability("p", p)
    embed = np.vstack([np.eye(d), np.zeros((1, d))]).astype(np.complex128)
    kraus = [np.sqrt(1 - p) * embed]
    for i in range(d):
        k = np.zeros((d + 1, d), dtype=np.complex128)
        k[d, i] = np.sqrt(p)
        kraus.append(k)
    return Channel(d, d + 1, kraus=tuple(kraus), name=f"erasure({d},{p:g})")

def make_flagged_erasure(d: int, p: float) -> Channel:
    """
    Erasure on the output space of `make_erasure(d, ·)`: inputs in the first d
    coordinates are erased with probability p, the flag |e⟩ is left alone.
    """
    _check_probability("p", p)
    keep = np.sqrt(1 - p) * np.eye(d + 1, dtype=np.complex128)
    keep[d, d] = 1
    kraus = [keep]
    for i in range(d):
        k = np.zeros((d + 1, d + 1), dtype=np.complex128)
        k[d, i] = np.sqrt(p)
        kraus.append(k)
    return Channel(d + 1, d + 1, kraus=tuple(kraus), name=f"flagged_erasure({d},{p:g})")

def make_dephasing(p: float) -> Channel:
    """Qubit ρ ↦ (1 − p)ρ + p·diag(ρ); p = 1 is completely dephasing."""
    _check_probability("p", p)
    z = np.diag([1, -1]).astype(np.complex128)
    kraus = (np.sqrt(1 - p / 2) * np.eye(2, dtype=np.complex128), np.sqrt(p / 2) * z)
    return Channel(2, 2, kraus=kraus, name=f"dephasing({p:g})")

def make_amplitude_damping(gamma: float) -> Channel:
    _check_probability("gamma", gamma)
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=np.complex128)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=np.complex128)
    return Channel(2, 2, kraus=(k0, k1), name=f"amplitude_damping({gamma:g})")

def make_replacer(dim_in: int, state: BipartiteState) -> Channel:
    """ρ ↦ Tr(ρ)·σ."""
    w, v = linalg.eigh(state.matrix)
    kraus = []
    for weight, vec in zip(w, v.T):
        if weight <= 0:
            continue
        for i in range(dim_in):
            k = np.zeros((state.dims.total, dim_in), dtype=np.complex128)
            k[:, i] = np.sqrt(weight) * vec
            kraus.append(k)
    return Channel(dim_in, state.dims.total, kraus=tuple(kraus), dims_out=state.dims.factors, name="replacer")

def make_partial_trace(dims: typing.Sequence[int], traced: int | typing.Sequence[int]) -> Channel:
    """The channel discarding subsystem(s) `traced`."""
    dims = DimSpec.of(dims)
    traced = dims.indices(traced)
    kept = dims.complement(traced)
    d_kept = dims.dim_of(kept) if kept else 1
    kraus = []
    for j in range(dims.dim_of(traced)):
        bra = np.zeros((1, dims.dim_of(traced)))
        bra[0, j] = 1
        # I_kept ⊗ ⟨j|_traced in the (kept, traced) ordering, then back to dims' ordering
        op = np.kron(np.eye(d_kept), bra)
        order = list(kept) + list(traced)
        inverse = [order.index(i) for i in range(len(dims))]
        factors = [dims[i] for i in order]
        op = linalg.permute_vector(op.T, factors, inverse).T
        kraus.append(op.astype(np.complex128))
    return Channel(dims.total, d_kept, kraus=tuple(kraus), dims_in=dims.factors,
                   dims_out=tuple(dims[i] for i in kept) or (1,), name="partial_trace")

#endregion

#region: random instances

def haar_unitary(d: int, seed: Seed = None) -> ComplexMatrix:
    rng = _rng(seed)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))

def random_isometry(rows: int, cols: int, seed: Seed = None) -> ComplexMatrix:
    """Orthonormalized Gaussian matrix of shape (rows, cols), rows ≥ cols."""
    rng = _rng(seed)
    g = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))

def random_channel(dim_in: int, dim_out: int, env_dim: int = 2, seed: Seed = None) -> Channel:
    """Kraus operators from a random isometry C^dim_in → C^dim_out ⊗ C^env_dim."""
    if env_dim < 1:
        raise InvalidChannelError(f"env_dim must be at least 1, got {env_dim}")
    if dim_out * env_dim < dim_in:
        bumped = -(-dim_in // dim_out)
        logger.debug("random_channel: env_dim %d too small for %d->%d, using %d", env_dim, dim_in, dim_out, bumped)
        env_dim = bumped
    v = random_isometry(dim_out * env_dim, dim_in, seed)
    blocks = v.reshape(dim_out, env_dim, dim_in)
    kraus = tuple(np.ascontiguousarray(blocks[:, e, :]) for e in range(env_dim))
    return Channel(dim_in, dim_out, kraus=kraus, name=f"random({dim_in},{dim_out},{env_dim})")

def random_pure_vector(d: int, seed: Seed = None) -> ComplexMatrix:
    rng = _rng(seed)
    v = rng.normal(size=(d, 1)) + 1j * rng.normal(size=(d, 1))
    return v / np.linalg.norm(v)

def random_density(d: int, seed: Seed = None, rank: int | None = None) -> ComplexMatrix:
    """Trace of a random pure state on C^d ⊗ C^rank over the second factor."""
    rng = _rng(seed)
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real

def random_state(dims: DimSpec | typing.Sequence[int], seed: Seed = None, rank: int | None = None) -> BipartiteState:
    dims = DimSpec.of(dims)
    return BipartiteState(random_density(dims.total, seed, rank), dims)

def random_pure_state(dims: DimSpec | typing.Sequence[int], seed: Seed = None) -> BipartiteState:
    dims = DimSpec.of(dims)
    return pure_state(random_pure_vector(dims.total, seed), dims)

def random_ppt_state(dims: DimSpec | typing.Sequence[int], seed: Seed = None, terms: int | None = None) -> BipartiteState:
    """
    A random mixture of fully product states. Separable across every cut, hence PPT
    for any choice of transposed subsystems.
    """
    dims = DimSpec.of(dims)
    rng = _rng(seed)
    terms = terms or dims.total + 1
    weights = rng.dirichlet(np.ones(terms))
    rho = np.zeros((dims.total, dims.total), dtype=np.complex128)
    for weight in weights:
        rho += weight * linalg.kron(*(random_density(d, rng) for d in dims))
    return BipartiteState(rho, dims)

def random_ppt_prime_operator(dims: DimSpec | typing.Sequence[int], cut: int | typing.Sequence[int] = -1,
                              seed: Seed = None) -> ComplexMatrix:
    """A random PSD σ rescaled so that ‖T_B σ‖₁ = 1, the boundary of PPT′."""
    dims = DimSpec.of(dims)
    cut = dims.indices(cut if cut != -1 else len(dims) - 1)
    sigma = random_density(dims.total, seed)
    return sigma / linalg.trace_norm(linalg.partial_transpose(sigma, dims, cut))

def random_one_way_locc(dims_in: tuple[int, int], dims_out: tuple[int, int], branches: int = 2,
                        seed: Seed = None) -> Channel:
    """
    A channel Σ_x F^x ⊗ G^x: an instrument {F^x} on Alice's side, the outcome x sent to
    Bob, who applies the channel G^x.

    With at least as many branches as Alice's input dimension the instrument measures a
    random rank-one POVM and prepares a random pure state per outcome; with fewer it
    splits a random isometry into branches. Each G^x is a Haar-random unitary when
    Bob's dimensions agree, a random isometric channel otherwise.
    """
    if branches < 1:
        raise InvalidChannelError(f"branches must be at least 1, got {branches}")
    rng = _rng(seed)
    a_in, b_in = dims_in
    a_out, b_out = dims_out

    if branches >= a_in:
        povm = random_isometry(branches, a_in, rng)
        instrument = [[random_pure_vector(a_out, rng) @ povm[x:x + 1, :]] for x in range(branches)]
    else:
        env = -(-a_in // (branches * a_out))
        v = random_isometry(branches * env * a_out, a_in, rng).reshape(branches, env, a_out, a_in)
        instrument = [[np.ascontiguousarray(v[x, e]) for e in range(env)] for x in range(branches)]

    kraus = []
    for x in range(branches):
        if b_in == b_out:
            bob = (haar_unitary(b_in, rng),)
        else:
            bob = random_channel(b_in, b_out, 1, rng).kraus
        kraus += [np.kron(k, l) for k in instrument[x] for l in bob]
    return Channel(a_in * b_in, a_out * b_out, kraus=tuple(kraus), dims_in=(a_in, b_in), dims_out=(a_out, b_out),
                   name=f"locc({branches})")

#endregion
