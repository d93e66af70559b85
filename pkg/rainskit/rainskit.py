import dataclasses
import enum
import math
import typing

import numpy as np
import numpy.typing as npt

class RainskitError(Exception): pass
class DimensionError(RainskitError, ValueError): pass
class DimensionGateError(DimensionError): pass
class NotHermitianError(RainskitError, ValueError): pass
class NotPositiveError(RainskitError, ValueError): pass
class InvalidChannelError(RainskitError, ValueError): pass
class InvalidStateError(RainskitError, ValueError): pass
class IllPosedProblemError(RainskitError, ValueError): pass
class InputDecodeError(RainskitError, ValueError): pass
class PropertyViolation(RainskitError, AssertionError): pass

class SolverError(RainskitError, RuntimeError):
    """A measure's SDP did not finish with an optimal status."""
    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution

ComplexMatrix = npt.NDArray[np.complex128]
RealMatrix = npt.NDArray[np.float64]

HERMITIAN_TOL = 1e-12
SYMMETRIZE_TOL = 1e-10
SDP_TOL = 1e-8
ASSERT_TOL = 1e-6
PSD_TOL = 1e-8
SUPPORT_TOL = 1e-9
STATE_TOL = 1e-10

class Status(enum.Enum):
    Optimal = "optimal"
    PrimalInfeasibleCertificate = "primal_infeasible"
    DualInfeasibleCertificate = "dual_infeasible"
    NumericalTrouble = "numerical_trouble"

class SepConeMode(enum.Enum):
    ExactSmallDims = "exact"
    PptRelaxation = "ppt"

    @property
    def exactness_flag(self) -> bool:
        return self is SepConeMode.ExactSmallDims

@dataclasses.dataclass(frozen=True)
class DimSpec:
    """Ordered subsystem dimensions of a square operator."""
    factors: tuple[int, ...]

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        if not factors:
            raise DimensionError(f"{self!r}: at least one factor is required")
        if any(f < 1 for f in factors):
            raise DimensionError(f"{self!r}: factors must be positive integers")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, dims: "DimSpec | typing.Iterable[int]") -> "DimSpec":
        if isinstance(dims, DimSpec):
            return dims
        return cls(tuple(dims))

    @property
    def total(self) -> int:
        return math.prod(self.factors)

    def __len__(self):
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def __getitem__(self, index: int) -> int:
        return self.factors[index]

    def __str__(self):
        return "x".join(str(f) for f in self.factors)

    def indices(self, systems: "int | typing.Iterable[int]") -> tuple[int, ...]:
        """Normalize one or several subsystem indices, rejecting bad ones."""
        if isinstance(systems, (int, np.integer)):
            systems = (systems,)
        systems = tuple(int(s) for s in systems)
        for s in systems:
            if not 0 <= s < len(self.factors):
                raise DimensionError(f"subsystem index {s} out of range for dims {self}")
        if len(set(systems)) != len(systems):
            raise DimensionError(f"repeated subsystem index in {systems}")
        return systems

    def complement(self, systems: "int | typing.Iterable[int]") -> tuple[int, ...]:
        chosen = set(self.indices(systems))
        return tuple(i for i in range(len(self.factors)) if i not in chosen)

    def dim_of(self, systems: "int | typing.Iterable[int]") -> int:
        return math.prod(self.factors[i] for i in self.indices(systems))

    def without(self, systems: "int | typing.Iterable[int]") -> "DimSpec":
        kept = self.complement(systems)
        return DimSpec(tuple(self.factors[i] for i in kept) or (1,))

    def check_square(self, x: np.ndarray) -> None:
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {x.shape}")
        if x.shape[0] != self.total:
            raise DimensionError(f"matrix side {x.shape[0]} does not match dims {self} (product {self.total})")

def max_abs(x: np.ndarray) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0

def hermitian_defect(x: np.ndarray) -> float:
    return max_abs(x - x.conj().T)

def is_hermitian(x: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        return False
    return hermitian_defect(x) <= tol * (1 + max_abs(x))

def as_hermitian(x: npt.ArrayLike, tol: float = SYMMETRIZE_TOL) -> ComplexMatrix:
    """
    Ingest a matrix that should be Hermitian.

    Small defects are symmetrized away as (M + M†)/2, larger ones raise `NotHermitianError`.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {x.shape}")
    defect = hermitian_defect(x)
    if defect > tol * (1 + max_abs(x)):
        raise NotHermitianError(f"matrix is not Hermitian (defect {defect:.3e})")
    return (x + x.conj().T) / 2
