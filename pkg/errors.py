"""Exceptions raised across rpkit.

Every numerical check that can fail raises a subclass of ``RPKitError`` so the
CLI can turn it into a failed report entry instead of a traceback.
"""

from typing import Optional


class RPKitError(Exception):
    """Base class for all rpkit errors"""


class DimensionMismatch(RPKitError, ValueError):
    """Operand shapes do not compose"""


class NotHermitian(RPKitError):
    pass


class NotPSD(RPKitError):
    pass


class ZeroVector(RPKitError):
    pass


class NotProjection(RPKitError):
    pass


class NotReflectionPositive(RPKitError):
    """An operator, state or projection fails reflection positivity"""


class NotHermitianAssembly(RPKitError):
    """The assembled Hamiltonian Θ(h)⊗I + I⊗h − ΣΘ(O)⊗O is not Hermitian"""


class LinearDependence(RPKitError):
    pass


class NotSymmetric(RPKitError):
    """A Kraus family does not define a symmetric CP map"""


class NoConvergence(RPKitError):
    def __init__(self, max_iters: int, residual: float):
        self.max_iters = max_iters
        self.residual = residual
        super().__init__(f"no convergence after {max_iters} iterations (last residual {residual:.3e})")


class NonIntegerBlock(RPKitError):
    pass


class InteractionAlgebraMismatch(RPKitError):
    """Generated contraction algebra differs from the double local commutant"""


class ZeroPF(RPKitError):
    """The ground projection annihilates the maximally entangled vector"""


class NotGroundState(RPKitError):
    pass


class FrustrationDetected(RPKitError):
    pass


class NotAFieldOperator(RPKitError):
    def __init__(self, clause: str, residual: float):
        self.clause = clause
        self.residual = residual
        super().__init__(f"not a field operator: {clause} (residual {residual:.3e})")


class CommutationFailure(RPKitError):
    pass


class TooLarge(RPKitError):
    pass


class Inadmissible(RPKitError):
    pass


class ParseError(RPKitError):
    def __init__(self, path: str, message: str, offset: Optional[int] = None):
        self.path = path
        self.offset = offset
        where = f"{path}" if offset is None else f"{path} (offset {offset})"
        super().__init__(f"{where}: {message}")


class GaplessWarning(UserWarning):
    """Spectral gap above the ground cluster is too small to trust the verdict"""


class NonFiniteEntry(RPKitError, ValueError):
    pass


class IsomorphismFailure(RPKitError):
    def __init__(self, clause: str, residual: float):
        self.clause = clause
        self.residual = residual
        super().__init__(f"field algebra presentations disagree: {clause} (residual {residual:.3e})")
