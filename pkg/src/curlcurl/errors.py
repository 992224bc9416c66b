"""Exception types raised by the library."""


class CurlCurlError(Exception):
    """Base class for all library errors."""


class InvertedCell(CurlCurlError):
    """A tetrahedron has non-positive signed volume."""


class NonConforming(CurlCurlError):
    """A face is shared by more than two tetrahedra."""


class UnlabeledBoundary(CurlCurlError):
    """A topological boundary face carries no Dirichlet/Neumann label."""


class ClosureOverflow(CurlCurlError):
    """Recursive bisection closure exceeded the configured depth."""


class ParseError(CurlCurlError):
    """Malformed MEDIT file; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnmappedReference(CurlCurlError):
    """A triangle reference integer has no entry in the label table."""


class UnsupportedDegree(CurlCurlError):
    """Polynomial degree above the compiled cap."""


class UnsupportedOrder(CurlCurlError):
    """Quadrature order above the compiled cap."""


class IncompatibleQuery(CurlCurlError):
    """Requested derivative quantity does not exist for this family."""


class SingularSystem(CurlCurlError):
    """Global saddle-point factorization failed."""


class CompatibilityViolation(CurlCurlError):
    """Interior-edge divergence datum has a nonzero mean."""


class SingularPatchSystem(CurlCurlError):
    """Patch KKT system is singular (constraint bookkeeping bug)."""


class DegreeMismatch(CurlCurlError):
    """Patch fluxes were solved at inconsistent polynomial degrees."""


class EigenFailure(CurlCurlError):
    """Patch Poincare eigensolve failed to produce a positive eigenvalue."""


class BadAngle(CurlCurlError):
    """Unsupported opening angle for the L-type domain."""


class TraceCheckFailure(CurlCurlError):
    """Frozen polynomial solution violates the tangential-trace condition."""
