"""
Domain exceptions raised by the numerical backend.
Every message names the precondition that was violated; the CLI maps any
MagnonError to exit code 1.
"""
from typing import Any


class MagnonError(Exception):
    """Base class for all domain errors."""


class InvalidRegionError(MagnonError, ValueError):
    """Region parameters out of range (N <= 0, radius <= 0) or wrong region kind."""


class DenseCapExceededError(MagnonError):
    """Dense assembly requested for a region above the configured site cap."""


class NotHermitianError(MagnonError, ValueError):
    """Matrix input violates conjugate-transpose symmetry beyond tolerance."""


class EigenConvergenceError(MagnonError):
    """Jacobi sweeps exhausted before the off-diagonal norm reached its threshold."""


class IrrationalFluxError(MagnonError, ValueError):
    """Operation needs a rational flux p/q (Bloch matrices, band structure)."""


class TorusShapeError(MagnonError, ValueError):
    """Torus size incompatible with the magnetic period (q must divide L1)."""


class OutsideConvergenceRegionError(MagnonError, ValueError):
    """Neumann series requested at |E| <= 3, where it is not guaranteed to converge."""


class IterationCapError(MagnonError):
    """Neumann series did not reach its tolerance within the term cap."""


class RegionTooSmallError(MagnonError):
    """Truncation estimate r^-d exceeds the accepted tolerance."""


class DecayFitError(MagnonError):
    """Fewer than three hop shells carry amplitude above the fit floor."""


class DefectConstructionError(MagnonError):
    """No Hermitian two-site defect solves the forcing equation for the given response."""


class SecularImaginaryError(MagnonError):
    """Secular determinant has an imaginary part beyond tolerance at real energy."""


class SecularNotZeroError(MagnonError):
    """Bound-state reconstruction requested at an energy that is not a secular root."""


class DegenerateDefectError(MagnonError):
    """Both singular values of the secular matrix vanish; the kernel vector is ambiguous."""


class IncompatibleDefectError(MagnonError, ValueError):
    """Interlayer coupling K and defect matrix M do not commute."""


class ForcingChannelError(MagnonError, ValueError):
    """Bilayer forcing has a component in the second hybrid channel."""


class EnergyPreconditionError(MagnonError, ValueError):
    """Energy lies inside (or too close to) the excluded band interval."""


class CurveError(MagnonError):
    """Continuation failure; carries the last accepted sample."""

    def __init__(self, message: str, last_sample: Any = None) -> None:
        super().__init__(message)
        self.last_sample = last_sample


class CurveLostError(CurveError):
    """No sign change found near the previous energy after the halving limit."""


class BandEdgeError(CurveError):
    """Tracked root left the allowed energy region (margin to the band edge violated)."""


class SampleRejectedError(CurveError):
    """A tracked root whose bound state fails the residual or decay-rate check."""


class EmptyDataError(MagnonError, ValueError):
    """Nothing to render."""
