"""Exception types shared across the package.

Everything derives from ChromaLocusError so callers can catch broadly.
Validation failures double as ValueError to stay friendly to plain
``except ValueError`` call sites.
"""

from __future__ import annotations


class ChromaLocusError(Exception):
    """Base class for all package errors."""


class SensorDataError(ChromaLocusError, ValueError):
    """Malformed or unusable sensor / density data (parse and validation)."""


class DegenerateSensorError(SensorDataError):
    """Sensor whose channels do not span the full response space, or that
    vanishes somewhere inside its own support."""


class GridMismatchError(ChromaLocusError, ValueError):
    """Wavelength grids that cannot be reconciled by resampling."""


class DegenerateLocusError(ChromaLocusError, ValueError):
    """Locus too flat (collinear) or too short for planar geometry."""


class LiftAmbiguousError(ChromaLocusError, ValueError):
    """Angle lift requested around a center that sits on or next to the curve."""


class PreimageSplitError(ChromaLocusError):
    """Half-plane preimage came back as more than one cyclic run.

    For a convex locus this cannot happen, so hitting it flags an upstream
    misclassification.  ``runs`` holds the offending index runs.
    """

    def __init__(self, message: str, runs: list[tuple[int, int]]):
        super().__init__(message)
        self.runs = runs


class NotConvexError(ChromaLocusError, ValueError):
    """Operation that needs a (piecewise) convex locus got something else."""


class ExteriorTargetError(ChromaLocusError):
    """Inversion target outside the closed color triangle."""

    def __init__(self, message: str, distance: float):
        super().__init__(message)
        self.distance = float(distance)


class BoundaryTargetError(ChromaLocusError):
    """Inversion target too close to the triangle boundary for a finite
    solve; carries the nearest boundary parametrization instead."""

    def __init__(self, message: str, nearest: dict):
        super().__init__(message)
        self.nearest = nearest


class NoConvergenceError(ChromaLocusError):
    """Continuation solve exhausted its iteration/fallback budget."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


class ResolutionExceededError(ChromaLocusError, ValueError):
    """Requested sharpness finer than the wavelength grid can represent."""
