"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class QwalkError(Exception):
    """Base class for package errors."""


class ConfigError(QwalkError, ValueError):
    """Invalid parameters, geometry, or configuration document."""


class GeometryMismatch(ConfigError):
    """State, protocol, or boundary are incompatible with each other."""


class NumericalFailure(QwalkError, RuntimeError):
    """A numerical tolerance was breached."""


class SizeCapExceeded(NumericalFailure):
    """A dense construction would exceed the configured basis-size cap."""


class NonUnitary(NumericalFailure):
    """An operator expected to be unitary is not."""


class GaplessPoint(NumericalFailure):
    """The quasi-energy gap closes, so the Bloch vector is undefined."""


class GaplessBand(NumericalFailure):
    """A band grid contains gapless points where an invariant is requested."""


class NonPlanar(NumericalFailure):
    """Bloch vectors do not lie in the plane orthogonal to the chiral axis."""


class SymmetryBroken(NumericalFailure):
    """A bound-state subspace is not invariant under the chiral operator."""


class NoBoundState(QwalkError):
    """No normalizable bound state exists for the requested parameters."""


class OnCriticalLine(QwalkError):
    """Parameters sit on a phase boundary where the invariant is undefined."""
