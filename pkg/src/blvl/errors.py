"""Exception types shared across the toolkit."""


class BlvlError(Exception):
    """Base class for all toolkit errors."""


class ParseError(BlvlError):
    """Instance or model file is malformed (bad literal, duplicate key,
    missing field, or inconsistent dimensions)."""


class InfeasibleProblemError(BlvlError):
    """The problem has no feasible point."""


class UnboundedProblemError(BlvlError):
    """The problem's objective is unbounded (or the lower level admits no
    optimal reply anywhere because it is unbounded)."""


class UnboundedPolyhedronError(BlvlError):
    """A polyhedron that must be bounded for vertex enumeration has a
    recession direction."""


class DimensionDeficientError(BlvlError):
    """An inequality system has fewer rows than its ambient dimension, so it
    cannot have a vertex."""


class EnumerationLimitError(BlvlError):
    """Binary-pattern enumeration was requested beyond the configured limit."""


class GenerationError(BlvlError):
    """The random-instance generator exhausted its retry budget."""


class SolverInternalError(BlvlError):
    """An exact internal certificate failed to verify.  This always signals a
    bug in the solver, never a property of the input."""
