"""Exception types shared across the package."""


class CdsError(Exception):
    """Base class for all package errors."""


class GraphError(CdsError, ValueError):
    """Invalid affinity data, constraint set, or graph serialization."""


class SolverFault(CdsError, RuntimeError):
    """Replicator dynamics hit an invalid numerical state (misconfigured payoff)."""


class ExtractionError(CdsError, RuntimeError):
    """Peel-off extraction reached an internally inconsistent state."""


class PipelineError(CdsError, ValueError):
    """Segmentation / co-segmentation input or workflow problem."""
