"""Exception types raised by the solver."""


class VRSWError(Exception):
    """Base class for all package errors."""


class ConfigError(VRSWError):
    """Invalid user configuration (mesh parameters, run config, units)."""


class MeshError(VRSWError):
    """Geometric or topological defect in a mesh."""


class RefinementError(MeshError):
    """r-adaptive relaxation produced an invalid mesh."""

    def __init__(self, message, edge=None):
        super().__init__(message)
        self.edge = edge


class StateError(VRSWError):
    """State outside the admissible set (nonpositive depth, non-finite values)."""


class SolverError(VRSWError):
    """Linear or fixed-point solve failed to converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DiagnosticsError(VRSWError):
    """A diagnostic is undefined for the given input."""
