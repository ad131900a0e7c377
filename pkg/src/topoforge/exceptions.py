class TopoforgeError(Exception):
    """Base class for errors raised by this package."""


class ModelError(TopoforgeError, ValueError):
    """Malformed topology, state or netlist."""


class SimulationError(TopoforgeError):
    """A design could not be simulated; callers treat it as infeasible."""

    reason = "SimulationError"


class DisconnectedError(SimulationError):
    reason = "Disconnected"


class SingularSystemError(SimulationError):
    reason = "Singular"


class NonFiniteError(SimulationError):
    reason = "NonFinite"


class KCLViolationError(SimulationError):
    reason = "KCL"


class OptimizationError(TopoforgeError):
    pass


class SearchError(TopoforgeError):
    pass


class SimplificationError(TopoforgeError, ValueError):
    pass
