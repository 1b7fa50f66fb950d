class GHMError(Exception):
    exit_code = 1


# --- Configuration (exit 2) ---

class ConfigError(GHMError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, path: str, message: str, line: int = None, field: str = None):
        self.path = path
        self.line = line
        self.field = field
        where = path
        if line is not None:
            where += f":{line}"
        if field is not None:
            where += f" [{field}]"
        super().__init__(f"{where}: {message}")


class ValidationError(ConfigError):
    def __init__(self, violations: list):
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"Scenario failed validation:\n{lines}")


# --- Preconditions (exit 3) ---

class PreconditionError(GHMError, ValueError):
    exit_code = 3


class DegenerateRect(PreconditionError):
    pass


class DisconnectedDomain(PreconditionError):
    pass


class DisconnectedNetwork(PreconditionError):
    pass


class NoBoundaryPath(PreconditionError):
    pass


class NotNeighbors(PreconditionError):
    pass


class DiscontinuousOnCycle(PreconditionError):
    def __init__(self, edge: tuple, values: tuple):
        self.edge = edge
        super().__init__(f"State is discontinuous on cycle edge {edge} (values {values})")


class DiscontinuousState(PreconditionError):
    def __init__(self, edge: tuple):
        self.edge = edge
        super().__init__(f"State is discontinuous across edge {edge}")


class NotACycle(PreconditionError):
    pass


class InsufficientTrace(PreconditionError):
    pass


class NotConverged(PreconditionError):
    pass


class BadCorridor(PreconditionError):
    pass


class SparseBand(PreconditionError):
    pass


class ContinuityRepairFailed(PreconditionError):
    pass


class InsufficientCorridorLength(PreconditionError):
    def __init__(self, edge: int, required: float, available: float):
        self.edge = edge
        self.required = required
        self.available = available
        super().__init__(
            f"Skeleton edge {edge} needs {required:.3f} of free corridor, only {available:.3f} available"
        )


class BasisMismatch(PreconditionError):
    pass


class OverlappingSupports(PreconditionError):
    pass


class NoInitialDefect(PreconditionError):
    pass


class TorsionDetected(PreconditionError):
    def __init__(self, factors: list):
        self.factors = list(factors)
        super().__init__(f"H1 has torsion, invariant factors {self.factors}")


# --- Internal consistency (exit 4) ---

class ConsistencyError(GHMError):
    exit_code = 4


class NonIntegralDegree(ConsistencyError):
    pass
