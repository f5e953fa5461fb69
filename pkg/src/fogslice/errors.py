"""Exception hierarchy shared across the package."""


class FogSliceError(Exception):
    """Base class for all package errors."""


class ScenarioError(FogSliceError, ValueError):
    """Scenario file could not be parsed or violates the schema.

    ``field`` names the offending key path (e.g. ``base_stations[1].per_service``)
    and ``line`` carries the 1-based source line when the parser knows it.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ZeroRate(FogSliceError, ValueError):
    """Link carries no data: bandwidth times spectral efficiency is zero."""


class UnstableQueue(FogSliceError, ValueError):
    """Service rate does not exceed arrival rate, so the queue never drains."""


class DomainError(FogSliceError, ValueError):
    """Point lies on or outside the open domain of a barrier-smoothed function."""


class Infeasible(FogSliceError):
    """No strictly feasible allocation could be constructed."""


class NotConverged(FogSliceError):
    """Iteration limit reached before the stopping rule was met."""
