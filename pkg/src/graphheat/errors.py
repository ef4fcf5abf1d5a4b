"""Exception hierarchy.

Data errors (bad graphs, bad functions) derive from :class:`GraphHeatDataError`,
numerical failures from :class:`NumericalFailure`. The CLI maps the two
families onto distinct exit codes.
"""


class GraphHeatError(Exception):
    """Base class for all package errors."""


class GraphHeatDataError(GraphHeatError, ValueError):
    pass


class DuplicateEdge(GraphHeatDataError):
    pass


class SelfLoop(GraphHeatDataError):
    pass


class NegativeWeight(GraphHeatDataError):
    pass


class IsolatedVertex(GraphHeatDataError):
    pass


class DisconnectedGraph(GraphHeatDataError):
    pass


class UnknownVertex(GraphHeatDataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class MissingValue(GraphHeatDataError):
    """A function lacks a value on a vertex the evaluation depends on."""


class NonpositiveM(GraphHeatDataError):
    pass


class BoundaryMismatch(GraphHeatDataError):
    pass


class GridMismatch(GraphHeatDataError):
    pass


class WindowEmpty(GraphHeatDataError):
    pass


class StabilityViolation(GraphHeatDataError):
    """Explicit heat step requested with h > 1."""


class NumericalFailure(GraphHeatError, RuntimeError):
    pass


class LinearSolveFailure(NumericalFailure):
    pass


class NewtonDivergence(NumericalFailure):
    pass


class ToleranceFailure(NumericalFailure):
    pass


class PositivityLoss(NumericalFailure):
    pass
