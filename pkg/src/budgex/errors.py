"""Exception hierarchy shared across the planner."""


class BudgexError(Exception):
    """Base class for all planner errors."""


class GraphError(BudgexError, ValueError):
    """Invalid exchange-graph input."""


class DuplicateEdge(GraphError):
    pass


class IntraRobotEdge(GraphError):
    pass


class NonpositiveWeight(GraphError):
    pass


class ProbabilityOutOfRange(GraphError):
    pass


class DanglingVertexId(GraphError):
    pass


class InvalidVertexId(GraphError):
    pass


class InvalidEdgeId(GraphError):
    pass


class InfeasibleDegree(GraphError):
    pass


class NotBipartite(BudgexError, ValueError):
    pass


class PoseGraphError(BudgexError, ValueError):
    pass


class DisconnectedInit(PoseGraphError):
    """The pose graph without candidate edges is not connected."""


class SingularCovariance(PoseGraphError):
    pass


class ParseError(PoseGraphError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FactorizationFailure(BudgexError, ArithmeticError):
    pass


class InstanceTooLarge(BudgexError, ValueError):
    pass


class Infeasible(BudgexError):
    pass


class IterationLimit(BudgexError):
    pass
