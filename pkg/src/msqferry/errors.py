"""Exception hierarchy shared by all msqferry modules."""


class MSQError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(MSQError):
    """Invalid user input: files, scenarios, flags."""


# geometry
class GeometryError(MSQError):
    pass


class NonEquilateral(GeometryError):
    pass


class OverlappingFaces(GeometryError):
    pass


class DanglingVertex(GeometryError):
    pass


class NotALeaf(GeometryError):
    pass


class FaceNotFound(GeometryError):
    pass


class TargetTooSmall(GeometryError):
    pass


class EmptyNetwork(GeometryError):
    pass


# cycles / routing
class UnknownEdge(MSQError):
    pass


class RoutingError(MSQError):
    pass


class Unreachable(RoutingError):
    pass


class SameNode(RoutingError):
    pass


# queueing
class QueueingError(MSQError):
    pass


class Unstable(QueueingError):
    pass


class NoPositiveWeights(QueueingError):
    pass


class NonConvergence(QueueingError):
    pass


# simulation
class SimError(MSQError):
    pass


class UnstableConfig(SimError, ConfigError):
    pass


class ScriptReferencesUnknownEntity(SimError, ConfigError):
    pass


class UnknownEntity(SimError):
    pass


class AlreadyFailed(SimError):
    pass


class NotDivided(SimError):
    pass


class NoTrigger(SimError):
    pass


class NotUnified(SimError):
    pass


class NodesStillInactive(SimError):
    pass


class FaceNotServed(SimError):
    """Runtime operation on a face whose cycles are not currently active."""
