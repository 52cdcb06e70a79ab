"""Exception types shared across the fatloc structures and harness."""


class FatLocError(Exception):
    """Base class for all fatloc errors."""


# geometry
class DegenerateShape(FatLocError):
    pass


class CoincidentPoints(FatLocError):
    pass


# quadtree
class OutOfBounds(FatLocError):
    pass


class DuplicatePoint(FatLocError):
    pass


class UnknownPoint(FatLocError):
    pass


class PrecisionLimit(FatLocError):
    """Two distinct points are too close to separate within the depth budget."""


# edge oracle
class UnknownEdge(FatLocError):
    pass


# marked ancestor
class UnknownNode(FatLocError):
    pass


class RemoveNonLeaf(FatLocError):
    pass


class RemoveMarked(FatLocError):
    pass


# locate1d / locate2d
class OverlappingInput(FatLocError):
    pass


class NotSimilar(FatLocError):
    pass


class OverlapViolation(FatLocError):
    pass


class NotThickEnough(FatLocError):
    pass


class UnknownHandle(FatLocError):
    pass


# harness
class ParseError(FatLocError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(FatLocError):
    pass


class MismatchError(FatLocError):
    def __init__(self, op_index, expected, got):
        super().__init__(f"op {op_index}: expected {expected!r}, got {got!r}")
        self.op_index = op_index
        self.expected = expected
        self.got = got


class PlacementFailure(FatLocError):
    pass
