"""Exception hierarchy.

Every error raised by the package derives from :class:`WvstackError` and
belongs to one of three categories used by the command-line front end to
pick an exit status: usage problems, bad or insufficient data, and
numerical failures.
"""


class WvstackError(Exception):
    exit_code = 1


class UsageError(WvstackError):
    exit_code = 2


class DataError(WvstackError):
    exit_code = 3


class NumericalError(WvstackError):
    exit_code = 4


# catalog
class MalformedManifest(DataError):
    pass


class MissingField(DataError):
    def __init__(self, field, context=""):
        self.field = field
        msg = f"missing field {field!r}"
        if context:
            msg += f" in {context}"
        super().__init__(msg)


class InvalidFootprint(DataError):
    pass


class InvalidPolygon(UsageError):
    pass


# geometry
class TimeOutOfRange(DataError):
    pass


class NoConvergence(NumericalError):
    pass


class NoIntersection(NumericalError):
    pass


class GridDisjoint(DataError):
    pass


class GridMismatch(DataError):
    pass


# coregistration
class FlatChip(DataError):
    pass


class PeakAtBorder(NumericalError):
    pass


class InsufficientOverlap(DataError):
    pass


class AllWindowsRejected(DataError):
    pass


class DisconnectedNetwork(DataError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        super().__init__(f"offset network has {len(self.components)} components: {self.components}")


class SingularSystem(NumericalError):
    pass


class InvalidIncidence(UsageError):
    pass


# stack
class StackTooSmall(DataError):
    pass


class MemberNotInStack(UsageError):
    pass


# insar
class EmptyStack(DataError):
    pass


class DisconnectedEpochs(DataError):
    pass


class UnwrapFailure(NumericalError):
    pass


# simulator
class InvalidSpec(UsageError):
    pass
