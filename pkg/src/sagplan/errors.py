class SagError(Exception):
    """Base class for every error raised by sagplan."""


class SizeError(SagError, ValueError):
    pass


class BijectionError(SagError, ValueError):
    pass


class ConflictError(SagError):
    """A step breaks one of the collision rules.

    ``rule`` is one of ``adjacency``, ``stale``, ``duplicate``,
    ``injectivity`` or ``edge``.
    """

    def __init__(self, rule, robot=None, message=None):
        self.rule = rule
        self.robot = robot
        super().__init__(message or f"{rule} conflict (robot {robot})")


class InfeasibleError(SagError):
    pass


class DisjointnessError(SagError, ValueError):
    pass


class GroupTooLarge(SagError, ValueError):
    pass


class SizeMismatch(SagError, ValueError):
    pass


class OverlapError(SagError, ValueError):
    pass


class BranchError(SagError, ValueError):
    pass


class CycleError(SagError):
    pass


class InstanceError(SagError, ValueError):
    pass
