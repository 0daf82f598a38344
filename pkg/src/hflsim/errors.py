"""Exception hierarchy.

Every domain failure derives from :class:`HflError` so the CLI can map it to
exit code 1 without catching unrelated bugs.
"""


class HflError(ValueError):
    """Base class for domain errors raised by hflsim."""


class DegenerateInputError(HflError):
    pass


class EmptyMergeError(HflError):
    pass


class ImageFormatError(HflError):
    pass


class DegenerateDistributionError(HflError):
    pass


class ConsistencyError(HflError):
    pass


class StabilityError(HflError):
    pass


class ObjectiveOverflowError(HflError):
    def __init__(self, tau1: int, tau2: int):
        super().__init__(f"convergence objective overflows at tau1={tau1}, tau2={tau2}")
        self.tau1 = tau1
        self.tau2 = tau2


class ConfigError(HflError):
    pass
