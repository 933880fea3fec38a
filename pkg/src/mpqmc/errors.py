"""Exception types raised across the package."""


class MPQMCError(Exception):
    """Base class for all package errors."""

    code = "runtime"


class ConfigError(MPQMCError, ValueError):
    code = "config"


# driving sequences
class SequenceExhausted(MPQMCError):
    pass


class UnsupportedRegisterSize(MPQMCError, ValueError):
    pass


class InvalidWidth(MPQMCError, ValueError):
    pass


# discrepancy
class TooLarge(MPQMCError, ValueError):
    pass


# targets
class NotSPD(MPQMCError, ValueError):
    pass


class DegenerateDesign(MPQMCError, ValueError):
    pass


class SolverDiverged(MPQMCError, ArithmeticError):
    pass


# proposals
class MetricNotSPD(MPQMCError, ValueError):
    pass


class DegenerateTuple(MPQMCError, ValueError):
    pass


# finite-state chain
class AllZeroMass(MPQMCError):
    pass


class InvalidWeights(MPQMCError, ValueError):
    pass


# samplers
class ResampleBudgetExceeded(MPQMCError):
    pass


# diagnostics
class NoReference(MPQMCError, ValueError):
    pass


class NonPositiveMetric(MPQMCError, ValueError):
    pass


class WrongMode(MPQMCError, ValueError):
    pass


class TooFewSamples(MPQMCError, ValueError):
    pass
