"""Exception types raised across the package."""

import numpy as np


class BlsError(Exception):
    """Base class for all errors raised by incbls."""


class DimensionError(BlsError, ValueError):
    pass


class SingularGram(BlsError, np.linalg.LinAlgError):
    """A^T A + lambda*I could not be factorized as positive definite."""


class NotPositiveDefinite(BlsError, np.linalg.LinAlgError):
    pass


class SingularSystem(BlsError, np.linalg.LinAlgError):
    pass


class ConvergenceError(BlsError, np.linalg.LinAlgError):
    pass


class StrategyMismatch(BlsError):
    """A forced B strategy is inconsistent with the measured C residual."""


class ConfigError(BlsError, ValueError):
    pass


class BadMagic(BlsError, ValueError):
    pass


class TruncatedFile(BlsError, ValueError):
    pass


class CountMismatch(BlsError, ValueError):
    pass


class LabelOutOfRange(BlsError, ValueError):
    pass
