"""Exception and warning types shared across the package."""


class KSSError(Exception):
    """Base class for all errors raised by kss3d."""


class DegenerateConfiguration(KSSError):
    """All landmarks coincide, so the configuration has no shape."""


class AntipodalShapes(KSSError):
    """Two shapes are (nearly) antipodal; the shortest geodesic is not unique."""


class DegenerateProjection(KSSError):
    """A 3D shape collapses to (nearly) a point under the projection."""


class PrefixSumDegenerate(KSSError):
    """A prefix sum of barycentric weights vanishes.

    Attributes:
        index: zero-based position of the first offending prefix.
    """

    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(
            f"prefix sum of weights up to index {index} is {value:.3g} "
            "(must be nonzero)")


class ZeroSum(KSSError):
    """Weights sum to zero and cannot be normalized."""


class NoConvergence(KSSError):
    """An iterative method exhausted its iteration budget."""


class AllRestartsFailed(KSSError):
    """Every solver restart failed at initialization."""


class DegenerateTarget(KSSError):
    """Camera fit target has centered rank below 2."""


class InvalidBasis(KSSError):
    """Basis shapes are duplicated, singular or inconsistent."""


class NonUniqueAlignment(UserWarning):
    """The optimal rotation between two pre-shapes is not unique."""


class StalledStep(UserWarning):
    """A line search found no decreasing step."""


class RankDeficientCoefficients(UserWarning):
    """The ASM coefficient normal equations are singular."""
