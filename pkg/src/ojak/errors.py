"""Exception taxonomy for the ojak package.

Everything raised on purpose derives from OjakError so callers can catch one
base class. ConfigError is kept separate in spirit: the CLI maps it to exit
code 2 while every other OjakError maps to exit code 1.
"""


class OjakError(Exception):
    pass


class RankDeficient(OjakError):
    """A pivot column collapsed during orthonormalization."""


class NotSymmetric(OjakError):
    pass


class NoConvergence(OjakError):
    """An iterative decomposition hit its sweep limit."""


class InvalidP(OjakError):
    pass


class InvalidK(OjakError):
    pass


class NotOrthonormal(OjakError):
    pass


class Singular(OjakError):
    """A k x k system was singular or too ill-conditioned to trust."""


class BadWeights(OjakError):
    pass


class DimensionMismatch(OjakError):
    pass


class ZeroGap(OjakError):
    """The eigenvalue gap at position k vanished."""


class InvalidRank(OjakError):
    pass


class InvalidShape(OjakError):
    pass


class InvalidDelta(OjakError):
    pass


class AssumptionViolated(OjakError):
    """A bound was requested under conditions its derivation does not cover."""


class PreconditionFailed(OjakError):
    pass


class TooLarge(OjakError):
    pass


class UnsupportedDistribution(OjakError):
    pass


class ConfigError(OjakError):
    """Bad or unresolvable configuration. The CLI exits 2 on this."""
