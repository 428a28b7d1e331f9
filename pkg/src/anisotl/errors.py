"""Exception types shared across the toolkit."""


class AnisoError(Exception):
    """Base class for all toolkit errors."""


class Singular(AnisoError):
    """The dilation matrix is not invertible."""


class NotExpansive(AnisoError):
    """Some eigenvalue modulus of the dilation matrix is <= 1."""


class NotExponential(AnisoError):
    """No real matrix logarithm could be computed for the dilation."""


class CoverageGap(AnisoError):
    """The dilates of a spectral profile fail to cover a grid frequency."""


class DivisionUnderflow(AnisoError):
    """The Calderon denominator dips below tolerance inside the support."""


class Aliasing(AnisoError):
    """A dilated spectral support does not fit inside the Nyquist box."""


class WindowOutOfDomain(AnisoError):
    """No admissible averaging window exists in the configured ranges."""


class VerificationFailed(AnisoError):
    """An index-set covering/separation certificate failed."""


class IllConditioned(AnisoError):
    """A Gramian (or similar) system is too ill-conditioned to invert."""


class Diverged(AnisoError):
    """An iterative solver increased its error three times in a row."""
