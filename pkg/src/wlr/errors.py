"""Exception types shared across the toolkit."""


class WLRError(Exception):
    """Base class for every error raised by this package."""


class DegenerateFixation(WLRError):
    pass


class DegeneratePoint(WLRError):
    pass


class NoIntersection(WLRError):
    pass


class Divergent(WLRError):
    """Viewing rays have no forward closest approach (parallel or diverging)."""


class UnknownPreset(WLRError):
    pass


class SingularKernel(WLRError):
    pass


class FullyCensored(WLRError):
    """Too few angles reach the target probability inside the search limits.

    The partially filled contour is kept on ``self.contour`` so callers can
    report it with a flag instead of dropping it.
    """

    def __init__(self, message, contour=None):
        super().__init__(message)
        self.contour = contour


class DegenerateVariance(WLRError):
    pass


class IllConditioned(WLRError):
    pass


class InsufficientSamples(WLRError):
    pass


class NonUniformSampling(WLRError):
    pass


class SchemaError(WLRError):
    pass


class SubjectMismatch(WLRError):
    pass


class ObserverSpecError(WLRError):
    pass
