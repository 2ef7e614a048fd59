"""Exception types raised across the package."""


class PfflError(Exception):
    pass


class ShapeMismatch(PfflError, ValueError):
    pass


class UnsupportedPng(PfflError, ValueError):
    pass


class BadMagic(PfflError, ValueError):
    pass


class DimensionOverflow(PfflError, ValueError):
    pass


class ImageTooSmall(PfflError, ValueError):
    pass


class DegenerateResponse(PfflError):
    """All responses are equal; ``sigma`` carries that common value."""

    def __init__(self, sigma):
        super().__init__(f"response map is constant ({sigma!r})")
        self.sigma = sigma


class BudgetExhausted(PfflError):
    pass


class RemoteUnavailable(PfflError, ConnectionError):
    pass


class ProtocolError(PfflError):
    pass


class BindFailure(PfflError, OSError):
    pass


class NotAdversarialDirection(PfflError):
    pass


class InvalidStart(PfflError):
    pass


class InitFailure(PfflError):
    pass


class EmptyImageSet(PfflError, ValueError):
    pass


class ConstraintUnattainable(PfflError):
    pass
