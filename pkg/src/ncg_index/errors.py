"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class NCGError(Exception):
    """Base class for all errors raised by ncg_index."""


class DimensionMismatch(NCGError, ValueError):
    pass


class BackendMismatch(NCGError, TypeError):
    """Dense and banded operators were mixed; embed the dense one first."""


class NotHermitian(NCGError, ValueError):
    pass


class SpectralDomainError(NCGError, ValueError):
    """A scalar function is undefined at a spectral point."""


class NotTraceClass(NCGError, ValueError):
    pass


class MissingAsymptotics(NCGError, ValueError):
    """An operation needs asymptotic or decay metadata that was not declared."""


class ClosureError(NCGError, KeyError):
    """A product of two alphabet labels left the alphabet."""

    def __init__(self, left: str, right: str):
        super().__init__(f"product {left!r} * {right!r} leaves the alphabet")
        self.left = left
        self.right = right


class NotIdempotent(NCGError, ValueError):
    pass


class SingularElement(NCGError, ValueError):
    pass


class ParityError(NCGError, ValueError):
    pass


class SummabilityError(NCGError, ValueError):
    pass


class WindowTooSmall(NCGError, RuntimeError):
    pass


class BasisInadequate(NCGError, ValueError):
    pass


class PoleMisdeclared(NCGError, RuntimeError):
    pass


class SymbolError(NCGError, ValueError):
    pass


class ConfigError(NCGError, ValueError):
    pass


class UnboundLabel(NCGError, KeyError):
    """A chain word uses a label that has no operator bound to it."""
