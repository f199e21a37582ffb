"""Truncated Laurent series in ``x = 1/|n|`` describing lattice diagonals at infinity.

A diagonal ``n -> a(n)`` of a band operator is described at ``n -> +inf`` and
``n -> -inf`` by two :class:`Series` objects.  Each one stores finitely many
coefficients together with the order through which they are exact, so that
products, shifts and sums keep track of how much of the expansion is valid.
"""

from __future__ import annotations

from math import comb
from typing import Dict, Iterable, Mapping

MAX_ORDER = 10
_ZERO_TOL = 1e-300


class Series:
    """``sum_j c_j x**j`` valid up to ``O(x**(order + 1))``.

    Negative powers are allowed; they describe polynomially growing diagonals
    such as ``n -> n``.
    """

    __slots__ = ("_coeffs", "order")

    def __init__(self, coeffs: Mapping[int, complex] | None = None, order: int = MAX_ORDER):
        order = min(int(order), MAX_ORDER)
        self.order = order
        self._coeffs: Dict[int, complex] = {
            int(p): complex(c) for p, c in (coeffs or {}).items() if p <= order and abs(c) > _ZERO_TOL
        }

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c: complex, order: int = MAX_ORDER) -> "Series":
        return cls({0: c}, order)

    @classmethod
    def monomial(cls, power: int, c: complex = 1.0, order: int = MAX_ORDER) -> "Series":
        return cls({power: c}, order)

    @classmethod
    def zero(cls, order: int = MAX_ORDER) -> "Series":
        return cls({}, order)

    @classmethod
    def log1p(cls, s: float, scale: complex = 1.0, order: int = MAX_ORDER) -> "Series":
        """Series of ``scale * log(1 + s x)``."""
        return cls({j: scale * (-1) ** (j + 1) * s**j / j for j in range(1, order + 1)}, order)

    # inspection ---------------------------------------------------------
    @property
    def coeffs(self) -> Dict[int, complex]:
        return dict(self._coeffs)

    def coeff(self, power: int) -> complex:
        if power > self.order:
            raise ValueError(f"coefficient x^{power} beyond valid order {self.order}")
        return self._coeffs.get(power, 0j)

    @property
    def low(self) -> int:
        """Lowest power with a nonzero coefficient (``order + 1`` for a null series)."""
        return min(self._coeffs) if self._coeffs else self.order + 1

    @property
    def growth(self) -> int:
        """Degree of polynomial growth, 0 for bounded diagonals."""
        return max(0, -self.low)

    @property
    def limit(self) -> complex:
        if self.low < 0:
            raise ValueError("diagonal grows without bound; no limit")
        return self._coeffs.get(0, 0j)

    def is_null(self) -> bool:
        return not self._coeffs

    def __repr__(self) -> str:
        terms = " + ".join(f"({c:.4g})x^{p}" for p, c in sorted(self._coeffs.items()))
        return f"Series({terms or '0'}; O(x^{self.order + 1}))"

    # algebra ------------------------------------------------------------
    def __add__(self, other: "Series") -> "Series":
        order = min(self.order, other.order)
        out = dict(self._coeffs)
        for p, c in other._coeffs.items():
            out[p] = out.get(p, 0j) + c
        return Series(out, order)

    def __neg__(self) -> "Series":
        return Series({p: -c for p, c in self._coeffs.items()}, self.order)

    def __sub__(self, other: "Series") -> "Series":
        return self + (-other)

    def scale(self, a: complex) -> "Series":
        return Series({p: a * c for p, c in self._coeffs.items()}, self.order)

    def conj(self) -> "Series":
        return Series({p: c.conjugate() for p, c in self._coeffs.items()}, self.order)

    def __mul__(self, other: "Series") -> "Series":
        order = min(self.order + other.low, other.order + self.low, MAX_ORDER)
        out: Dict[int, complex] = {}
        for p, c in self._coeffs.items():
            for q, d in other._coeffs.items():
                if p + q <= order:
                    out[p + q] = out.get(p + q, 0j) + c * d
        return Series(out, order)

    def shift(self, d: int, side: int) -> "Series":
        """Series of ``n -> f(n + d)`` on the side ``sign(n) = side``.

        On the positive side ``|n + d| = |n| + d``; on the negative side
        ``|n + d| = |n| - d``.  Hence ``x' = x / (1 + s x)`` with ``s = side * d``.
        """
        if d == 0:
            return self
        s = side * d
        out: Dict[int, complex] = {}
        for j, c in self._coeffs.items():
            # x'^j = x^j (1 + s x)^(-j)
            for i in range(0, self.order - j + 1):
                out[j + i] = out.get(j + i, 0j) + c * _binom_neg(j, i) * s**i
        return Series(out, self.order)

    def _unit_part(self):
        """Split ``self = c x^L (1 + y)`` with ``y = O(x)``; returns ``(c, L, y)``."""
        if self.is_null():
            raise ZeroDivisionError("null series has no leading term")
        L = self.low
        c = self._coeffs[L]
        y = (self * Series.monomial(-L, 1.0 / c)) - Series.constant(1.0)
        return c, L, y

    def reciprocal(self) -> "Series":
        c, L, y = self._unit_part()
        total, term = Series.constant(1.0), Series.constant(1.0)
        for _ in range(MAX_ORDER):
            term = term * (-y)
            total = total + term
        return total * Series.monomial(-L, 1.0 / c)

    def power_real(self, alpha: float) -> "Series":
        """``self**alpha`` for a series with positive constant leading term."""
        c, L, y = self._unit_part()
        if L != 0 or abs(c.imag) > 0 or c.real <= 0:
            raise ValueError("real powers need a positive constant leading term")
        total, term, binom = Series.constant(1.0), Series.constant(1.0), 1.0
        for j in range(1, MAX_ORDER + 1):
            binom *= (alpha - j + 1) / j
            term = term * y
            total = total + term.scale(binom)
        return total.scale(c.real**alpha)

    def power_int(self, m: int) -> "Series":
        result = Series.constant(1.0)
        for _ in range(m):
            result = result * self
        return result


def _binom_neg(j: int, i: int) -> float:
    """Coefficient of ``y**i`` in ``(1 + y)**(-j)`` for integer ``j``."""
    if j <= 0:
        return float(comb(-j, i)) if i <= -j else 0.0
    # (1+y)^(-j) = sum (-1)^i C(j+i-1, i) y^i
    return float((-1) ** i * comb(j + i - 1, i))


def sum_series(items: Iterable[Series]) -> Series:
    total = None
    for s in items:
        total = s if total is None else total + s
    return total if total is not None else Series.zero()
