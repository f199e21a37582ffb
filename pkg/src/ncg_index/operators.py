"""Operator arithmetic on dense matrices and banded bi-infinite lattice operators.

Dense operators are plain ``numpy`` complex arrays.  Banded operators live on
``l^2(Z)``: entry ``(n + d, n)`` of the diagonal with offset ``d`` is given by a
vectorised evaluator, and the behaviour at ``n -> +-inf`` is described by
:class:`~ncg_index.asymptotics.Series` metadata.  Traces over the infinite
lattice are returned as :class:`CertifiedValue` with an explicit tail bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional, Tuple, Union

import numpy as np

from .asymptotics import Series
from .errors import (
    BackendMismatch,
    DimensionMismatch,
    MissingAsymptotics,
    NotHermitian,
    NotTraceClass,
    SpectralDomainError,
)

DenseOperator = np.ndarray
Evaluator = Callable[[np.ndarray], np.ndarray]

HERMITIAN_TOL = 1e-12
KERNEL_TOL = 1e-8
# sample points |n| = W * 2**(i/4), i < 44, used to estimate envelope constants
_ENVELOPE_SAMPLES = 2.0 ** (np.arange(44) / 4.0)


@dataclass(frozen=True)
class CertifiedValue:
    value: complex
    tail_bound: float

    def __add__(self, other: "CertifiedValue") -> "CertifiedValue":
        return CertifiedValue(self.value + other.value, self.tail_bound + other.tail_bound)

    def scale(self, a: complex) -> "CertifiedValue":
        return CertifiedValue(a * self.value, abs(a) * self.tail_bound)


@dataclass(frozen=True)
class Band:
    """One diagonal: ``func(n)`` is the entry at row ``n + offset``, column ``n``.

    ``plus``/``minus`` are the asymptotic series at ``+inf``/``-inf``.
    ``envelope = (c, alpha, n0)`` declares ``|a(n) - limit| <= c |n|^-alpha`` for
    ``|n| >= n0``; ``majorant(W)`` bounds ``sum_{|n| > W} |a(n)|`` directly.
    """

    func: Evaluator
    plus: Optional[Series] = None
    minus: Optional[Series] = None
    envelope: Optional[Tuple[float, float, int]] = None
    majorant: Optional[Callable[[int], float]] = None

    def __call__(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        return np.broadcast_to(np.asarray(self.func(n), dtype=complex), n.shape)

    def side(self, sign: int) -> Optional[Series]:
        return self.plus if sign > 0 else self.minus

    def limits(self) -> Tuple[complex, complex]:
        if self.plus is None or self.minus is None:
            raise MissingAsymptotics("diagonal has no asymptotic declaration")
        return self.plus.limit, self.minus.limit


def _const(c: complex) -> Evaluator:
    return lambda n: np.full(np.shape(n), c, dtype=complex)


class BandOperator:
    """Finite-band operator on the integer lattice (immutable by convention)."""

    def __init__(self, bands: Dict[int, Band], n0: int = 8):
        self._bands: Dict[int, Band] = dict(sorted(bands.items()))
        self.n0 = n0

    # constructors -------------------------------------------------------
    @classmethod
    def diagonal(
        cls,
        func: Evaluator,
        plus: Optional[Series] = None,
        minus: Optional[Series] = None,
        *,
        offset: int = 0,
        envelope=None,
        majorant=None,
    ) -> "BandOperator":
        return cls({offset: Band(func, plus, minus, envelope, majorant)})

    @classmethod
    def identity(cls) -> "BandOperator":
        return cls.shift(0)

    @classmethod
    def shift(cls, k: int, c: complex = 1.0) -> "BandOperator":
        """``c`` times the bilateral shift ``e_n -> e_{n+k}``."""
        s = Series.constant(c)
        return cls({k: Band(_const(c), s, s)})

    @classmethod
    def zero(cls) -> "BandOperator":
        return cls({})

    # inspection ---------------------------------------------------------
    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(self._bands)

    @property
    def bands(self) -> Dict[int, Band]:
        return dict(self._bands)

    def band(self, d: int) -> Optional[Band]:
        return self._bands.get(d)

    @property
    def bandwidth(self) -> int:
        return max((abs(d) for d in self._bands), default=0)

    def is_diagonal(self) -> bool:
        return set(self._bands) <= {0}

    def entry(self, m: int, n: int) -> complex:
        b = self._bands.get(m - n)
        return complex(b(np.array([n]))[0]) if b is not None else 0j

    def window_matrix(self, lo: int, hi: int) -> np.ndarray:
        """Dense compression to the index range ``lo..hi`` (inclusive)."""
        size = hi - lo + 1
        out = np.zeros((size, size), dtype=complex)
        cols = np.arange(lo, hi + 1)
        for d, b in self._bands.items():
            keep = (cols + d >= lo) & (cols + d <= hi)
            if keep.any():
                c = cols[keep]
                out[c + d - lo, c - lo] = b(c)
        return out

    def __repr__(self) -> str:
        return f"BandOperator(offsets={self.offsets})"

    # algebra ------------------------------------------------------------
    def __matmul__(self, other: "BandOperator") -> "BandOperator":
        return compose(self, other)

    def __add__(self, other: "BandOperator") -> "BandOperator":
        if not isinstance(other, BandOperator):
            raise BackendMismatch("cannot add banded and dense operators")
        bands = dict(self._bands)
        for d, b in other._bands.items():
            if d in bands:
                a = bands[d]
                bands[d] = Band(
                    lambda n, fa=a.func, fb=b.func: fa(n) + fb(n),
                    _opt(a.plus, b.plus, lambda x, y: x + y),
                    _opt(a.minus, b.minus, lambda x, y: x + y),
                )
            else:
                bands[d] = b
        return BandOperator(bands, max(self.n0, other.n0))

    def __neg__(self) -> "BandOperator":
        return self * -1.0

    def __sub__(self, other: "BandOperator") -> "BandOperator":
        return self + (-other)

    def __mul__(self, a: complex) -> "BandOperator":
        a = complex(a)
        return BandOperator(
            {
                d: Band(
                    lambda n, f=b.func: a * f(n),
                    b.plus.scale(a) if b.plus is not None else None,
                    b.minus.scale(a) if b.minus is not None else None,
                    (abs(a) * b.envelope[0], b.envelope[1], b.envelope[2]) if b.envelope else None,
                    (lambda W, m=b.majorant: abs(a) * m(W)) if b.majorant else None,
                )
                for d, b in self._bands.items()
            },
            self.n0,
        )

    __rmul__ = __mul__

    def adjoint(self) -> "BandOperator":
        bands = {}
        for d, b in self._bands.items():
            # A*(n - d, n) = conj A(n, n - d) = conj A_d(n - d)
            bands[-d] = Band(
                lambda n, f=b.func, d=d: np.conj(f(n - d)),
                b.plus.shift(-d, +1).conj() if b.plus is not None else None,
                b.minus.shift(-d, -1).conj() if b.minus is not None else None,
            )
        return BandOperator(bands, self.n0)

    def norm_bound(self, window: int = 256) -> float:
        """Schur bound ``sum_d sup_n |a_d(n)|`` (sup over the window and the limits)."""
        total = 0.0
        ns = np.arange(-window, window + 1)
        for b in self._bands.values():
            sup = float(np.max(np.abs(b(ns)))) if ns.size else 0.0
            for s in (b.plus, b.minus):
                if s is not None:
                    if s.growth > 0:
                        return float("inf")
                    sup = max(sup, abs(s.limit))
            total += sup
        return total


def _opt(a, b, op):
    return op(a, b) if a is not None and b is not None else None


Operator = Union[np.ndarray, BandOperator]


def compose(A: Operator, B: Operator) -> Operator:
    """Operator product ``A B``: matrix product or exact band convolution."""
    if isinstance(A, BandOperator) and isinstance(B, BandOperator):
        terms: Dict[int, list] = {}
        for d2, b in B._bands.items():
            for d1, a in A._bands.items():
                terms.setdefault(d1 + d2, []).append((d2, a, b))
        bands = {}
        for d, items in terms.items():
            funcs = [(d2, a.func, b.func) for d2, a, b in items]

            def f(n, funcs=funcs):
                out = 0j
                for d2, fa, fb in funcs:
                    out = out + fa(n + d2) * fb(n)
                return out

            plus = minus = None
            if all(a.plus is not None and b.plus is not None for _, a, b in items):
                plus = _sum(a.plus.shift(d2, +1) * b.plus for d2, a, b in items)
            if all(a.minus is not None and b.minus is not None for _, a, b in items):
                minus = _sum(a.minus.shift(d2, -1) * b.minus for d2, a, b in items)
            bands[d] = Band(f, plus, minus)
        return BandOperator(bands, max(A.n0, B.n0))
    if isinstance(A, np.ndarray) and isinstance(B, np.ndarray):
        if A.shape[1] != B.shape[0]:
            raise DimensionMismatch(f"cannot compose {A.shape} with {B.shape}")
        return A @ B
    raise BackendMismatch("mixed-backend composition; embed the dense operator into a banded one first")


def _sum(items: Iterable[Series]) -> Series:
    total = None
    for s in items:
        total = s if total is None else total + s
    return total


def identity_like(T: Operator) -> Operator:
    if isinstance(T, BandOperator):
        return BandOperator.identity()
    return np.eye(T.shape[0], dtype=complex)


def adjoint(T: Operator) -> Operator:
    if isinstance(T, BandOperator):
        return T.adjoint()
    return np.conj(T).T


def commutator(A: Operator, B: Operator) -> Operator:
    return compose(A, B) - compose(B, A)


def operator_norm(T: Operator, window: int = 256) -> float:
    if isinstance(T, BandOperator):
        return T.norm_bound(window)
    if T.size == 0:
        return 0.0
    return float(np.linalg.norm(T, 2))


# traces -----------------------------------------------------------------

def envelope(band: Band, window: int) -> Tuple[float, float]:
    """Decay envelope ``(c, alpha)`` of a diagonal beyond ``window``.

    A declared envelope wins.  Otherwise ``alpha`` is the leading power of the
    asymptotic series after removing the limit and ``c`` the sampled supremum of
    ``|a(n) - limit| |n|^alpha`` for ``|n| >= window`` on a geometric grid.
    """
    if band.envelope is not None:
        c, alpha, _ = band.envelope
        return float(c), float(alpha)
    if band.plus is None or band.minus is None:
        raise MissingAsymptotics("no decay metadata: declare asymptotics, an envelope or a majorant")
    lp, lm = band.limits()
    alpha = min((band.plus - Series.constant(lp)).low, (band.minus - Series.constant(lm)).low)
    ns = np.unique(np.ceil(max(window, 1) * _ENVELOPE_SAMPLES)).astype(np.int64)
    dev_p = np.abs(band(ns) - lp) * ns.astype(float) ** alpha
    dev_m = np.abs(band(-ns) - lm) * ns.astype(float) ** alpha
    c = float(max(dev_p.max(), dev_m.max()))
    return c, float(alpha)


def check_envelope(T: BandOperator) -> Dict[int, bool]:
    """Spot-check every diagonal's envelope at ``|n| in {n0, 2 n0, 4 n0}``."""
    report = {}
    for d, b in T.bands.items():
        if b.plus is None and b.envelope is None:
            report[d] = False
            continue
        n0 = b.envelope[2] if b.envelope else T.n0
        c, alpha = envelope(b, n0)
        lp, lm = b.limits() if b.plus is not None else (0j, 0j)
        ok = True
        for n in (n0, 2 * n0, 4 * n0):
            for sgn, lim in ((1, lp), (-1, lm)):
                dev = abs(complex(b(np.array([sgn * n]))[0]) - lim)
                ok &= dev <= c * n ** (-alpha) * (1 + 1e-9) + 1e-300
        report[d] = bool(ok)
    return report


def certified_trace(T: Operator, window: int = 256) -> CertifiedValue:
    """Trace over ``|n| <= window`` with a bound on the discarded tail."""
    if isinstance(T, np.ndarray):
        if T.shape[0] != T.shape[1]:
            raise DimensionMismatch("trace of a non-square matrix")
        return CertifiedValue(complex(np.trace(T)), 0.0)
    band = T.band(0)
    if band is None:
        return CertifiedValue(0j, 0.0)
    ns = np.arange(-window, window + 1)
    value = complex(np.sum(band(ns)))
    if band.majorant is not None:
        return CertifiedValue(value, float(band.majorant(window)))
    if band.plus is not None and band.minus is not None:
        if band.plus.growth or band.minus.growth:
            raise NotTraceClass("diagonal grows at infinity")
        lp, lm = band.limits()
        if abs(lp) > 0 or abs(lm) > 0:
            raise NotTraceClass(f"diagonal tends to {lp:.3g} / {lm:.3g}, not summable")
    c, alpha = envelope(band, window)
    if alpha <= 1:
        if c == 0.0:
            return CertifiedValue(value, 0.0)
        raise NotTraceClass(f"diagonal decays like |n|^-{alpha:g}; not summable")
    tail = 2.0 * c * window ** (1.0 - alpha) / (alpha - 1.0) if window > 0 else float("inf")
    return CertifiedValue(value, float(tail))


# spectral functions -------------------------------------------------------

def hermitian_spectrum(H: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    H = np.asarray(H, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(H, 2))) if H.size else 1.0
    if H.size and np.linalg.norm(H - H.conj().T, 2) > HERMITIAN_TOL * scale:
        raise NotHermitian("operator is not self-adjoint")
    evals, V = np.linalg.eigh(H)
    return evals, V


def operator_function(
    D: Operator,
    f: Callable[[np.ndarray], np.ndarray],
    plus: Optional[Series] = None,
    minus: Optional[Series] = None,
    majorant: Optional[Callable[[int], float]] = None,
) -> Operator:
    """Apply ``f`` on the spectrum of the self-adjoint ``D``.

    For a diagonal lattice operator the result is diagonal with
    ``n -> f(d(n))``; its asymptotic series can be supplied by the caller.
    """
    if isinstance(D, BandOperator):
        if not D.is_diagonal():
            raise BackendMismatch("banded spectral calculus needs a diagonal operator")
        band = D.band(0)
        if band is None:
            band = Band(_const(0.0), Series.zero(), Series.zero())
        probe = np.arange(-64, 65)
        dvals = band(probe)
        if np.max(np.abs(dvals.imag), initial=0.0) > 0:
            raise NotHermitian("diagonal lattice operator has non-real entries")
        with np.errstate(all="ignore"):
            fvals = np.asarray(f(dvals.real))
        if not np.all(np.isfinite(fvals)):
            raise SpectralDomainError("function undefined on a spectral point")
        func = band.func
        return BandOperator.diagonal(
            lambda n: np.asarray(f(np.real(func(n))), dtype=complex), plus, minus, majorant=majorant
        )
    evals, V = hermitian_spectrum(D)
    with np.errstate(all="ignore"):
        fvals = np.asarray(f(evals), dtype=complex)
    if not np.all(np.isfinite(fvals)):
        raise SpectralDomainError("function undefined on a spectral point")
    return (V * fvals) @ V.conj().T


def kernel_dimension(T: np.ndarray, tol: float = KERNEL_TOL) -> int:
    T = np.asarray(T, dtype=complex)
    rows, cols = T.shape
    if rows == 0 or cols == 0:
        return cols
    s = np.linalg.svd(T, compute_uv=False)
    top = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s >= tol * top)) if s[0] > 0 else 0
    return cols - rank
