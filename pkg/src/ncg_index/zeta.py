"""Zeta functions ``Tr P |D|^{-s}`` with constructive continuation, Laurent functionals ``tau_l``,
Gamma Taylor data and the finite-dimensional ``zeta(0)`` index.

On the lattice model the diagonal of ``P`` is expanded as
``a(+-n) = sum_j c_j^{+-} n^{-j} + r(+-n)``; each power contributes
``c_j zeta_R(s + j)`` and the remainder sum converges absolutely near ``s = 0``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from .calculus import KERNEL_RTOL, _abs_with_kernel, _is_lattice_dirac, _lattice_diag
from .errors import BackendMismatch, MissingAsymptotics, PoleMisdeclared
from .operators import BandOperator, Operator, hermitian_spectrum

CONTOUR_POINTS = 256
REMAINDER_TERMS = 4096
MAX_SUBTRACTION = 8


@dataclass
class MeromorphicSampler:
    """``s -> zeta(s)`` valid near ``s = 0``; ``declared_poles`` maps pole location to order."""

    evaluate: Callable[[complex], complex]
    declared_poles: Dict[float, int] = field(default_factory=dict)
    q_max: int = 1
    s_conv: float = 1.0
    radius: float = 1.0  # evaluate is valid for |s| < radius (punctured at 0)

    def __call__(self, s: complex) -> complex:
        return self.evaluate(s)


@lru_cache(maxsize=200_000)
def _riemann_zeta(s: complex) -> complex:
    return complex(mpmath.zeta(s))


def riemann_zeta(s: complex) -> complex:
    """``zeta_R`` through mpmath, cached at the (repeated) contour nodes."""
    return _riemann_zeta(complex(round(s.real, 15), round(s.imag, 15)))


def _side_coefficients(series, cap: int) -> Tuple[Dict[int, complex], int]:
    if series is None:
        raise MissingAsymptotics("diagonal lacks an asymptotic declaration")
    if series.growth:
        raise MissingAsymptotics("diagonal grows; zeta needs a bounded diagonal")
    J = min(series.order, cap)
    return {j: series.coeff(j) for j in range(0, J + 1) if series.coeff(j) != 0}, J


def zeta_sampler(P: Operator, D: Operator, cap: int = MAX_SUBTRACTION, terms: int = REMAINDER_TERMS) -> MeromorphicSampler:
    """``zeta_P(s) = Tr P |D|^{-s}``.

    Dense operators give a finite sum (entire).  On the lattice the continuation
    uses the declared asymptotic series of the diagonal of ``P`` and requires
    the lattice Dirac operator ``D = n``.
    """
    if not isinstance(P, BandOperator):
        evals, V = hermitian_spectrum(D)
        pdiag = np.einsum("ij,ji->i", V.conj().T @ P, V)
        a = _abs_with_kernel(evals, KERNEL_RTOL)
        return MeromorphicSampler(lambda s: complex(np.sum(pdiag * a ** (-s))), {}, 0, -np.inf, np.inf)
    if not isinstance(D, BandOperator):
        raise BackendMismatch("banded P needs a banded D")
    d, _, _ = _lattice_diag(D)
    if not _is_lattice_dirac(d):
        raise BackendMismatch("lattice continuation is implemented for D e_n = n e_n")
    band = P.band(0)
    if band is None:
        return MeromorphicSampler(lambda s: 0j, {}, 0, -np.inf, np.inf)
    cp, Jp = _side_coefficients(band.plus, cap)
    cm, Jm = _side_coefficients(band.minus, cap)
    n = np.arange(1, terms + 1, dtype=float)
    logn = np.log(n)
    rp = band(n.astype(np.int64)) - sum(c * n ** (-j) for j, c in cp.items())
    rm = band(-n.astype(np.int64)) - sum(c * n ** (-j) for j, c in cm.items())
    a0 = complex(band(np.array([0]))[0])
    # the remainders are O(n^{-J-1}); they converge absolutely for Re s > -J
    J = min(Jp, Jm)
    poles: Dict[float, int] = {}
    for coeffs in (cp, cm):
        for j, c in coeffs.items():
            poles[1.0 - j] = 1

    def ev(s: complex) -> complex:
        s = complex(s)
        total = a0
        for coeffs in (cp, cm):
            for j, c in coeffs.items():
                total += c * riemann_zeta(s + j)
        w = np.exp(-s * logn)
        total += complex(np.sum((rp + rm) * w))
        return total

    return MeromorphicSampler(ev, poles, 1, 1.0, float(J))


# Laurent functionals ----------------------------------------------------------------

@dataclass(frozen=True)
class LaurentData:
    """``zeta(2z) = sum_{j=-1}^{q-1} tau_j z^{-j-1} + O(|z|)``; ``tau[j]``."""

    tau: Dict[int, complex]
    remainder: float
    radius: float
    uncertainty: float = 0.0  # largest two-radius disagreement among the tau_j

    def __getitem__(self, j: int) -> complex:
        return self.tau.get(j, 0j)


def _contour(m: MeromorphicSampler, r: float, q: int, npts: int) -> Dict[int, complex]:
    theta = 2 * np.pi * np.arange(npts) / npts
    z = r * np.exp(1j * theta)
    vals = np.array([m(2 * zz) for zz in z])
    return {j: complex(np.mean(vals * z ** (j + 1))) for j in range(-1, q)}, z, vals


def laurent_extract(m: MeromorphicSampler, q: Optional[int] = None, r: Optional[float] = None, npts: int = CONTOUR_POINTS, rtol: float = 1e-6) -> LaurentData:
    """``tau_j = (1/2 pi i) oint zeta(2z) z^j dz`` on ``|z| = r``, checked against ``r/2``."""
    q = m.q_max if q is None else q
    if q > max(m.q_max, 0) and m.declared_poles:
        raise PoleMisdeclared(f"requested pole order {q} exceeds the sampler's {m.q_max}")
    others = [abs(p) / 2 for p in m.declared_poles if p != 0]
    limit = min(others + [m.radius / 2]) if (others or np.isfinite(m.radius)) else np.inf
    if r is None:
        r = min(0.25, 0.5 * limit)
    t1, z, vals = _contour(m, r, q, npts)
    t2, _, _ = _contour(m, r / 2, q, npts)
    scale = max(1.0, max(abs(v) for v in t1.values()))
    for j in t1:
        if abs(t1[j] - t2[j]) > rtol * scale:
            raise PoleMisdeclared(f"tau_{j} differs between radii {r:g} and {r / 2:g}: {t1[j]:.3g} vs {t2[j]:.3g}")
    res1 = _remainder(t1, z, vals)
    _, zh, valsh = _contour(m, r / 2, q, npts)
    res2 = _remainder(t1, zh, valsh)
    # after subtracting the principal part the remainder is O(|z|); growth on the
    # smaller circle means a pole of higher order than declared
    if res1 > rtol * scale and res2 > 0.75 * res1:
        raise PoleMisdeclared(f"remainder grows from {res1:.3g} to {res2:.3g} as the radius halves: undeclared pole order")
    spread = max(abs(t1[j] - t2[j]) for j in t1)
    return LaurentData(t1, res1, r, float(spread))


def _remainder(tau: Dict[int, complex], z: np.ndarray, vals: np.ndarray) -> float:
    recon = sum(tau[j] * z ** (-j - 1) for j in tau)
    return float(np.max(np.abs(vals - recon)))


def residue(m: MeromorphicSampler, s0: complex, rho: float = 0.1, npts: int = CONTOUR_POINTS) -> complex:
    """``Res_{s = s0} zeta(s)`` by the trapezoid rule on ``|s - s0| = rho``."""
    theta = 2 * np.pi * np.arange(npts) / npts
    w = rho * np.exp(1j * theta)
    return complex(np.mean([m(s0 + ww) * ww for ww in w]))


def tau_functionals(P: Operator, D: Operator, q: int = 1) -> LaurentData:
    return laurent_extract(zeta_sampler(P, D), q)


# Gamma Taylor data -----------------------------------------------------------------

def series_exp(c: Sequence[complex], order: int) -> List[complex]:
    """Coefficients of ``exp(sum_{j>=1} c_j s^j)`` up to ``s^order`` (``c[0]`` ignored)."""
    out = [1.0] + [0.0] * order
    for n in range(1, order + 1):
        out[n] = sum(j * c[j] * out[n - j] for j in range(1, n + 1)) / n
    return out


@lru_cache(maxsize=256)
def gamma_taylor(x: float, order: int) -> Tuple[float, ...]:
    """``Gamma(x + s) = sum_l g_l s^l`` for ``x > 0``: ``g_l = Gamma^{(l)}(x) / l!``.

    ``log Gamma(x + s) - log Gamma(x) = sum_{j>=1} psi^{(j-1)}(x) s^j / j!``.
    """
    with mpmath.workdps(30):
        c = [0.0] + [float(mpmath.polygamma(j - 1, x)) / factorial(j) for j in range(1, order + 1)]
        g0 = float(mpmath.gamma(x))
    return tuple(g0 * v for v in series_exp(c, order))


def gamma_laurent(x: float, order: int) -> Dict[int, float]:
    """Laurent coefficients of ``Gamma(x + s)`` at ``s = 0`` (``x`` may be 0: simple pole)."""
    if x > 0:
        return dict(enumerate(gamma_taylor(x, order)))
    if x != 0:
        raise ValueError("only x >= 0 is supported")
    # Gamma(s) = Gamma(1 + s) / s
    g = gamma_taylor(1.0, order + 1)
    return {l - 1: g[l] for l in range(order + 2)}


# zeta(0) index on finite even triples ---------------------------------------------------

def zeta_index(P: np.ndarray, s: complex) -> complex:
    """``Tr (1 + P*P)^{-s} - Tr (1 + PP*)^{-s}``."""
    P = np.asarray(P, dtype=complex)
    a = np.linalg.eigvalsh(np.eye(P.shape[1]) + P.conj().T @ P)
    b = np.linalg.eigvalsh(np.eye(P.shape[0]) + P @ P.conj().T)
    return complex(np.sum(a ** (-s)) - np.sum(b ** (-s)))


def mckean_singer(T, t: float) -> float:
    """``Tr gamma e^{-t D^2}`` for a finite even triple."""
    evals, V = hermitian_spectrum(T.D)
    g = V.conj().T @ T.grading @ V
    return float(np.real(np.sum(np.diag(g) * np.exp(-t * evals**2))))


def trace_defect(P1: Operator, P2: Operator, D: Operator, q: int = 1) -> Dict[int, Tuple[complex, complex]]:
    """Both sides of ``tau_i(P1 P2) - tau_i(P2 P1) = sum_{k>=1} (-1)^k / k! tau_{i+k}(P2 L^k(P1))``.

    Obtained by moving ``P1`` across ``|D|^{-2z}`` with ``|D|^{-2z} P1 |D|^{2z} = sum (-z)^k / k! L^k(P1)``.
    Returns ``{i: (lhs, rhs)}`` for ``i = -1, ..., q - 1``.
    """
    from .calculus import iterate_derivation
    from .operators import compose

    left = laurent_extract(zeta_sampler(compose(P1, P2), D), q)
    right = laurent_extract(zeta_sampler(compose(P2, P1), D), q)
    out = {}
    for i in range(-1, q):
        rhs = 0j
        for k in range(1, q - i):
            Lk = iterate_derivation(P1, D, "log", k)
            rhs += (-1) ** k / factorial(k) * laurent_extract(zeta_sampler(compose(P2, Lk), D), q)[i + k]
        out[i] = (left[i] - right[i], rhs)
    return out
