"""``|D|``, the derivations ``delta``, ``nabla``, ``L`` and the conjugation expansion."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .asymptotics import Series
from .errors import BackendMismatch
from .operators import Band, BandOperator, Operator, commutator, hermitian_spectrum, operator_function


# dense eigenvalues below this fraction of the spectral radius count as kernel
KERNEL_RTOL = 1e-12


def _abs_with_kernel(x: np.ndarray, rtol: float = 0.0) -> np.ndarray:
    a = np.abs(x)
    cut = rtol * max(1.0, float(np.max(a, initial=0.0)))
    return np.where(a <= cut, 1.0, a)


def _lattice_diag(D: BandOperator):
    if not D.is_diagonal():
        raise BackendMismatch("banded calculus needs a diagonal D")
    band = D.band(0)
    if band is None:
        return lambda n: np.zeros(np.shape(n)), Series.zero(), Series.zero()
    return (lambda n: np.real(band(n))), band.plus, band.minus


def _abs_series(s: Optional[Series]) -> Optional[Series]:
    if s is None or s.is_null():
        return None
    lead = s.coeff(s.low)
    return s if lead.real > 0 else -s


def abs_d(D: Operator) -> Operator:
    """``|D| = sqrt(D^2) + P_ker``: strictly positive, equal to 1 on the kernel."""
    if isinstance(D, BandOperator):
        d, plus, minus = _lattice_diag(D)
        return BandOperator.diagonal(lambda n: _abs_with_kernel(d(n)).astype(complex), _abs_series(plus), _abs_series(minus))
    evals, V = hermitian_spectrum(D)
    return (V * _abs_with_kernel(evals, KERNEL_RTOL)) @ V.conj().T


def abs_d_power(D: Operator, alpha: int) -> Operator:
    """``|D|^alpha`` for an integer ``alpha`` (kernel convention of :func:`abs_d`)."""
    if isinstance(D, BandOperator):
        d, plus, minus = _lattice_diag(D)
        sp, sm = _abs_series(plus), _abs_series(minus)

        def pw(s):
            if s is None:
                return None
            return s.power_int(alpha) if alpha >= 0 else s.reciprocal().power_int(-alpha)

        return BandOperator.diagonal(lambda n: (_abs_with_kernel(d(n)) ** alpha).astype(complex), pw(sp), pw(sm))
    evals, V = hermitian_spectrum(D)
    return (V * _abs_with_kernel(evals, KERNEL_RTOL) ** alpha) @ V.conj().T


# derivations --------------------------------------------------------------------

_KINDS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "delta": lambda x: _abs_with_kernel(x, KERNEL_RTOL),
    "nabla": lambda x: x * x,
    "log": lambda x: np.log(_abs_with_kernel(x, KERNEL_RTOL) ** 2),
}


def _difference_series(kind: str, d: int, side: int, dseries: Optional[Series]) -> Optional[Series]:
    """Series of ``f(D)(n + d) - f(D)(n)`` on one side, for the lattice Dirac operator ``D = n``."""
    if dseries is None:
        return None
    # these closed forms assume the diagonal of D is n itself (checked by the caller)
    if kind == "nabla":
        return Series({-1: 2 * d * side, 0: d * d})
    if kind == "delta":
        return Series.constant(d * side)
    return Series.log1p(side * d, 2.0)


def _is_lattice_dirac(d) -> bool:
    probe = np.arange(-16, 17)
    return bool(np.allclose(d(probe), probe))


def derivation(T: Operator, D: Operator, kind: str = "nabla") -> Operator:
    """``[f(D), T]`` with ``f = |.|`` (delta), ``(.)^2`` (nabla) or ``log |.|^2`` (log)."""
    if kind not in _KINDS:
        raise ValueError(f"unknown derivation {kind!r}")
    f = _KINDS[kind]
    if isinstance(T, BandOperator):
        if not isinstance(D, BandOperator):
            raise BackendMismatch("banded T needs a banded D")
        d, dplus, dminus = _lattice_diag(D)
        exact_series = _is_lattice_dirac(d)
        bands = {}
        for off, b in T.bands.items():
            func = lambda n, b=b, off=off: (f(d(n + off)) - f(d(n))) * b(n)
            plus = minus = None
            if exact_series and b.plus is not None:
                plus = _difference_series(kind, off, +1, dplus) * b.plus
            if exact_series and b.minus is not None:
                minus = _difference_series(kind, off, -1, dminus) * b.minus
            bands[off] = Band(func, plus, minus)
        return BandOperator(bands, T.n0)
    fD = operator_function(D, f)
    return commutator(fD, T)


def iterate_derivation(T: Operator, D: Operator, kind: str, k: int) -> Operator:
    for _ in range(k):
        T = derivation(T, D, kind)
    return T


# conjugation expansion ------------------------------------------------------------

@dataclass(frozen=True)
class ConjugationReport:
    l_series_defect: float
    binomial_defect: float
    binomial_excluded: int  # entries where the binomial expansion does not converge


def _window_entries(T: Operator, D: Operator, window: int):
    if isinstance(T, BandOperator):
        d, _, _ = _lattice_diag(D)
        idx = np.arange(-window, window + 1)
        M = T.window_matrix(-window, window)
        dv = d(idx)
    else:
        evals, V = hermitian_spectrum(D)
        M = V.conj().T @ T @ V
        dv = evals
    return M, _abs_with_kernel(dv)


def conjugation_expansion_check(T: Operator, D: Operator, z: complex, N: int, window: int = 32) -> ConjugationReport:
    """Compare ``|D|^{2z} T |D|^{-2z}`` with the truncated ``L`` and binomial-``nabla`` series.

    Work happens entrywise in the eigenbasis of ``D``: the exact conjugation
    multiplies entry ``(m, n)`` by ``(|d_m| / |d_n|)^{2z}``.
    """
    M, a = _window_entries(T, D, window)
    am, an = a[:, None], a[None, :]
    exact = M * (am / an) ** (2 * z)
    ell = np.log(am**2) - np.log(an**2)
    lser = sum((z**k / factorial(k)) * ell**k for k in range(N + 1)) * M
    ratio = (am**2 - an**2) / an**2
    binom = np.zeros_like(ratio, dtype=complex)
    coef = 1.0 + 0j
    for k in range(N + 1):
        binom = binom + coef * ratio**k
        coef = coef * (z - k) / (k + 1)
    bser = binom * M
    ok = (np.abs(ratio) < 1.0) | (M == 0)
    bdef = float(np.max(np.abs(bser - exact)[ok], initial=0.0))
    return ConjugationReport(float(np.max(np.abs(lser - exact), initial=0.0)), bdef, int(np.sum(~ok)))
