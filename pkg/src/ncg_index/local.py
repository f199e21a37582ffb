"""The Connes-Moscovici local cocycles ``psi_k`` and their renormalized form ``psi'_k``.

Each cochain value is a finite combination of Laurent functionals ``tau_l`` of
operators ``A = a_0 nabla^{m_1}([D, a_1]) ... nabla^{m_k}([D, a_k]) |D|^{-k-2|m|}``
with exact rational weights ``C_m`` and ``sigma_l``.
"""

from __future__ import annotations

import cmath
import csv
import io
import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial, pi, sqrt
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .calculus import abs_d_power, iterate_derivation
from .cyclic import CyclicCochain
from .errors import ParityError
from .models import SpectralTriple
from .operators import CertifiedValue, Operator, commutator, compose
from .zeta import gamma_laurent, laurent_extract, zeta_sampler

ODD_PREFACTOR = cmath.sqrt(2j)
SQRT_PI = sqrt(pi)  # Gamma(1/2), kept in the renormalized odd weights
DEFAULT_M_CAP = 3


def coefficient_C(m: Sequence[int]) -> Fraction:
    """``(-1)^|m| / ((m_1+1)(m_1+m_2+2)...(m_1+...+m_k+k) m_1! ... m_k!)``."""
    den, partial = 1, 0
    for i, mi in enumerate(m, start=1):
        partial += mi
        den *= (partial + i) * factorial(mi)
    return Fraction((-1) ** sum(m), den)


def _poly_mul(a: List[Fraction], b: List[Fraction]) -> List[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def sigma_coefficients(n: int, parity: str) -> List[Fraction]:
    """Coefficients in ``s`` of ``prod_{j=1}^{n} (j - 1/2 + s)`` (odd) or ``prod_{j=1}^{n-1} (j + s)`` (even)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if parity == "odd":
        roots = [Fraction(2 * j - 1, 2) for j in range(1, n + 1)]
    elif parity == "even":
        roots = [Fraction(j) for j in range(1, n)]
    else:
        raise ValueError(f"unknown parity {parity!r}")
    poly = [Fraction(1)]
    for r in roots:
        poly = _poly_mul(poly, [r, Fraction(1)])
    return poly


def multi_indices(k: int, m_cap: int) -> Iterator[Tuple[int, ...]]:
    """All ``(m_1, ..., m_k)`` with ``sum m_i <= m_cap``, ordered by total then lexicographically."""
    for total in range(m_cap + 1):
        for m in itertools.product(range(total + 1), repeat=k):
            if sum(m) == total:
                yield m


@dataclass(frozen=True)
class LocalTerm:
    m: Tuple[int, ...]
    l: int
    coefficient: complex
    tau: complex
    tail_bound: float


def local_operator(T: SpectralTriple, args: Sequence[Operator], m: Sequence[int]) -> Operator:
    k = len(args) - 1
    A = args[0]
    if T.parity == "even":
        A = compose(T.grading, A)
    for a, mi in zip(args[1:], m):
        A = compose(A, iterate_derivation(commutator(T.D, a), T.D, "nabla", mi))
    return compose(A, abs_d_power(T.D, -(k + 2 * sum(m))))


def _weights(T: SpectralTriple, k: int, m: Tuple[int, ...], variant: str) -> Dict[int, complex]:
    """Weights ``w_l`` with ``psi = sum_l w_l tau_l(A)`` for one multi-index."""
    C = coefficient_C(m)
    M = sum(m)
    if variant == "raw":
        h = gamma_laurent(k / 2 + M, 4)
        pref = ODD_PREFACTOR if T.parity == "odd" else 1.0
        return {l: pref * float(C) * v for l, v in h.items()}
    if T.parity == "odd":
        sig = sigma_coefficients((k - 1) // 2 + M, "odd")
        return {l: ODD_PREFACTOR * SQRT_PI * float(C * v) for l, v in enumerate(sig)}
    if k == 0:
        return {-1: 1.0}
    sig = sigma_coefficients(k // 2 + M, "even")
    return {l: float(C * v) for l, v in enumerate(sig)}


def local_terms(T: SpectralTriple, args: Sequence[Operator], variant: str = "renormalized", m_cap: int = DEFAULT_M_CAP) -> List[LocalTerm]:
    k = len(args) - 1
    if (k % 2 == 0) != (T.parity == "even"):
        raise ParityError(f"degree {k} does not fit a {T.parity} triple")
    if variant not in ("raw", "renormalized"):
        raise ValueError(f"unknown variant {variant!r}")
    terms: List[LocalTerm] = []
    comps = [()] if k == 0 else list(multi_indices(k, m_cap))
    for m in comps:
        if variant == "renormalized" and k > 0 and k + sum(m) >= T.p:
            continue  # trace class: every tau_l with l >= 0 vanishes on it
        w = _weights(T, k, m, variant)
        A = local_operator(T, args, m)
        sampler = zeta_sampler(A, T.D)
        # poles of order q make tau_l vanish for l >= q
        q = max(sampler.q_max, 1 if -1 in w else 0)
        data = laurent_extract(sampler, q=q)
        for l, c in sorted(w.items()):
            if c == 0 or l >= max(q, 0) or l < -1:
                continue
            terms.append(LocalTerm(tuple(m), l, c, data[l], data.uncertainty))
    return terms


def local_value(T: SpectralTriple, args: Sequence[Operator], variant: str = "renormalized", m_cap: int = DEFAULT_M_CAP) -> CertifiedValue:
    total, tail = 0j, 0.0
    for t in local_terms(T, args, variant, m_cap):
        total += t.coefficient * t.tau
        tail += abs(t.coefficient) * t.tail_bound
    return CertifiedValue(total, tail)


def local_cocycle(T: SpectralTriple, k: int, variant: str = "renormalized", m_cap: int = DEFAULT_M_CAP) -> CyclicCochain:
    if (k % 2 == 0) != (T.parity == "even"):
        raise ParityError(f"degree {k} does not fit a {T.parity} triple")
    return CyclicCochain({k: lambda args: local_value(T, args, variant, m_cap).value}, T.parity)


def local_cocycle_all(T: SpectralTriple, max_degree: int, variant: str = "renormalized", m_cap: int = DEFAULT_M_CAP) -> CyclicCochain:
    start = 0 if T.parity == "even" else 1
    comps = {k: (lambda args: local_value(T, args, variant, m_cap).value) for k in range(start, max_degree + 1, 2)}
    return CyclicCochain(comps, T.parity)


def terms_csv(rows: Sequence[Tuple[int, LocalTerm]]) -> str:
    """CSV with columns ``k, m-tuple, l, coefficient, tau_value_re, tau_value_im, tail_bound``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "m", "l", "coefficient", "tau_value_re", "tau_value_im", "tail_bound"])
    for k, t in rows:
        w.writerow([k, "(" + " ".join(map(str, t.m)) + ")", t.l, repr(complex(t.coefficient)), repr(t.tau.real), repr(t.tau.imag), repr(t.tail_bound)])
    return buf.getvalue()
