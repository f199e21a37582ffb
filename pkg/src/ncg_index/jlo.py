"""The JLO cochain of a spectral triple, its transgression, and finite parts under rescaling.

Heat-simplex traces are evaluated exactly: in the eigenbasis of ``D`` each
matrix-element path contributes the product of its entries times a divided
difference of ``exp`` (see :mod:`ncg_index.divided`).  On the lattice the sum
over paths is a sum over the starting index, vectorised over the window.
"""

from __future__ import annotations

import cmath
import csv
import io
import itertools
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .cyclic import CyclicChain, CyclicCochain, pair
from .divided import simplex_weight
from .errors import BackendMismatch, BasisInadequate, ParityError
from .models import SpectralTriple
from .operators import BandOperator, CertifiedValue, Operator, commutator, compose, hermitian_spectrum, operator_norm

MAX_SIMPLEX_DEGREE = 48
ODD_PREFACTOR = cmath.sqrt(2j)
DENSE_CHUNK = 1 << 18
PATH_LIMIT = 1 << 16  # beyond this many eigenvalue paths the dense trace uses a block exponential
MIN_EPS = 1e-4


@dataclass(frozen=True)
class HeatSliceProduct:
    """``Tr A_0 e^{-t_0 D^2} A_1 e^{-t_1 D^2} ... A_k e^{-t_k D^2}`` integrated over the simplex.

    ``insertion = l`` places an extra bare ``D`` right after ``A_l`` (and its heat
    slice), raising the simplex dimension by one.
    """

    factors: Tuple[Operator, ...]
    D: Operator
    insertion: Optional[int] = None

    def __post_init__(self):
        banded = isinstance(self.D, BandOperator)
        for a in self.factors:
            if isinstance(a, BandOperator) != banded:
                raise BackendMismatch("all factors must share the backend of D")

    def expanded(self) -> Tuple[Operator, ...]:
        if self.insertion is None:
            return tuple(self.factors)
        l = self.insertion
        return tuple(self.factors[: l + 1]) + (self.D,) + tuple(self.factors[l + 1 :])


# dense evaluation --------------------------------------------------------------

def _dense_trace(factors: Sequence[np.ndarray], D: np.ndarray, t: float) -> complex:
    n, k = D.shape[0], len(factors) - 1
    if k >= 2 and n ** (k + 1) > PATH_LIMIT:
        return _dense_trace_block(factors, D, t)
    return _dense_trace_paths(factors, D, t)


def _dense_trace_block(factors: Sequence[np.ndarray], D: np.ndarray, t: float) -> complex:
    """Block-bidiagonal exponential: with ``-t D^2`` on the diagonal and ``A_1..A_k`` above it,
    the corner block of ``exp`` is the simplex integral ``int e^{-s_0 t D^2} A_1 ... A_k e^{-s_k t D^2}``.
    """
    n, k = D.shape[0], len(factors) - 1
    H = -t * (D @ D)
    N = np.zeros(((k + 1) * n, (k + 1) * n), dtype=complex)
    for i in range(k + 1):
        N[i * n : (i + 1) * n, i * n : (i + 1) * n] = H
        if i < k:
            N[i * n : (i + 1) * n, (i + 1) * n : (i + 2) * n] = factors[i + 1]
    corner = expm(N)[:n, k * n :]
    return complex(np.trace(factors[0] @ corner))


def _dense_trace_paths(factors: Sequence[np.ndarray], D: np.ndarray, t: float) -> complex:
    evals, V = hermitian_spectrum(D)
    mu = evals**2
    n = mu.size
    mats = [V.conj().T @ A @ V for A in factors]
    k = len(mats) - 1
    if k == 0:
        return complex(np.sum(np.diag(mats[0]) * np.exp(-t * mu)))
    # index tuples (j_0, ..., j_k); entry product A_0[j0,j1] A_1[j1,j2] ... A_k[jk,j0]
    total = 0j
    count = n ** (k + 1)
    for start in range(0, count, DENSE_CHUNK):
        flat = np.arange(start, min(count, start + DENSE_CHUNK))
        idx = np.stack(np.unravel_index(flat, (n,) * (k + 1)), axis=1)
        prod = np.ones(flat.size, dtype=complex)
        for i, M in enumerate(mats):
            prod *= M[idx[:, i], idx[:, (i + 1) % (k + 1)]]
        keep = prod != 0
        if not keep.any():
            continue
        w = simplex_weight(mu[idx[keep]], t)
        total += complex(np.sum(prod[keep] * w))
    return total


# lattice evaluation -------------------------------------------------------------

def _lattice_terms(factors: Sequence[BandOperator], dvals: Callable[[np.ndarray], np.ndarray], t: float, starts: np.ndarray) -> Tuple[complex, float]:
    """Sum and absolute sum of path contributions for the given starting indices."""
    k = len(factors) - 1
    offsets = [f.offsets for f in factors]
    total, absolute = 0j, 0.0
    for combo in itertools.product(*offsets):
        if sum(combo) != 0:
            continue
        # walk backwards from j0: j_k = j0 + d_k, ..., j_1 = j_2 + d_1
        pos = starts.copy()
        prod = np.ones(starts.size, dtype=complex)
        points = [np.real(dvals(pos)) ** 2]
        for i in range(k, 0, -1):
            prod *= factors[i].band(combo[i])(pos)
            pos = pos + combo[i]
            points.append(np.real(dvals(pos)) ** 2)
        prod *= factors[0].band(combo[0])(pos)
        w = simplex_weight(np.stack(points, axis=1), t)
        terms = prod * w
        total += complex(np.sum(terms))
        absolute += float(np.sum(np.abs(terms)))
    return total, absolute


def _lattice_trace(factors: Sequence[BandOperator], D: BandOperator, t: float, window: int) -> CertifiedValue:
    if not D.is_diagonal():
        raise BackendMismatch("lattice heat traces need a diagonal D")
    dband = D.band(0)
    dvals = (lambda n: dband(n)) if dband is not None else (lambda n: np.zeros(np.shape(n)))
    starts = np.arange(-window, window + 1)
    value, _ = _lattice_terms(factors, dvals, t, starts)
    # tail: the same (positive-weight) terms beyond the window, on growing shells, until they are negligible
    tail, lo, width = 0.0, window + 1, max(16, window // 4)
    for _ in range(60):
        shell = np.r_[np.arange(lo, lo + width), -np.arange(lo, lo + width)]
        _, chunk = _lattice_terms(factors, dvals, t, shell)
        tail += chunk
        lo += width
        width *= 2
        if chunk <= 1e-30 * max(1.0, abs(value), tail):
            break
    # the discarded remainder beyond the last shell is dominated by the last shell (Gaussian decay)
    return CertifiedValue(value, 2.0 * tail)


def simplex_heat_trace(h: HeatSliceProduct, t_total: float, window: int = 256) -> CertifiedValue:
    """Exact simplex integral of the heat-slice trace at total time ``t_total``."""
    factors = h.expanded()
    k = len(factors) - 1
    if k > MAX_SIMPLEX_DEGREE:
        raise ValueError(f"simplex degree {k} exceeds the supported maximum {MAX_SIMPLEX_DEGREE}")
    if isinstance(h.D, BandOperator):
        return _lattice_trace(factors, h.D, t_total, window)
    return CertifiedValue(_dense_trace(factors, h.D, t_total), 0.0)


# Hoelder bound bookkeeping ------------------------------------------------------------

@dataclass
class HolderRecord:
    degree: int
    eps: float
    value: complex
    bound: float

    @property
    def holds(self) -> bool:
        return abs(self.value) <= self.bound


@dataclass
class HolderLog:
    records: List[HolderRecord] = field(default_factory=list)

    def add(self, rec: HolderRecord) -> None:
        self.records.append(rec)

    @property
    def violations(self) -> List[HolderRecord]:
        return [r for r in self.records if not r.holds]

    def clear(self) -> None:
        self.records.clear()


HOLDER_LOG = HolderLog()


def heat_trace(D: Operator, t: float, window: int = 256) -> CertifiedValue:
    """``Tr e^{-t D^2}`` (with a tail bound on the lattice)."""
    if isinstance(D, BandOperator):
        band = D.band(0)
        one = BandOperator.identity()
        return _lattice_trace([one], D, t, window) if band is not None else CertifiedValue(float("inf"), 0.0)
    evals = np.linalg.eigvalsh(D)
    return CertifiedValue(float(np.sum(np.exp(-t * evals**2))), 0.0)


def holder_bound(T: SpectralTriple, args: Sequence[Operator], eps: float, window: int = 256) -> float:
    """``|prefactor| (1/k!) ||a_0|| prod ||[eps D, a_i]|| Tr e^{-eps^2 D^2}``."""
    k = len(args) - 1
    pref = abs(ODD_PREFACTOR) if T.parity == "odd" else 1.0
    norm = operator_norm(args[0], window)
    for a in args[1:]:
        norm *= eps * operator_norm(commutator(T.D, a), window)
    ht = heat_trace(T.D, eps**2, window)
    return pref * norm * (ht.value.real + ht.tail_bound) / factorial(k)


# cochains ---------------------------------------------------------------------------

def _check_parity(T: SpectralTriple, k: int, want_same: bool) -> None:
    same = (k % 2 == 0) == (T.parity == "even")
    if same != want_same:
        raise ParityError(f"degree {k} does not fit a {T.parity} triple here")


def _leading(T: SpectralTriple, a0: Operator) -> Operator:
    return compose(T.grading, a0) if T.parity == "even" else a0


def jlo_value(T: SpectralTriple, args: Sequence[Operator], eps: float, window: int = 256, log: Optional[HolderLog] = HOLDER_LOG) -> CertifiedValue:
    """``Ch^k(eps D)(a_0, ..., a_k)`` with ``k = len(args) - 1``."""
    k = len(args) - 1
    _check_parity(T, k, True)
    if eps <= 0:
        raise ValueError("eps must be positive")
    factors = [_leading(T, args[0])] + [commutator(T.D, a) * eps for a in args[1:]]
    val = simplex_heat_trace(HeatSliceProduct(tuple(factors), T.D), eps**2, window)
    if T.parity == "odd":
        val = val.scale(ODD_PREFACTOR)
    if log is not None:
        log.add(HolderRecord(k, eps, val.value, holder_bound(T, args, eps, window)))
    return val


def jlo_cochain(T: SpectralTriple, k: int, eps: float, window: int = 256) -> CyclicCochain:
    _check_parity(T, k, True)
    return CyclicCochain({k: lambda args: jlo_value(T, args, eps, window).value}, T.parity)


def jlo_entire(T: SpectralTriple, max_degree: int, eps: float, window: int = 256) -> CyclicCochain:
    """All components ``Ch^k(eps D)`` with ``k <= max_degree`` of the triple's parity."""
    start = 0 if T.parity == "even" else 1
    comps = {k: (lambda args: jlo_value(T, args, eps, window).value) for k in range(start, max_degree + 1, 2)}
    return CyclicCochain(comps, T.parity)


def transgression_value(T: SpectralTriple, args: Sequence[Operator], eps: float, window: int = 256) -> CertifiedValue:
    """``Ch^k(eps D, D)(a_0, ..., a_k)``: alternating sum over the position of the bare ``D``.

    Heat slices and commutators use ``eps D``; the inserted factor is ``D``.
    """
    k = len(args) - 1
    _check_parity(T, k, False)
    factors = tuple([_leading(T, args[0])] + [commutator(T.D, a) * eps for a in args[1:]])
    total = CertifiedValue(0j, 0.0)
    for l in range(k + 1):
        term = simplex_heat_trace(HeatSliceProduct(factors, T.D, insertion=l), eps**2, window)
        total = total + term.scale((-1) ** l)
    if T.parity == "odd":
        total = total.scale(ODD_PREFACTOR)
    return total


def transgression_cochain(T: SpectralTriple, k: int, eps: float, window: int = 256) -> CyclicCochain:
    _check_parity(T, k, False)
    parity = "odd" if T.parity == "even" else "even"
    return CyclicCochain({k: lambda args: transgression_value(T, args, eps, window).value}, parity)


# entire pairing with Chern chains -------------------------------------------------------

def _chain_tail_bound(T: SpectralTriple, chain_factory, bindings, eps, degree, window) -> float:
    """Hoelder bound of the pairing terms of one chain degree."""
    comp = chain_factory(degree).component(degree)
    total = 0.0
    for word, coeff in comp.items():
        args = [bindings[lab] for lab in word]
        total += abs(complex(coeff)) * holder_bound(T, args, eps, window)
    return total


def jlo_pairing(
    T: SpectralTriple,
    chain_factory: Callable[[int], CyclicChain],
    bindings: Dict[str, Operator],
    eps: float,
    window: int = 256,
    tol: float = 1e-10,
    max_degree: int = MAX_SIMPLEX_DEGREE - 1,
) -> CertifiedValue:
    """Pair ``Ch(eps D)`` with the chain ``chain_factory(cap)``, raising ``cap`` until the
    Hoelder bound of the next two chain degrees is below ``tol``.

    The reported tail bound adds those Hoelder bounds to the lattice tails.
    """
    start = 0 if T.parity == "even" else 1
    cap = start
    while True:
        nxt = [_chain_tail_bound(T, chain_factory, bindings, eps, d, window) for d in (cap + 2, cap + 4)]
        if sum(nxt) < tol or cap + 4 > max_degree:
            break
        cap += 2
    chain = chain_factory(cap)
    value, tail = 0j, sum(nxt)
    for word, coeff in chain.items():
        args = [bindings[lab] for lab in word]
        v = jlo_value(T, args, eps, window)
        value += complex(coeff) * v.value
        tail += abs(complex(coeff)) * v.tail_bound
    return CertifiedValue(value, tail)


# finite parts ----------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticSampleSet:
    epsilons: Tuple[float, ...]
    values: Tuple[complex, ...]
    exponent_basis: Tuple[Tuple[float, int], ...] = ()
    log_powers: int = 1

    def __post_init__(self):
        e = np.asarray(self.epsilons, dtype=float)
        if e.size != len(self.values):
            raise ValueError("one value per epsilon required")
        if np.any(np.diff(e) >= 0):
            raise ValueError("epsilons must be strictly decreasing")
        if np.any(e < MIN_EPS):
            raise ValueError(f"epsilons below {MIN_EPS} are not supported")


@dataclass(frozen=True)
class FinitePart:
    value: complex
    residual: float
    coefficients: Dict[str, complex]


def _basis(s: AsymptoticSampleSet):
    cols = []
    for lam, j in s.exponent_basis:
        if lam == 0 and j == 0:
            continue
        cols.append((f"eps^-{lam:g} log^{j}", lambda e, lam=lam, j=j: e ** (-lam) * np.log(e) ** j))
    for j in range(1, s.log_powers + 1):
        if (0.0, j) not in s.exponent_basis:
            cols.append((f"log^{j}", lambda e, j=j: np.log(e) ** j))
    cols += [("1", lambda e: np.ones_like(e)), ("eps", lambda e: e), ("eps^2", lambda e: e**2)]
    return cols


def finite_part(s: AsymptoticSampleSet, max_condition: float = 1e10) -> FinitePart:
    """Least-squares fit against the declared basis; returns the constant coefficient."""
    cols = _basis(s)
    if len(s.epsilons) < len(cols) + 2:
        raise BasisInadequate(f"{len(cols)} basis functions need at least {len(cols) + 2} samples")
    e = np.asarray(s.epsilons, dtype=float)
    A = np.stack([f(e) for _, f in cols], axis=1)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > max_condition:
        raise BasisInadequate(f"design matrix condition {cond:.3g} exceeds {max_condition:.0e}")
    y = np.asarray(s.values, dtype=complex)
    coef, *_ = np.linalg.lstsq(A.astype(complex), y, rcond=None)
    residual = float(np.linalg.norm(A @ coef - y))
    names = [n for n, _ in cols]
    return FinitePart(complex(coef[names.index("1")]), residual, dict(zip(names, coef)))


def densify(eps_list: Sequence[float], count: int) -> Tuple[float, ...]:
    """Geometric grid of ``count`` points spanning the given epsilons, merged with them, decreasing."""
    lo, hi = min(eps_list), max(eps_list)
    grid = set(float(x) for x in eps_list) | set(np.geomspace(hi, lo, count).tolist())
    return tuple(sorted(grid, reverse=True))


def sweep_csv(rows: Sequence[Tuple[float, int, complex, float]]) -> str:
    """CSV text with columns ``eps,k,re,im,tail_bound``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "k", "re", "im", "tail_bound"])
    for eps, k, v, tb in rows:
        w.writerow([repr(float(eps)), k, repr(complex(v).real), repr(complex(v).imag), repr(float(tb))])
    return buf.getvalue()
