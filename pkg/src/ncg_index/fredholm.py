"""Fredholm modules, Connes' characters and index pairings, with independent index oracles.

Two characters are provided.  ``character_tau`` is the single-component cocycle
``tau_n`` built on the regularized trace ``Tr'``; it computes indices when
``F^2 = 1``, so the pipelines use the phase ``sign(D)`` for it.  ``character_chn``
is the multi-component cocycle ``Ch_n(F)`` that tolerates ``F^2 != 1`` and is
evaluated with the bounded transform itself.
"""

from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import factorial, gamma
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .asymptotics import Series
from .cyclic import CyclicChain, CyclicCochain, LabelMatrix, chern_idempotent, chern_invertible
from .errors import NotHermitian, ParityError, SummabilityError, SymbolError, WindowTooSmall
from .models import SpectralTriple, WindingSymbol
from .operators import (
    BandOperator,
    CertifiedValue,
    Operator,
    adjoint,
    certified_trace,
    commutator,
    compose,
    identity_like,
    kernel_dimension,
    operator_function,
    operator_norm,
)

ODD_PREFACTOR = cmath.sqrt(2j)
# Fixed by the circle: the raw tau_1 pairing with Ch(shift) is +1 while ind T_shift = -1.
KAPPA = -1.0
EDGE_MASS_TOL = 1e-8


@dataclass(frozen=True)
class FredholmModule:
    F: Operator
    parity: str
    p: float
    grading: Optional[Operator] = None

    @property
    def backend(self) -> str:
        return "banded" if isinstance(self.F, BandOperator) else "dense"

    @property
    def defect(self) -> Operator:
        """``1 - F^2``."""
        return _defect(self)

    def defect_power(self, i: int) -> Operator:
        return _defect_power(self, i)


@lru_cache(maxsize=64)
def _defect(M: FredholmModule) -> Operator:
    return identity_like(M.F) - compose(M.F, M.F)


@lru_cache(maxsize=256)
def _defect_power(M: FredholmModule, i: int) -> Operator:
    if i == 0:
        return identity_like(M.F)
    return compose(_defect_power(M, i - 1), _defect(M))


# FredholmModule is hashed by identity so the caches above are per instance
FredholmModule.__hash__ = object.__hash__  # type: ignore[assignment]
FredholmModule.__eq__ = lambda self, other: self is other  # type: ignore[assignment]


def _diag_series(band, transform):
    out = []
    for s in (band.plus, band.minus) if band is not None else (None, None):
        try:
            out.append(transform(s) if s is not None else None)
        except (ValueError, ZeroDivisionError):
            out.append(None)
    return out


def _bounded_series(s: Series) -> Series:
    """Series of ``d / sqrt(1 + d^2)`` from the series of ``d``."""
    if s.growth:
        g = s.reciprocal()
        sign = 1.0 if s.coeff(s.low).real > 0 else -1.0
        return (Series.constant(1.0) + g * g).power_real(-0.5).scale(sign)
    return s * (Series.constant(1.0) + s * s).power_real(-0.5)


def bounded_transform(T: SpectralTriple) -> FredholmModule:
    """``F = D (1 + D^2)^{-1/2}``."""
    D = T.D
    f = lambda x: x / np.sqrt(1.0 + x * x)
    if isinstance(D, BandOperator):
        plus, minus = _diag_series(D.band(0), _bounded_series)
        F = operator_function(D, f, plus, minus)
    else:
        F = operator_function(D, f)
    return FredholmModule(F, T.parity, T.p, T.grading)


def phase_module(T: SpectralTriple) -> FredholmModule:
    """``F = sign(D)`` with ``sign(0) = +1``, so that ``F^2 = 1`` exactly."""
    D = T.D
    f = lambda x: np.where(x >= 0, 1.0, -1.0)
    if isinstance(D, BandOperator):
        def sign_series(s: Series) -> Series:
            lead = s.coeff(s.low)
            return Series.constant(1.0 if lead.real > 0 else -1.0)

        plus, minus = _diag_series(D.band(0), sign_series)
        F = operator_function(D, f, plus, minus)
    else:
        F = operator_function(D, f)
    return FredholmModule(F, T.parity, T.p, T.grading)


# regularized trace and characters ---------------------------------------------------

def trace_prime(M: FredholmModule, T: Operator, window: int = 256, extended: bool = False) -> CertifiedValue:
    """``1/2 Tr F (F T + T F)``, plus ``Tr (1 - F^2) T`` when ``extended``."""
    F = M.F
    sym = compose(F, compose(F, T) + compose(T, F))
    val = certified_trace(sym, window).scale(0.5)
    if extended:
        val = val + certified_trace(compose(M.defect, T), window)
    return val


def _word_operator(M: FredholmModule, args: Sequence[Operator], powers: Optional[Sequence[int]] = None) -> Operator:
    """``gamma a_0 (1-F^2)^{i_0} [F, a_1] (1-F^2)^{i_1} ... [F, a_k] (1-F^2)^{i_k}``."""
    op = args[0]
    if M.parity == "even":
        op = compose(M.grading, op)
    if powers and powers[0]:
        op = compose(op, M.defect_power(powers[0]))
    for j, a in enumerate(args[1:], start=1):
        op = compose(op, commutator(M.F, a))
        if powers and powers[j]:
            op = compose(op, M.defect_power(powers[j]))
    return op


def _check_degree(M: FredholmModule, n: int) -> None:
    if (n % 2 == 0) != (M.parity == "even"):
        raise ParityError(f"degree {n} does not match a {M.parity} module")


def tau_prefactor(parity: str, n: int) -> complex:
    if parity == "even":
        return factorial(n // 2) / factorial(n)
    return ODD_PREFACTOR * gamma(n / 2 + 1) / factorial(n)


def _tau_evaluator(M: FredholmModule, n: int, window: int, extended: bool):
    _check_degree(M, n)
    if n <= M.p - 1:
        raise SummabilityError(f"tau_{n} needs n > p - 1 = {M.p - 1:g}")
    pref = tau_prefactor(M.parity, n)

    def ev(args) -> CertifiedValue:
        return trace_prime(M, _word_operator(M, args), window, extended).scale(pref)

    return ev


def character_tau(M: FredholmModule, n: int, window: int = 256, extended: bool = False) -> CyclicCochain:
    """``tau_n(F)``: one component of degree ``n``."""
    ev = _tau_evaluator(M, n, window, extended)
    return CyclicCochain({n: lambda args: ev(args).value}, M.parity)


def compositions(total: int, parts: int):
    """All ``(i_0, ..., i_{parts-1})`` of nonnegative integers summing to ``total``."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def chn_prefactor(parity: str, n: int, k: int) -> complex:
    base = factorial(n // 2) if parity == "even" else gamma(n / 2 + 1) * ODD_PREFACTOR
    return base / factorial((n + k) // 2)


def _chn_evaluators(M: FredholmModule, n: int, window: int, extended: bool):
    _check_degree(M, n)
    if (n <= M.p - 1) if extended else (n <= M.p):
        raise SummabilityError(f"Ch_{n} needs n > p{' - 1' if extended else ''}")
    evs = {}
    for k in range(n % 2, n + 1, 2):
        pref = chn_prefactor(M.parity, n, k)

        def ev(args, k=k, pref=pref) -> CertifiedValue:
            total = CertifiedValue(0j, 0.0)
            for powers in compositions((n - k) // 2, k + 1):
                op = _word_operator(M, args, powers)
                total = total + (trace_prime(M, op, window, True) if extended else certified_trace(op, window))
            return total.scale(pref)

        evs[k] = ev
    return evs


def character_chn(M: FredholmModule, n: int, window: int = 256, extended: bool = False) -> CyclicCochain:
    """``Ch_n(F)`` with components ``k = n, n-2, ..., (0 or 1)``."""
    evs = _chn_evaluators(M, n, window, extended)
    return CyclicCochain({k: (lambda args, f=f: f(args).value) for k, f in evs.items()}, M.parity)


def pair_certified(evaluators, chain: CyclicChain, bindings: Mapping[str, Operator]) -> CertifiedValue:
    """Like :func:`~ncg_index.cyclic.pair` but accumulating tail bounds."""
    total = CertifiedValue(0j, 0.0)
    for word, coeff in chain.items():
        f = evaluators.get(len(word) - 1)
        if f is not None:
            total = total + f([bindings[lab] for lab in word]).scale(complex(coeff))
    return total


# oracles -----------------------------------------------------------------------------

def winding_number(s: WindingSymbol, samples: int = 4096) -> int:
    """``(1/2 pi i) oint u'/u`` by the trapezoid rule, rounded after an error check."""
    probe = np.linspace(0.0, 2 * np.pi, 1024, endpoint=False)
    if np.min(np.abs(s(probe))) <= 1e-6:
        raise SymbolError("symbol vanishes on the circle")
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    g = s.derivative(theta) / s(theta)
    w = np.mean(g) / 1j
    h = 2 * np.pi / samples
    # trapezoid error estimate from the sampled second derivative of u'/u
    g2 = (np.roll(g, -1) - 2 * g + np.roll(g, 1)) / h**2
    bound = h**2 * float(np.max(np.abs(g2))) / 12.0 + abs(w.imag)
    if bound >= 0.5:
        raise SymbolError(f"winding quadrature error bound {bound:.3g} is not below 0.5")
    return int(round(w.real))


@dataclass(frozen=True)
class KernelCount:
    genuine: int
    artifacts: int


def _classify_kernel(M: np.ndarray, edge: int, tol: float) -> KernelCount:
    """Null vectors of ``M`` split by their mass in the last ``edge`` coordinates."""
    if M.size == 0:
        return KernelCount(M.shape[1], 0)
    _, s, vh = np.linalg.svd(M)
    top = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s >= tol * top))
    null = vh[rank:].conj().T
    if null.shape[1] == 0:
        return KernelCount(0, 0)
    tail = null[-edge:, :]
    masses = np.linalg.eigvalsh(tail.conj().T @ tail)
    genuine = int(np.sum(masses < EDGE_MASS_TOL))
    return KernelCount(genuine, null.shape[1] - genuine)


def toeplitz_index(u: BandOperator, window: int, tol: float = 1e-8) -> Tuple[int, Dict[int, Tuple[KernelCount, KernelCount]]]:
    """``dim ker T_u - dim ker T_u^*`` for ``T_u`` compressed to ``0..window``.

    The window must be wide enough that the counts of genuine kernel vectors
    agree at ``window // 2`` and ``window``.
    """
    edge = max(8, 2 * u.bandwidth)
    if window <= 2 * edge:
        raise WindowTooSmall(f"window {window} must exceed twice the edge zone {edge}")
    counts = {}
    for W in (window // 2, window):
        A = u.window_matrix(0, W)
        counts[W] = (_classify_kernel(A, edge, tol), _classify_kernel(A.conj().T, edge, tol))
    (k1, c1), (k2, c2) = counts[window // 2], counts[window]
    if (k1.genuine, c1.genuine) != (k2.genuine, c2.genuine):
        raise WindowTooSmall(f"kernel counts changed between windows {window // 2} and {window}")
    return k2.genuine - c2.genuine, counts


def _pairing_bindings(u: Operator, u_inv: Operator) -> Dict[str, Operator]:
    return {"1": identity_like(u), "u": u, "u^-1": u_inv}


def index_pairing_odd(
    M: FredholmModule,
    u: Operator,
    u_inv: Optional[Operator] = None,
    method: str = "direct",
    n: int = 1,
    window: int = 256,
    calibrated: bool = True,
) -> CertifiedValue:
    """Index of the Toeplitz compression of ``u``.

    ``direct`` counts kernels on the lattice; ``tau`` and ``chn`` pair the
    corresponding character with ``Ch(u)`` and divide by ``KAPPA`` when
    ``calibrated``.
    """
    if method == "direct":
        if not isinstance(u, BandOperator):
            P = 0.5 * (identity_like(M.F) + M.F)
            return CertifiedValue(float(_dense_toeplitz_index(P, u)), 0.0)
        ind, _ = toeplitz_index(u, window)
        return CertifiedValue(float(ind), 0.0)
    if u_inv is None:
        raise SymbolError("pairing methods need the inverse of u")
    chain = chern_invertible("u", "u^-1", n)
    if method == "tau":
        evs = {n: _tau_evaluator(M, n, window, False)}
    elif method == "chn":
        evs = _chn_evaluators(M, n, window, False)
    else:
        raise ValueError(f"unknown method {method!r}")
    val = pair_certified(evs, chain, _pairing_bindings(u, u_inv))
    return val.scale(1.0 / KAPPA) if calibrated else val


def _dense_toeplitz_index(P: np.ndarray, u: np.ndarray) -> int:
    evals, V = np.linalg.eigh(P)
    Q = V[:, evals > 0.5]
    Tu = Q.conj().T @ u @ Q
    return kernel_dimension(Tu) - kernel_dimension(Tu.conj().T)


def calibrate_kappa(window: int = 64) -> float:
    """Recompute the calibration constant on the circle: raw tau_1 pairing over the direct index."""
    from .models import build_circle_dirac

    T = build_circle_dirac()
    M = phase_module(T)
    U, Ustar = T.generators["U"], T.generators["U*"]
    raw = index_pairing_odd(M, U, Ustar, "tau", 1, window, calibrated=False).value
    direct = index_pairing_odd(M, U, method="direct", window=window).value
    return float((raw / direct).real)


# even pairing ----------------------------------------------------------------------------

def amplify(e: LabelMatrix, bindings: Mapping[str, np.ndarray]) -> np.ndarray:
    """``pi(e)`` as a block matrix acting on ``H (x) C^N`` (blocks indexed by the matrix entries)."""
    rows = []
    dim = next(iter(bindings.values())).shape[0]
    for row in e:
        blocks = []
        for x in row:
            block = np.zeros((dim, dim), dtype=complex)
            if x is not None:
                for lab, c in ({x: 1} if isinstance(x, str) else x).items():
                    block = block + complex(c) * bindings[lab]
            blocks.append(block)
        rows.append(blocks)
    return np.block(rows)


def _as_label_matrix(e) -> LabelMatrix:
    if isinstance(e, (str, dict)):
        return [[e]]
    return e


def index_pairing_even(
    M: FredholmModule,
    e,
    bindings: Mapping[str, np.ndarray],
    method: str = "direct",
    n: int = 0,
    window: int = 256,
) -> CertifiedValue:
    """Index of ``F_e = e F e : e H^+ -> e H^-`` (dense modules).

    ``tau`` uses ``tau_n`` with the extended ``Tr'`` so that ``n = 0`` is
    admissible when ``p < 1``; ``chn`` uses ``Ch_n(F)``.
    """
    E = _as_label_matrix(e)
    if M.parity != "even":
        raise ParityError("even pairing needs an even module")
    if method == "direct":
        return CertifiedValue(float(_even_direct(M, amplify(E, bindings), len(E))), 0.0)
    chain = chern_idempotent(E, n)
    if method == "tau":
        evs = {n: _tau_evaluator(M, n, window, True)}
    elif method == "chn":
        evs = _chn_evaluators(M, n, window, n <= M.p)
    else:
        raise ValueError(f"unknown method {method!r}")
    full = dict(bindings)
    full.setdefault("1", identity_like(M.F))
    return pair_certified(evs, chain, full)


def _even_direct(M: FredholmModule, pe: np.ndarray, N: int) -> int:
    g = np.kron(np.eye(N), M.grading)
    F = np.kron(np.eye(N), M.F)
    one = np.eye(g.shape[0])

    def range_basis(A):
        u, s, _ = np.linalg.svd(A)
        top = s[0] if s.size and s[0] > 0 else 1.0
        return u[:, : int(np.sum(s > 1e-10 * top))]

    Qp = range_basis(pe @ (0.5 * (one + g)))
    Qm = range_basis(pe @ (0.5 * (one - g)))
    Fe = Qm.conj().T @ pe @ F @ Qp
    if Fe.size == 0:
        return Qp.shape[1] - Qm.shape[1]
    return kernel_dimension(Fe) - kernel_dimension(Fe.conj().T)
