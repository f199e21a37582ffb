"""Model spectral triples: the circle Dirac operator on the lattice and finite graded triples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .asymptotics import Series
from .errors import DimensionMismatch, ParityError, SymbolError
from .operators import (
    BandOperator,
    Operator,
    adjoint,
    commutator,
    compose,
    identity_like,
    operator_norm,
)

UNIT = "1"


@dataclass(frozen=True)
class SpectralTriple:
    generators: Mapping[str, Operator]
    D: Operator
    parity: str
    p: float
    grading: Optional[Operator] = None
    name: str = ""
    # finite-part ansatz for rescaled JLO pairings: (lambda, log power) pairs for eps^-lambda log^j eps
    asymptotic_basis: Tuple[Tuple[float, int], ...] = ()

    @property
    def backend(self) -> str:
        return "banded" if isinstance(self.D, BandOperator) else "dense"

    @property
    def dimension(self) -> Optional[int]:
        return None if self.backend == "banded" else self.D.shape[0]

    def unit(self) -> Operator:
        return identity_like(self.D)

    def bindings(self, extra: Optional[Mapping[str, Operator]] = None) -> Dict[str, Operator]:
        out: Dict[str, Operator] = {UNIT: self.unit()}
        out.update(self.generators)
        if extra:
            out.update(extra)
        return out

    def with_generators(self, extra: Mapping[str, Operator]) -> "SpectralTriple":
        gens = dict(self.generators)
        gens.update(extra)
        return SpectralTriple(gens, self.D, self.parity, self.p, self.grading, self.name, self.asymptotic_basis)


# circle model -------------------------------------------------------------

def lattice_dirac() -> BandOperator:
    """``D e_n = n e_n`` on ``l^2(Z)``."""
    return BandOperator.diagonal(
        lambda n: n.astype(complex), Series.monomial(-1, 1.0), Series.monomial(-1, -1.0)
    )


def shift_power(k: int) -> BandOperator:
    return BandOperator.shift(k)


def build_circle_dirac(monomial_cutoff: int = 0) -> SpectralTriple:
    """Odd triple of the circle in the Fourier basis; ``U`` is multiplication by ``e^{i theta}``.

    ``monomial_cutoff = K`` additionally binds the labels ``U^k`` for ``|k| <= K``.
    """
    gens: Dict[str, Operator] = {"U": shift_power(1), "U*": shift_power(-1)}
    for k in range(-monomial_cutoff, monomial_cutoff + 1):
        if k != 0:
            gens[monomial_label(k)] = shift_power(k)
    return SpectralTriple(
        gens, lattice_dirac(), "odd", 1.5, None, "circle", asymptotic_basis=((1.0, 0),)
    )


def monomial_label(k: int) -> str:
    return UNIT if k == 0 else f"U^{k}"


@dataclass(frozen=True)
class WindingSymbol:
    """Trigonometric polynomial ``u(theta) = sum_k c_k e^{ik theta}``."""

    fourier_coefficients: Mapping[int, complex]
    unitary: bool = False

    def __post_init__(self):
        if not self.fourier_coefficients:
            raise SymbolError("empty symbol")
        if self.unitary:
            theta = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
            mod = np.abs(self(theta))
            if np.max(np.abs(mod - 1.0)) > 1e-9:
                raise SymbolError("symbol flagged unitary but |u| != 1")

    @classmethod
    def monomial(cls, k: int, c: complex = 1.0) -> "WindingSymbol":
        return cls({k: c}, unitary=abs(abs(c) - 1.0) < 1e-12)

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return sum(c * np.exp(1j * k * theta) for k, c in self.fourier_coefficients.items())

    def derivative(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return sum(1j * k * c * np.exp(1j * k * theta) for k, c in self.fourier_coefficients.items())

    def __mul__(self, other: "WindingSymbol") -> "WindingSymbol":
        out: Dict[int, complex] = {}
        for k, c in self.fourier_coefficients.items():
            for l, d in other.fourier_coefficients.items():
                out[k + l] = out.get(k + l, 0j) + c * d
        return WindingSymbol({k: c for k, c in out.items() if c != 0} or {0: 0j})

    def monomial_degree(self) -> Optional[int]:
        nz = [k for k, c in self.fourier_coefficients.items() if c != 0]
        return nz[0] if len(nz) == 1 else None

    def inverse(self) -> "WindingSymbol":
        k = self.monomial_degree()
        if k is None:
            raise SymbolError("only monomial symbols have a finite-band inverse")
        c = complex(self.fourier_coefficients[k])
        if c == 0:
            raise SymbolError("zero symbol is not invertible")
        return WindingSymbol({-k: 1.0 / c}, unitary=self.unitary)


def multiplication_operator(s: WindingSymbol) -> BandOperator:
    """Multiplication by the symbol in the Fourier basis: offset ``k`` carries ``c_k``."""
    if not s.fourier_coefficients:
        raise SymbolError("empty symbol")
    op = BandOperator.zero()
    for k, c in sorted(s.fourier_coefficients.items()):
        op = op + BandOperator.shift(k, c)
    return op


# finite even triples --------------------------------------------------------

def build_finite_even(
    dim_plus: int,
    dim_minus: int,
    P: np.ndarray,
    generators: Optional[Mapping[str, np.ndarray]] = None,
    p: float = 0.5,
    name: str = "finite-even",
) -> SpectralTriple:
    """``D = [[0, P*], [P, 0]]`` with grading ``diag(1, -1)`` on ``C^{dim_plus} + C^{dim_minus}``."""
    P = np.asarray(P, dtype=complex).reshape(dim_minus, dim_plus) if np.size(P) == dim_minus * dim_plus else None
    if P is None:
        raise DimensionMismatch(f"P must map C^{dim_plus} to C^{dim_minus}")
    n = dim_plus + dim_minus
    D = np.zeros((n, n), dtype=complex)
    D[dim_plus:, :dim_plus] = P
    D[:dim_plus, dim_plus:] = P.conj().T
    gamma = np.diag(np.r_[np.ones(dim_plus), -np.ones(dim_minus)]).astype(complex)
    gens: Dict[str, np.ndarray] = {}
    for label, a in (generators or {}).items():
        a = np.asarray(a, dtype=complex)
        if a.shape != (n, n):
            raise DimensionMismatch(f"generator {label!r} has shape {a.shape}, expected {(n, n)}")
        if np.abs(a[:dim_plus, dim_plus:]).max(initial=0) > 1e-12 or np.abs(a[dim_plus:, :dim_plus]).max(initial=0) > 1e-12:
            raise ParityError(f"generator {label!r} is not even (not block diagonal)")
        gens[label] = a
    return SpectralTriple(gens, D, "even", p, gamma, name)


def finite_index(dim_plus: int, dim_minus: int, P: np.ndarray, tol: float = 1e-8) -> int:
    from .operators import kernel_dimension

    P = np.asarray(P, dtype=complex).reshape(dim_minus, dim_plus)
    return kernel_dimension(P, tol) - kernel_dimension(P.conj().T, tol)


# validation -------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    defect: float


@dataclass
class ValidationReport:
    checks: List[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_triple(T: SpectralTriple, tol: float = 1e-12, window: int = 64) -> ValidationReport:
    report = ValidationReport()
    D = T.D
    if isinstance(D, BandOperator):
        ns = np.arange(-window, window + 1)
        off = [d for d in D.offsets if d != 0]
        imag = float(np.max(np.abs(D.band(0)(ns).imag))) if D.band(0) else 0.0
        report.checks.append(Check("self_adjoint", not off and imag == 0.0, imag + len(off)))
    else:
        defect = float(np.linalg.norm(D - D.conj().T, 2))
        scale = max(1.0, float(np.linalg.norm(D, 2)))
        report.checks.append(Check("self_adjoint", defect <= tol * scale, defect))
    if T.parity == "even":
        g = T.grading
        if g is None:
            report.checks.append(Check("grading_present", False, float("inf")))
        else:
            one = identity_like(D)
            sq = float(operator_norm(compose(g, g) - one, window))
            report.checks.append(Check("grading_involution", sq <= tol, sq))
            anti = float(operator_norm(compose(g, D) + compose(D, g), window))
            report.checks.append(Check("grading_anticommutes_D", anti <= tol * max(1.0, operator_norm(D, window)), anti))
            for label, a in T.generators.items():
                dev = float(operator_norm(commutator(g, a), window))
                report.checks.append(Check(f"even_generator[{label}]", dev <= tol, dev))
    for label, a in T.generators.items():
        c = commutator(D, a)
        if isinstance(c, BandOperator):
            growth = any((b.plus is not None and b.plus.growth) or (b.minus is not None and b.minus.growth) for b in c.bands.values())
            small = c.norm_bound(window) if not growth else float("inf")
            big = c.norm_bound(4 * window) if not growth else float("inf")
            bounded = not growth and big <= small * (1 + 1e-9) + 1e-12
            ns = np.arange(-window, window + 1)
            defect = max((float(np.max(np.abs(b(ns)))) for b in c.bands.values()), default=0.0) if growth else big
            report.checks.append(Check(f"bounded_commutator[{label}]", bounded, float(defect)))
        else:
            report.checks.append(Check(f"bounded_commutator[{label}]", True, float(np.linalg.norm(c, 2))))
    return report
