"""Periodic cyclic chains and cochains.

Chains are formal sums of words over a label alphabet; products of labels are
resolved by an explicit :class:`Alphabet`, so the Hochschild boundary ``b`` and
Connes' ``B`` act exactly (with ``Fraction`` coefficients where possible).
Cochains are multilinear functionals on operators; labels are bound to
operators only when a cochain is paired with a chain.
"""

from __future__ import annotations

import cmath
import itertools
import json
from fractions import Fraction
from math import factorial, pi
from numbers import Number
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import ClosureError, NotIdempotent, ParityError, SingularElement, UnboundLabel
from .operators import Operator, compose, identity_like

UNIT = "1"
PRUNE_TOL = 1e-14

Word = Tuple[str, ...]
Coeff = Union[int, Fraction, float, complex]
Combination = Dict[str, Coeff]


def _is_negligible(c: Coeff) -> bool:
    if isinstance(c, (int, Fraction)):
        return c == 0
    return abs(c) < PRUNE_TOL


def _is_degenerate(word: Word) -> bool:
    return UNIT in word[1:]


class CyclicChain:
    """Finite sum of ``coefficient * (a_0 (x) a_1 (x) ... (x) a_l)``.

    Words carrying the unit label in a position ``>= 1`` are identified with 0.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Union[Mapping[Word, Coeff], Iterable[Tuple[Coeff, Sequence[str]]], None] = None):
        acc: Dict[Word, Coeff] = {}
        items = terms.items() if isinstance(terms, Mapping) else ((tuple(w), c) for c, w in (terms or ()))
        for word, c in items:
            word = tuple(word)
            if not word or _is_degenerate(word):
                continue
            acc[word] = acc.get(word, 0) + c
        self._terms = {w: c for w, c in acc.items() if not _is_negligible(c)}

    @classmethod
    def word(cls, *labels: str, coeff: Coeff = 1) -> "CyclicChain":
        return cls({tuple(labels): coeff})

    @property
    def terms(self) -> Dict[Word, Coeff]:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))

    @property
    def degrees(self) -> List[int]:
        return sorted({len(w) - 1 for w in self._terms})

    def component(self, k: int) -> "CyclicChain":
        return CyclicChain({w: c for w, c in self._terms.items() if len(w) - 1 == k})

    def truncate(self, max_degree: int) -> "CyclicChain":
        return CyclicChain({w: c for w, c in self._terms.items() if len(w) - 1 <= max_degree})

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self._terms.values())

    def max_abs(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __add__(self, other: "CyclicChain") -> "CyclicChain":
        out = dict(self._terms)
        for w, c in other._terms.items():
            out[w] = out.get(w, 0) + c
        return CyclicChain(out)

    def __neg__(self) -> "CyclicChain":
        return self.scale(-1)

    def __sub__(self, other: "CyclicChain") -> "CyclicChain":
        return self + (-other)

    def scale(self, a: Coeff) -> "CyclicChain":
        return CyclicChain({w: a * c for w, c in self._terms.items()})

    def __mul__(self, a: Coeff) -> "CyclicChain":
        if not isinstance(a, Number):
            return NotImplemented
        return self.scale(a)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, CyclicChain) and (self - other).is_zero()

    def __repr__(self) -> str:
        body = " + ".join(f"({c})" + "⊗".join(w) for w, c in self.items())
        return f"CyclicChain({body or '0'})"

    # serialisation --------------------------------------------------------
    def to_json(self) -> str:
        rows = []
        for w, c in self.items():
            c = complex(c)
            rows.append({"coeff": [c.real, c.imag], "word": list(w)})
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str) -> "CyclicChain":
        rows = json.loads(text)
        return cls((complex(r["coeff"][0], r["coeff"][1]), tuple(r["word"])) for r in rows)


# alphabets ----------------------------------------------------------------

class Alphabet:
    """Multiplication oracle on labels.  The unit label ``"1"`` is handled here."""

    def product(self, a: str, b: str) -> Combination:
        if a == UNIT:
            return {b: 1}
        if b == UNIT:
            return {a: 1}
        return self._product(a, b)

    def _product(self, a: str, b: str) -> Combination:
        raise NotImplementedError


class TableAlphabet(Alphabet):
    """Alphabet given by an explicit multiplication table ``(a, b) -> {label: coeff}``."""

    def __init__(self, table: Mapping[Tuple[str, str], Union[str, Combination]]):
        self.table = {k: ({v: 1} if isinstance(v, str) else dict(v)) for k, v in table.items()}
        self.labels = sorted({x for pair in self.table for x in pair} | {UNIT})

    def _product(self, a: str, b: str) -> Combination:
        try:
            return self.table[(a, b)]
        except KeyError:
            raise ClosureError(a, b) from None


class MonomialAlphabet(Alphabet):
    """Labels ``U^k`` (``|k| <= cutoff``) with ``U^j U^k = U^{j+k}``; ``U^0`` is the unit."""

    def __init__(self, cutoff: int = 8, symbol: str = "U"):
        self.cutoff = cutoff
        self.symbol = symbol
        self.labels = [self.label(k) for k in range(-cutoff, cutoff + 1)]

    def label(self, k: int) -> str:
        if abs(k) > self.cutoff:
            raise ClosureError(f"{self.symbol}^{k}", "")
        return UNIT if k == 0 else f"{self.symbol}^{k}"

    def power(self, label: str) -> int:
        if label == UNIT:
            return 0
        head, _, exp = label.partition("^")
        if head != self.symbol or not exp:
            raise ClosureError(label, "")
        return int(exp)

    def _product(self, a: str, b: str) -> Combination:
        k = self.power(a) + self.power(b)
        if abs(k) > self.cutoff:
            raise ClosureError(a, b)
        return {self.label(k): 1}


def group_alphabet(elements: Sequence[str], mul: Callable[[str, str], str], identity: str) -> TableAlphabet:
    """Group algebra alphabet; the group identity is renamed to the unit label."""

    def rename(g: str) -> str:
        return UNIT if g == identity else g

    table = {}
    for a in elements:
        for b in elements:
            if a != identity and b != identity:
                table[(a, b)] = rename(mul(a, b))
    return TableAlphabet(table)


def _expand_product(alphabet: Alphabet, a: str, b: str) -> Combination:
    return alphabet.product(a, b)


# differentials ------------------------------------------------------------

def boundary_b(c: CyclicChain, alphabet: Alphabet) -> CyclicChain:
    """Hochschild boundary, including the wrap-around term ``(-1)^l a_l a_0 (x) ...``."""
    out: Dict[Word, Coeff] = {}

    def add(word: Word, coeff: Coeff):
        if _is_degenerate(word):
            return
        out[word] = out.get(word, 0) + coeff

    for word, coeff in c.items():
        l = len(word) - 1
        if l == 0:
            continue
        for i in range(l):
            sign = -1 if i % 2 else 1
            for lab, pc in alphabet.product(word[i], word[i + 1]).items():
                add(word[:i] + (lab,) + word[i + 2 :], sign * pc * coeff)
        sign = -1 if l % 2 else 1
        for lab, pc in alphabet.product(word[l], word[0]).items():
            add((lab,) + word[1:l], sign * pc * coeff)
    return CyclicChain(out)


def boundary_B(c: CyclicChain) -> CyclicChain:
    """``B(a_0 (x) ... (x) a_l) = sum_i (-1)^{l i} 1 (x) a_i (x) ... (x) a_{i-1}``."""
    out: Dict[Word, Coeff] = {}
    for word, coeff in c.items():
        l = len(word) - 1
        for i in range(l + 1):
            rotated = (UNIT,) + word[i:] + word[:i]
            if _is_degenerate(rotated):
                continue
            sign = -1 if (l * i) % 2 else 1
            out[rotated] = out.get(rotated, 0) + sign * coeff
    return CyclicChain(out)


def total_boundary(c: CyclicChain, alphabet: Alphabet) -> CyclicChain:
    return boundary_b(c, alphabet) + boundary_B(c)


# Chern characters -----------------------------------------------------------

LabelMatrix = Sequence[Sequence[Union[str, Combination, None]]]


def _entry(x: Union[str, Combination, None]) -> Combination:
    if x is None:
        return {}
    if isinstance(x, str):
        return {x: 1}
    return dict(x)


def _as_matrix(m: Union[str, Combination, LabelMatrix]) -> List[List[Combination]]:
    if isinstance(m, (str, dict)):
        return [[_entry(m)]]
    return [[_entry(x) for x in row] for row in m]


def _matmul(A: List[List[Combination]], B: List[List[Combination]], alphabet: Alphabet) -> List[List[Combination]]:
    n, m, p = len(A), len(B), len(B[0])
    out = [[{} for _ in range(p)] for _ in range(n)]
    for i in range(n):
        for j in range(p):
            acc: Combination = {}
            for k in range(m):
                for a, ca in A[i][k].items():
                    for b, cb in B[k][j].items():
                        for lab, c in alphabet.product(a, b).items():
                            acc[lab] = acc.get(lab, 0) + ca * cb * c
            out[i][j] = {k: v for k, v in acc.items() if not _is_negligible(v)}
    return out


def _matrix_close(A, B, tol: float = 1e-10) -> bool:
    for ra, rb in zip(A, B):
        for x, y in zip(ra, rb):
            for lab in set(x) | set(y):
                if abs(x.get(lab, 0) - y.get(lab, 0)) > tol:
                    return False
    return True


def _identity(n: int) -> List[List[Combination]]:
    return [[({UNIT: 1} if i == j else {}) for j in range(n)] for i in range(n)]


def traced_tensor(factors: Sequence[List[List[Combination]]], coeff: Coeff = 1) -> CyclicChain:
    """``tr (M_0 (x) M_1 (x) ... (x) M_k)`` with matrix indices contracted cyclically."""
    N = len(factors[0])
    k = len(factors)
    out: Dict[Word, Coeff] = {}
    for idx in itertools.product(range(N), repeat=k):
        entries = [factors[j][idx[j]][idx[(j + 1) % k]] for j in range(k)]
        if any(not e for e in entries):
            continue
        for combo in itertools.product(*(sorted(e.items()) for e in entries)):
            word = tuple(lab for lab, _ in combo)
            if _is_degenerate(word):
                continue
            c = coeff
            for _, x in combo:
                c = c * x
            out[word] = out.get(word, 0) + c
    return CyclicChain(out)


def chern_idempotent(e, degree_cap: int, alphabet: Optional[Alphabet] = None) -> CyclicChain:
    """``tr e + sum_l (-1)^l (2l)!/l! tr (e - 1/2) (x) e^{(x) 2l}`` through ``degree_cap``."""
    if degree_cap % 2:
        raise ParityError("degree_cap must be even for an idempotent")
    E = _as_matrix(e)
    N = len(E)
    if alphabet is not None and not _matrix_close(_matmul(E, E, alphabet), E):
        raise NotIdempotent("e^2 != e")
    half = [[{lab: c for lab, c in E[i][j].items()} for j in range(N)] for i in range(N)]
    for i in range(N):
        half[i][i] = dict(half[i][i])
        half[i][i][UNIT] = half[i][i].get(UNIT, 0) - Fraction(1, 2)
    chain = traced_tensor([E])
    for l in range(1, degree_cap // 2 + 1):
        coeff = (-1) ** l * (factorial(2 * l) // factorial(l))
        chain = chain + traced_tensor([half] + [E] * (2 * l), coeff)
    return chain


CH_U_PREFACTOR = 1.0 / cmath.sqrt(2j * pi)


def chern_invertible(u, u_inv, degree_cap: int, alphabet: Optional[Alphabet] = None, normalized: bool = True) -> CyclicChain:
    """``(2 pi i)^{-1/2} sum_l (-1)^l l! tr (u^{-1} (x) u)^{(x)(l+1)}`` at degrees ``1, 3, ..., degree_cap``.

    ``normalized=False`` drops the transcendental prefactor so the chain stays exact.
    """
    if degree_cap % 2 == 0:
        raise ParityError("degree_cap must be odd for an invertible")
    Um, Vm = _as_matrix(u), _as_matrix(u_inv)
    if alphabet is not None:
        one = _identity(len(Um))
        if not (_matrix_close(_matmul(Um, Vm, alphabet), one) and _matrix_close(_matmul(Vm, Um, alphabet), one)):
            raise SingularElement("u_inv is not an inverse of u")
    chain = CyclicChain()
    for l in range(0, (degree_cap - 1) // 2 + 1):
        coeff = (-1) ** l * factorial(l)
        chain = chain + traced_tensor([Vm, Um] * (l + 1), coeff)
    return chain.scale(CH_U_PREFACTOR) if normalized else chain


# cochains -------------------------------------------------------------------

Evaluator = Callable[[Sequence[Operator]], complex]


class CyclicCochain:
    """Finitely many multilinear components ``phi_k(a_0, ..., a_k)`` of one parity."""

    def __init__(self, components: Mapping[int, Evaluator], parity: str):
        if parity not in ("even", "odd"):
            raise ValueError(f"unknown parity {parity!r}")
        want = 0 if parity == "even" else 1
        for k in components:
            if k % 2 != want:
                raise ParityError(f"component of degree {k} in a {parity} cochain")
        self.components = dict(components)
        self.parity = parity

    @property
    def support(self) -> List[int]:
        return sorted(self.components)

    def __call__(self, args: Sequence[Operator]) -> complex:
        f = self.components.get(len(args) - 1)
        return complex(f(list(args))) if f is not None else 0j

    def evaluate(self, k: int, args: Sequence[Operator]) -> complex:
        if len(args) != k + 1:
            raise ValueError(f"degree {k} needs {k + 1} arguments")
        return self(args)

    def __add__(self, other: "CyclicCochain") -> "CyclicCochain":
        if other.parity != self.parity:
            raise ParityError("cannot add cochains of different parity")
        comps = dict(self.components)
        for k, g in other.components.items():
            f = comps.get(k)
            comps[k] = g if f is None else (lambda a, f=f, g=g: f(a) + g(a))
        return CyclicCochain(comps, self.parity)

    def scale(self, c: complex) -> "CyclicCochain":
        return CyclicCochain({k: (lambda a, f=f: c * f(a)) for k, f in self.components.items()}, self.parity)


def _product(a: Operator, b: Operator) -> Operator:
    return compose(a, b)


def coboundary_b(phi: Evaluator) -> Evaluator:
    """Transpose of ``b``: a degree ``k`` functional becomes degree ``k + 1``."""

    def b_phi(args: Sequence[Operator]) -> complex:
        n = len(args) - 1  # degree of the new cochain
        total = 0j
        for i in range(n):
            merged = list(args[:i]) + [_product(args[i], args[i + 1])] + list(args[i + 2 :])
            total += (-1) ** i * phi(merged)
        total += (-1) ** n * phi([_product(args[n], args[0])] + list(args[1:n]))
        return total

    return b_phi


def coboundary_B(phi: Evaluator) -> Evaluator:
    """Transpose of ``B``: a degree ``k`` functional becomes degree ``k - 1``."""

    def B_phi(args: Sequence[Operator]) -> complex:
        l = len(args) - 1
        one = identity_like(args[0])
        total = 0j
        for i in range(l + 1):
            total += (-1) ** (l * i) * phi([one] + list(args[i:]) + list(args[:i]))
        return total

    return B_phi


def cocycle_defect(phi: CyclicCochain, args: Sequence[Operator]) -> complex:
    """``(b phi_k + B phi_{k+2})(a_0, ..., a_{k+1})`` for ``k = len(args) - 2``."""
    k = len(args) - 2
    total = 0j
    if k in phi.components:
        total += coboundary_b(phi.components[k])(args)
    if k + 2 in phi.components:
        total += coboundary_B(phi.components[k + 2])(args)
    return total


def pair(phi: CyclicCochain, c: CyclicChain, bindings: Mapping[str, Operator]) -> complex:
    """``sum_k phi_k(c_k)`` with labels resolved through ``bindings``."""
    want = 0 if phi.parity == "even" else 1
    total = 0j
    for word, coeff in c.items():
        k = len(word) - 1
        if k % 2 != want:
            raise ParityError(f"{phi.parity} cochain paired with a degree-{k} chain")
        if k not in phi.components:
            continue
        try:
            ops = [bindings[lab] for lab in word]
        except KeyError as exc:
            raise UnboundLabel(f"label {exc.args[0]!r} has no bound operator") from None
        total += complex(coeff) * phi.components[k](ops)
    return total
