import numpy as np
import pytest

from ncg_index.errors import DimensionMismatch, ParityError, SymbolError
from ncg_index.fredholm import winding_number
from ncg_index.models import (
    SpectralTriple,
    WindingSymbol,
    build_circle_dirac,
    build_finite_even,
    finite_index,
    multiplication_operator,
    validate_triple,
)
from ncg_index.asymptotics import Series
from ncg_index.operators import Band, BandOperator, commutator, compose


def test_circle_entries():
    T = build_circle_dirac()
    assert T.D.entry(5, 5) == 5
    C = commutator(T.D, T.generators["U"])
    for n in range(-20, 21):
        assert C.entry(n + 1, n) == 1
    I = compose(T.generators["U*"], T.generators["U"])
    assert all(I.entry(n, n) == 1 for n in range(-5, 6)) and I.offsets == (0,)


def test_circle_monomial_labels():
    T = build_circle_dirac(3)
    assert T.generators["U^-3"].offsets == (-3,)
    assert "U^4" not in T.generators
    assert T.bindings()["1"].offsets == (0,)


def test_multiplication_operator_examples():
    S = multiplication_operator(WindingSymbol({1: 1.0}))
    assert S.offsets == (1,) and S.entry(4, 3) == 1
    I = multiplication_operator(WindingSymbol({0: 1.0}))
    assert I.offsets == (0,) and I.entry(2, 2) == 1
    s = WindingSymbol({-2: 1.0})
    assert multiplication_operator(s).offsets == (-2,)
    assert winding_number(s) == -2


def test_symbol_helpers():
    s = WindingSymbol({1: 1.0, 0: 0.25})
    theta = np.linspace(0, 6, 7)
    assert np.allclose(s(theta), np.exp(1j * theta) + 0.25)
    assert s.monomial_degree() is None
    with pytest.raises(SymbolError):
        s.inverse()
    inv = WindingSymbol.monomial(3, 2.0).inverse()
    assert inv.fourier_coefficients == {-3: 0.5}
    with pytest.raises(SymbolError):
        WindingSymbol({1: 0.5}, unitary=True)


@pytest.mark.parametrize(
    "dp, dm, P, ind",
    [
        (2, 1, [[1, 0]], 1),
        (1, 1, [[0]], 0),
        (2, 2, [[2, 1], [1, 1]], 0),
        (1, 3, [[1], [0], [0]], -2),
    ],
)
def test_finite_index_examples(dp, dm, P, ind):
    assert finite_index(dp, dm, np.array(P, dtype=float)) == ind
    T = build_finite_even(dp, dm, np.array(P, dtype=float))
    assert T.parity == "even" and T.D.shape == (dp + dm,) * 2


def test_finite_even_rejects_bad_input():
    with pytest.raises(DimensionMismatch):
        build_finite_even(2, 2, np.ones((3, 2)))
    odd_gen = np.zeros((3, 3))
    odd_gen[0, 2] = 1
    with pytest.raises(ParityError):
        build_finite_even(2, 1, np.ones((1, 2)), {"a": odd_gen})


def test_validate_circle_passes():
    assert validate_triple(build_circle_dirac(2)).ok


def test_validate_flags_missigned_grading():
    T = build_finite_even(2, 1, np.array([[1.0, 0.0]]))
    bad = SpectralTriple(T.generators, T.D, "even", T.p, np.eye(3, dtype=complex))
    rep = validate_triple(bad)
    chk = rep["grading_anticommutes_D"]
    assert not chk.passed
    assert abs(chk.defect - 2 * np.linalg.norm(T.D, 2)) < 1e-12


def test_validate_flags_unbounded_commutator():
    T = build_circle_dirac()
    weighted = BandOperator({1: Band(lambda n: n.astype(complex), Series.monomial(-1, 1.0), Series.monomial(-1, -1.0))})
    rep = validate_triple(T.with_generators({"W": weighted}))
    assert not rep["bounded_commutator[W]"].passed
    assert rep["bounded_commutator[U]"].passed
