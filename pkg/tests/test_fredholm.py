import math

import numpy as np
import pytest

from _support import random_finite_triple
from ncg_index.cyclic import CyclicChain, chern_invertible, pair
from ncg_index.errors import SummabilityError, SymbolError, WindowTooSmall
from ncg_index.fredholm import (
    KAPPA,
    FredholmModule,
    bounded_transform,
    calibrate_kappa,
    character_chn,
    character_tau,
    compositions,
    index_pairing_even,
    index_pairing_odd,
    phase_module,
    toeplitz_index,
    trace_prime,
    winding_number,
)
from ncg_index.models import WindingSymbol, build_circle_dirac, build_finite_even, finite_index, multiplication_operator
from ncg_index.operators import BandOperator, commutator, compose


@pytest.fixture(scope="module")
def circle():
    return build_circle_dirac(3)


def test_bounded_transform_on_circle(circle):
    F = bounded_transform(circle).F
    ns = np.arange(-30, 31)
    assert np.allclose(F.band(0)(ns), ns / np.sqrt(1 + ns**2.0))
    # the declared series reproduces the entries far out
    s = F.band(0).plus
    n = 400.0
    approx = sum(s.coeff(j) * n ** (-j) for j in range(0, s.order + 1))
    assert abs(approx - n / math.sqrt(1 + n * n)) < 1e-15


def test_bounded_transform_finite_defect_rank():
    T = build_finite_even(2, 1, np.array([[1.0, 0.0]]))
    M = bounded_transform(T)
    D = T.D
    assert np.allclose(M.defect, np.linalg.inv(np.eye(3) + D @ D))
    assert np.linalg.matrix_rank(M.defect) == 3


def test_bounded_transform_of_zero():
    T = build_finite_even(1, 1, np.zeros((1, 1)))
    M = bounded_transform(T)
    assert np.allclose(M.F, 0) and np.allclose(M.defect, np.eye(2))


def test_trace_prime_is_trace_when_F_squared_is_one():
    rng = np.random.default_rng(0)
    T = random_finite_triple(rng, 3, 3)
    M = phase_module(T)
    A = rng.normal(size=(6, 6))
    assert abs(trace_prime(M, A).value - np.trace(A)) < 1e-12
    assert trace_prime(M, np.zeros((6, 6))).value == 0


def test_trace_prime_converges_on_circle(circle):
    M = bounded_transform(circle)
    U, Us = circle.generators["U"], circle.generators["U*"]
    T = compose(Us, commutator(M.F, U))
    vals = [trace_prime(M, T, W) for W in (64, 128, 256)]
    assert abs(vals[2].value - vals[1].value) <= vals[1].tail_bound
    assert abs(vals[1].value - vals[0].value) <= vals[0].tail_bound
    assert vals[2].tail_bound < vals[0].tail_bound


def test_tau_one_formula_substitution():
    rng = np.random.default_rng(1)
    n = 5
    H = rng.normal(size=(n, n))
    F = np.linalg.qr(rng.normal(size=(n, n)))[0]
    F = F @ np.diag([1, -1, 1, -1, 1]) @ F.T  # symmetric with F^2 = 1
    M = FredholmModule(F, "odd", 0.5)
    a0, a1 = rng.normal(size=(n, n)), rng.normal(size=(n, n))
    want = np.sqrt(2j) * math.gamma(1.5) * 0.5 * np.trace(F @ (F @ a0 @ (F @ a1 - a1 @ F) + a0 @ (F @ a1 - a1 @ F) @ F))
    assert abs(character_tau(M, 1)([a0, a1]) - want) < 1e-12
    assert abs(character_tau(M, 1)([a0, np.eye(n)])) == 0


def test_summability_checks():
    M = FredholmModule(np.eye(2), "odd", 3.5)
    with pytest.raises(SummabilityError):
        character_tau(M, 1)
    with pytest.raises(SummabilityError):
        character_chn(M, 3)


def test_chn_top_component_matches_tau():
    rng = np.random.default_rng(2)
    T = random_finite_triple(rng, 2, 2)
    M = bounded_transform(T)
    args = [T.generators["a0"], T.generators["a1"], T.generators["a2"]]
    top = character_chn(M, 2, extended=True).components[2]
    tau = character_tau(M, 2, extended=True)
    # at k = n both prefactors are (n/2)! / n! and the only composition is empty
    assert abs(top(args) - tau(args)) < 1e-12


def test_chn_collapses_to_top_degree_when_F_squared_is_one():
    rng = np.random.default_rng(3)
    T = random_finite_triple(rng, 2, 2)
    M = phase_module(T)
    ch = character_chn(M, 4, extended=True)
    args = [T.generators["a0"], T.generators["a1"], T.generators["a2"]]
    assert abs(ch(args)) < 1e-13
    assert abs(ch([args[0]])) < 1e-13


def test_compositions_count():
    assert sorted(compositions(2, 2)) == [(0, 2), (1, 1), (2, 0)]
    assert len(list(compositions(3, 4))) == math.comb(6, 3)


@pytest.mark.parametrize("coeffs, w", [({1: 1.0}, 1), ({0: 2.0}, 0), ({-2: 1.0}, -2), ({1: 1.0, 0: 0.3}, 1), ({2: 1.0, 0: 3.0}, 0)])
def test_winding_examples(coeffs, w):
    assert winding_number(WindingSymbol(coeffs)) == w


def test_winding_rejects_vanishing_symbol():
    with pytest.raises(SymbolError):
        winding_number(WindingSymbol({1: 1.0, 0: 1.0}))


def test_calibration_constant():
    assert calibrate_kappa() == KAPPA == -1.0


@pytest.mark.parametrize("w", [-2, -1, 0, 1, 2])
def test_odd_pairing_direct_and_tau(w):
    s = WindingSymbol({w: 1.0})
    u = multiplication_operator(s)
    ui = multiplication_operator(s.inverse())
    T = build_circle_dirac()
    direct = index_pairing_odd(phase_module(T), u, method="direct", window=128)
    tau = index_pairing_odd(phase_module(T), u, ui, "tau", 1, 128)
    assert direct.value == -w
    assert abs(tau.value - direct.value) <= tau.tail_bound + 1e-12


def test_direct_index_of_non_monomial_symbol():
    u = multiplication_operator(WindingSymbol({2: 1.0, 1: 0.2, -1: 0.1}))
    assert index_pairing_odd(phase_module(build_circle_dirac()), u, method="direct", window=128).value == -2


def test_window_too_small():
    with pytest.raises(WindowTooSmall):
        toeplitz_index(BandOperator.shift(1), 2)


def test_tau_pairing_needs_inverse(circle):
    with pytest.raises(SymbolError):
        index_pairing_odd(phase_module(circle), circle.generators["U"], method="tau")


def test_pair_tau_with_chern_of_shift(circle):
    M = phase_module(circle)
    ch = chern_invertible("U", "U*", 1)
    raw = pair(character_tau(M, 1, 128), ch, circle.bindings())
    assert abs(raw - (-KAPPA) * 1.0) < 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_even_pairings_with_unit(seed):
    rng = np.random.default_rng(seed)
    dp, dm = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    T = random_finite_triple(rng, dp, dm, ngen=0, rank_drop=int(min(dp, dm) > 1))
    ind = finite_index(dp, dm, T.D[dp:, :dp])
    M = bounded_transform(T)
    b = T.bindings()
    for method, n in (("direct", 0), ("tau", 0), ("chn", 2), ("chn", 4)):
        v = index_pairing_even(M, "1", b, method, n)
        assert abs(v.value - ind) < 1e-8, (method, n)


def test_even_pairing_with_zero_idempotent():
    T = random_finite_triple(np.random.default_rng(9), 2, 2, ngen=0)
    T = T.with_generators({"z": np.zeros((4, 4), dtype=complex)})
    M = bounded_transform(T)
    for method in ("direct", "tau", "chn"):
        n = 2 if method == "chn" else 0
        assert abs(index_pairing_even(M, "z", T.bindings(), method, n).value) < 1e-12


def test_even_pairing_with_diagonal_projector_commuting_with_D():
    # D splits as a 2|1 block (P = [1 0]) plus a 1|1 invertible block
    P = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
    e = np.diag([1, 1, 0, 1, 0]).astype(complex)  # keeps the first block only
    T = build_finite_even(3, 2, P, {"e": e})
    M = bounded_transform(T)
    assert np.allclose(e @ T.D, T.D @ e)
    # compressed block: C^2 -> C^1 via [1 0], index 1
    want = finite_index(2, 1, np.array([[1.0, 0.0]]))
    for method, n in (("direct", 0), ("tau", 0), ("chn", 2)):
        assert abs(index_pairing_even(M, "e", T.bindings(), method, n).value - want) < 1e-8
