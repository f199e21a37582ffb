"""Acceptance criteria with pinned tolerances.

Each test records its sub-checks through the ``criterion`` fixture, and the
session summary prints one PASS/FAIL line per criterion.  The Hölder check
reads the global log filled by the circle and finite-triple JLO runs, so this
module is meant to run in file order.
"""

import itertools
import json
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from _support import euler_gamma_em, random_finite_triple, zeta_em
from ncg_index.asymptotics import Series
from ncg_index.calculus import abs_d_power
from ncg_index.cli import run
from ncg_index.config import load_config
from ncg_index.cyclic import (
    UNIT,
    CyclicChain,
    TableAlphabet,
    boundary_B,
    boundary_b,
    chern_idempotent,
    chern_invertible,
    cocycle_defect,
    coboundary_B,
    coboundary_b,
    group_alphabet,
    pair,
    total_boundary,
)
from ncg_index.fredholm import KAPPA, index_pairing_odd, phase_module
from ncg_index.jlo import HOLDER_LOG, HeatSliceProduct, jlo_entire, jlo_value, simplex_heat_trace, transgression_cochain
from ncg_index.local import coefficient_C, local_cocycle_all, sigma_coefficients
from ncg_index.models import WindingSymbol, build_circle_dirac, finite_index, multiplication_operator
from ncg_index.operators import BandOperator
from ncg_index.zeta import MeromorphicSampler, laurent_extract, mckean_singer, residue, tau_functionals, zeta_index, zeta_sampler

WINDINGS = range(-3, 4)


# 1 ----------------------------------------------------------------------------------------

@pytest.mark.criterion(1, "four-way odd index agreement on the circle, window 512")
def test_circle_index_agreement(criterion):
    HOLDER_LOG.records.clear()
    tol = {"direct": 1e-3, "tau": 1e-3, "jlo": 5e-3, "local": 5e-3}
    tasks = []
    for w in WINDINGS:
        for method, n in (("direct", None), ("tau", 1), ("tau", 3), ("jlo", None), ("local", None)):
            task = {"id": f"{method}{n or ''}:{w}", "method": method, "symbol": {str(w): [1, 0]},
                    "window": 512, "tolerance": tol[method], "expect": -w}
            if n is not None:
                task["n"] = n
            tasks.append(task)
    start = time.perf_counter()
    rows, code = run(load_config(json.dumps({"model": {"kind": "circle"}, "tasks": tasks})))
    elapsed = time.perf_counter() - start
    ok = True
    for task, row in zip(tasks, rows):
        w = task["expect"]
        ok &= criterion.check(row.passed and row.rounded == w and row.defect < task["tolerance"],
                              f"{row.task}: value {row.re:+.12f}, defect {row.defect}")
    ok &= criterion.check(elapsed < 60.0, f"{len(rows)} pairings in {elapsed:.1f}s (limit 60s)")
    assert ok and code == 0


# 2 ----------------------------------------------------------------------------------------

@pytest.mark.criterion(2, "McKean-Singer and zeta(0) index on random finite even triples")
def test_mckean_singer_exactness(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(10):
        dp, dm = (int(x) for x in rng.integers(1, 7, size=2))
        T = random_finite_triple(rng, dp, dm, ngen=0, rank_drop=int(rng.integers(0, min(dp, dm))))
        P = T.D[dp:, :dp]
        ind = finite_index(dp, dm, P)
        for t in (0.1, 1.0, 10.0):
            worst = max(worst, abs(mckean_singer(T, t) - ind))
        for s in (0.0, 1.0, 2.5):
            worst = max(worst, abs(zeta_index(P, s) - ind))
    assert criterion.check(worst < 1e-10, f"largest defect {worst:.2e} over 10 triples (limit 1e-10)")


# 3 ----------------------------------------------------------------------------------------

def _z3():
    return group_alphabet(["g0", "g1", "g2"], lambda a, b: f"g{(int(a[1]) + int(b[1])) % 3}", "g0")


def _random_fraction_chain(rng, labels, max_degree):
    out = CyclicChain()
    for _ in range(4):
        k = rng.randint(0, max_degree)
        word = [rng.choice(labels + [UNIT])] + [rng.choice(labels) for _ in range(k)]
        out = out + CyclicChain.word(*word, coeff=Fraction(rng.randint(-9, 9), rng.randint(1, 9)))
    return out


def _matrix_units(n):
    lab = lambda i, j: f"E{i}{j}"
    table = {}
    for i, j, k, l in itertools.product(range(n), repeat=4):
        table[(lab(i, j), lab(k, l))] = lab(i, l) if j == k else {}
    return TableAlphabet(table), lab


@pytest.mark.criterion(3, "b^2 = B^2 = bB + Bb = 0 exactly; (b+B)Ch(e) = 0 through degree 5")
def test_cyclic_identities(criterion):
    rng = random.Random(3)
    A = _z3()
    exact = True
    for _ in range(50):
        c = _random_fraction_chain(rng, ["g1", "g2"], 5)
        exact &= boundary_b(boundary_b(c, A), A).is_zero()
        exact &= boundary_B(boundary_B(c)).is_zero()
        exact &= (boundary_b(boundary_B(c), A) + boundary_B(boundary_b(c, A))).is_zero()
    ok = criterion.check(exact, "50 rational chains of degree <= 5: all three identities exact")

    # a rank-one projection with complex float entries in the 2x2 matrix units
    M, lab = _matrix_units(2)
    nrng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(3):
        v = nrng.normal(size=2) + 1j * nrng.normal(size=2)
        v /= np.linalg.norm(v)
        e = {lab(i, j): complex(v[i] * np.conj(v[j])) for i in range(2) for j in range(2)}
        ch = chern_idempotent(e, 6, M)
        defect = total_boundary(ch, M).truncate(5)
        worst = max([worst] + [abs(x) for _, x in defect.items()])
    # a rational idempotent in the Z3 group algebra, checked exactly
    third = Fraction(1, 3)
    ch = chern_idempotent({UNIT: 2 * third, "g1": -third, "g2": -third}, 6, A)
    ok &= criterion.check(total_boundary(ch, A).truncate(5).is_zero(), "rational Z3 idempotent: (b+B)Ch(e) exactly zero")
    ok &= criterion.check(worst < 1e-12, f"float matrix-unit projections: largest coefficient of (b+B)Ch(e) {worst:.1e}")
    assert ok


# 4 ----------------------------------------------------------------------------------------

@pytest.mark.criterion(4, "JLO cocycle identity and transgression on finite triples")
def test_jlo_cocycle_and_transgression(criterion):
    rng = np.random.default_rng(44)
    worst_cocycle = worst_trans = 0.0
    for _ in range(3):
        T = random_finite_triple(rng, int(rng.integers(2, 5)), int(rng.integers(1, 4)), ngen=3)
        labels = list(T.generators)
        eps = float(rng.uniform(0.6, 1.0))
        ch = jlo_entire(T, 6, eps)
        for k in (0, 2):
            for _ in range(2):
                args = [T.generators[labels[i]] for i in rng.integers(0, len(labels), size=k + 2)]
                worst_cocycle = max(worst_cocycle, abs(cocycle_defect(ch, args)))
            h = 1e-3
            args = [T.generators[labels[i]] for i in rng.integers(0, len(labels), size=k + 1)]
            deriv = (jlo_value(T, args, eps + h).value - jlo_value(T, args, eps - h).value) / (2 * h)
            rhs = coboundary_B(transgression_cochain(T, k + 1, eps).components[k + 1])(args)
            if k >= 1:
                rhs += coboundary_b(transgression_cochain(T, k - 1, eps).components[k - 1])(args)
            worst_trans = max(worst_trans, abs(deriv + rhs))
    ok = criterion.check(worst_cocycle < 1e-8, f"cocycle defect {worst_cocycle:.1e} (limit 1e-8)")
    ok &= criterion.check(worst_trans < 1e-5, f"transgression defect {worst_trans:.1e} at h = 1e-3 (limit 1e-5)")
    assert ok


# 5 ----------------------------------------------------------------------------------------

def _monte_carlo_heat_trace(factors, D, t, samples, rng, chunk=20_000):
    """Uniform simplex samples (normalized exponentials) and eigenbasis matrix products."""
    lam, V = np.linalg.eigh(D)
    lam2 = lam**2
    B = [V.conj().T @ a @ V for a in factors]
    k = len(factors) - 1
    vals = []
    for start in range(0, samples, chunk):
        m = min(chunk, samples - start)
        s = rng.exponential(size=(m, k + 1))
        s /= s.sum(axis=1, keepdims=True)
        acc = np.broadcast_to(B[0], (m,) + B[0].shape) * np.exp(-t * s[:, 0, None] * lam2)[:, None, :]
        for i in range(1, k + 1):
            acc = (acc @ B[i]) * np.exp(-t * s[:, i, None] * lam2)[:, None, :]
        vals.append(np.trace(acc, axis1=1, axis2=2))
    vals = np.concatenate(vals) / math.factorial(k)
    sigma = math.hypot(vals.real.std(ddof=1), vals.imag.std(ddof=1)) / math.sqrt(samples)
    return complex(vals.mean()), sigma


@pytest.mark.criterion(5, "simplex heat traces against Monte-Carlo quadrature")
def test_divided_difference_oracle(criterion):
    rng = np.random.default_rng(55)
    worst = 0.0
    for i in range(20):
        k = 1 + i % 3
        H = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        D = 0.5 * (H + H.conj().T)
        factors = tuple(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)) for _ in range(k + 1))
        t = float(rng.uniform(0.2, 2.0))
        exact = simplex_heat_trace(HeatSliceProduct(factors, D), t).value
        est, sigma = _monte_carlo_heat_trace(factors, D, t, 100_000, rng)
        worst = max(worst, abs(exact - est) / sigma)
    assert criterion.check(worst <= 3.0, f"largest deviation {worst:.2f} sigma over 20 instances (limit 3)")


# 6 ----------------------------------------------------------------------------------------

def _trace_class_band(rng):
    c = rng.normal(size=3)
    f = lambda n: (c[0] / (1.0 + n * n) + c[1] / (1.0 + n**4) + c[2] * np.exp(-np.abs(n))) + 0j
    s = Series({2: c[0], 4: c[1] - c[0], 6: c[0], 8: -c[0] - c[1], 10: c[0]})
    off = BandOperator.shift(1, rng.normal()) + BandOperator.shift(-2, rng.normal())
    return BandOperator.diagonal(f, s, s) + off


@pytest.mark.criterion(6, "zeta continuation, residues and Laurent functionals on the circle")
def test_zeta_machinery(criterion):
    D = build_circle_dirac().D
    m = zeta_sampler(BandOperator.identity(), D)
    oracle0 = 1 + 2 * zeta_em(0.0)
    ok = criterion.check(abs(m(0.0) - oracle0) < 1e-9 and abs(m(0.0)) < 1e-9, f"zeta_identity(0) = {m(0.0).real:.2e}")
    res = residue(m, 1.0)
    ok &= criterion.check(abs(res - 2) < 1e-9, f"Res at s = 1: {res.real:.12f}")
    data = tau_functionals(abs_d_power(D, -1), D, 1)
    ok &= criterion.check(abs(data[0] - 1) < 1e-8, f"tau_0(|D|^-1) = {data[0].real:.12f}")
    ok &= criterion.check(abs(data[-1] - (1 + 2 * euler_gamma_em())) < 1e-8, "tau_-1(|D|^-1) matches 1 + 2 gamma")
    rng = np.random.default_rng(66)
    worst = 0.0
    for _ in range(10):
        s = zeta_sampler(_trace_class_band(rng), D)
        # trace class: no pole at the origin, so every tau_l with l >= 0 vanishes
        ok &= criterion.check(0.0 not in s.declared_poles, "no declared pole at 0")
        wide = MeromorphicSampler(s.evaluate, s.declared_poles, 3, s.s_conv, s.radius)
        d = laurent_extract(wide, 3)
        worst = max(worst, max(abs(d[l]) for l in (0, 1, 2)))
    ok &= criterion.check(worst < 1e-8, f"tau_0..tau_2 on 10 trace-class operators: max {worst:.1e}")
    assert ok


# 7 ----------------------------------------------------------------------------------------

def _iterated_simplex_integral(m):
    """Exact int over 0 < t_1 < ... < t_k < 1 of t_1^m_1 ... t_k^m_k, as polynomials in the upper limit."""
    poly = {0: Fraction(1)}  # polynomial in the running upper limit
    for mi in m:
        # multiply by t^mi, then integrate from 0 to the next variable
        poly = {p + mi + 1: c / (p + mi + 1) for p, c in poly.items()}
    return sum(poly.values())  # evaluate at 1


def _elementary_symmetric(roots, r):
    return sum((math.prod(c) for c in itertools.combinations(roots, r)), Fraction(0)) if r else Fraction(1)


@pytest.mark.criterion(7, "exact C_m and sigma_l coefficients")
def test_coefficient_exactness(criterion):
    ok = True
    count = 0
    for k in range(1, 5):
        for m in itertools.product(range(4), repeat=k):
            if sum(m) > 3:
                continue
            want = Fraction((-1) ** sum(m), math.prod(math.factorial(x) for x in m)) * _iterated_simplex_integral(m)
            ok &= coefficient_C(m) == want
            count += 1
    ok = criterion.check(ok, f"{count} multi-indices C_m exact")
    good = True
    for n in range(7):
        for parity, roots in (("odd", [Fraction(2 * j - 1, 2) for j in range(1, n + 1)]),
                              ("even", [Fraction(j) for j in range(1, n)])):
            got = sigma_coefficients(n, parity)
            # coefficient of s^l in prod (r + s) is e_{deg - l}(roots)
            want = [_elementary_symmetric(roots, len(roots) - l) for l in range(len(roots) + 1)]
            good &= got == want
    ok &= criterion.check(good, "sigma_l(n), n <= 6, both parities exact")
    assert ok


# 8 ----------------------------------------------------------------------------------------

@pytest.mark.criterion(8, "n-independence of tau pairings and raw vs renormalized local cocycle")
def test_independence(criterion):
    T = build_circle_dirac(3)
    M = phase_module(T)
    ok = True
    for w in WINDINGS:
        s = WindingSymbol({w: 1.0})
        u, ui = multiplication_operator(s), multiplication_operator(s.inverse())
        v1 = index_pairing_odd(M, u, ui, "tau", 1, 512)
        v3 = index_pairing_odd(M, u, ui, "tau", 3, 512)
        # allowance for floating-point rounding on top of the certified tails
        ok &= criterion.check(abs(v1.value - v3.value) <= v1.tail_bound + v3.tail_bound + 1e-12,
                              f"w = {w}: tau_1 {v1.value.real:+.15f}, tau_3 {v3.value.real:+.15f}")
    for w in (1, 2, 3):
        ch = chern_invertible(f"U^{w}", f"U^-{w}", 3)
        raw, ren = (pair(local_cocycle_all(T, 3, variant), ch, T.bindings()) for variant in ("raw", "renormalized"))
        ok &= criterion.check(abs(raw - ren) < 1e-6, f"w = {w}: |raw - renormalized| = {abs(raw - ren):.1e}")
        ok &= criterion.check(abs(ren / KAPPA + w) < 1e-6, f"w = {w}: local index {(ren / KAPPA).real:+.9f}")
    assert ok


# 9 ----------------------------------------------------------------------------------------

@pytest.mark.criterion(9, "Hölder bound on every JLO evaluation of criteria 1 and 4")
def test_holder_bound(criterion):
    n = len(HOLDER_LOG.records)
    bad = HOLDER_LOG.violations
    ok = criterion.check(n > 0, f"{n} logged evaluations")
    ok &= criterion.check(not bad, f"{len(bad)} violations among {n} evaluations")
    assert ok
