"""Shared builders for the test suite (not collected)."""

import numpy as np

from ncg_index.models import build_finite_even


def random_block_unitary_norm(rng, dp, dm):
    """A random even (block-diagonal) matrix of operator norm 1."""
    n = dp + dm
    a = np.zeros((n, n), dtype=complex)
    a[:dp, :dp] = rng.normal(size=(dp, dp)) + 1j * rng.normal(size=(dp, dp))
    a[dp:, dp:] = rng.normal(size=(dm, dm)) + 1j * rng.normal(size=(dm, dm))
    return a / np.linalg.norm(a, 2)


def random_finite_triple(rng, dp, dm, ngen=3, rank_drop=0):
    P = rng.normal(size=(dm, dp)) + 1j * rng.normal(size=(dm, dp))
    if rank_drop:
        u, s, vh = np.linalg.svd(P)
        s[len(s) - rank_drop:] = 0
        S = np.zeros((dm, dp))
        S[: len(s), : len(s)] = np.diag(s)
        P = u @ S @ vh
    gens = {f"a{i}": random_block_unitary_norm(rng, dp, dm) for i in range(ngen)}
    return build_finite_even(dp, dm, P, gens)


# Euler-Maclaurin oracle for the Riemann zeta function -------------------------------

def _bernoulli_even(count):
    """B_2, B_4, ..., B_{2 count} as Fractions (Akiyama-Tanigawa)."""
    from fractions import Fraction

    top = 2 * count
    a = [Fraction(0)] * (top + 1)
    out = []
    for m in range(top + 1):
        a[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        if m >= 2 and m % 2 == 0:
            out.append(a[0])
    return out


_B = _bernoulli_even(12)


def zeta_em(s, N=30, M=12):
    """zeta(s) = sum_{n<N} n^-s + N^{1-s}/(s-1) + N^-s/2 + sum_j B_2j/(2j)! (s)_{2j-1} N^{-s-2j+1}."""
    from math import factorial

    s = complex(s)
    total = sum(n ** (-s) for n in range(1, N))
    total += N ** (1 - s) / (s - 1) + 0.5 * N ** (-s)
    rising = s  # (s)(s+1)...(s+2j-2)
    for j in range(1, M + 1):
        total += float(_B[j - 1]) / factorial(2 * j) * rising * N ** (-s - 2 * j + 1)
        rising *= (s + 2 * j - 1) * (s + 2 * j)
    return total


def euler_gamma_em(h=1e-4):
    """gamma_E as the constant term of zeta at 1, from the symmetric difference of the oracle."""
    return (((zeta_em(1 + h) - 1 / h) + (zeta_em(1 - h) + 1 / h)) / 2).real
