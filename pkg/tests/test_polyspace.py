from fractions import Fraction
from itertools import combinations
from math import comb

import pytest

from koszulnp.exactalg import PrimeField, RationalField, rank
from koszulnp.polyspace import (ConfigurationError, FatPointScheme, PointP2, collinear,
                                hilbert_function, ideal_piece, monomial_basis, random_points,
                                sigma, sigma_data, vanishing_matrix)

from oracles import fraction_rank

FIVE = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1), (1, 2, 3)]


def evaluation_rank(points, n):
    """Rank of the plain evaluation matrix of degree-n monomials (oracle)."""
    mons = [(a, b, n - a - b) for a in range(n + 1) for b in range(n + 1 - a)]
    rows = [[Fraction(x) ** e[0] * Fraction(y) ** e[1] * Fraction(z) ** e[2] for e in mons]
            for x, y, z in points]
    return fraction_rank(rows)


def test_five_points_are_general():
    assert not any(collinear(PointP2(a), PointP2(b), PointP2(c))
                   for a, b, c in combinations(FIVE, 3))


# -- points and schemes -----------------------------------------------------

def test_point_normalization():
    assert PointP2((2, 4, 2)).coords == (1, 2, 1)
    assert PointP2((3, 0, 0)).coords == (1, 0, 0)
    assert PointP2(("1/2", 0, 0)) == PointP2((5, 0, 0))
    with pytest.raises(ConfigurationError):
        PointP2((0, 0, 0))
    with pytest.raises(ConfigurationError):
        PointP2((0.5, 1, 1))


def test_scheme_validation():
    Z = FatPointScheme([(0, 0, 1), (1, 0, 0)], [2, 1])
    assert (Z.s, Z.d, Z.degZ) == (2, 3, 4)
    with pytest.raises(ConfigurationError, match=r"points\[0\] and points\[1\]"):
        FatPointScheme([(1, 2, 3), (2, 4, 6)], [1, 1])
    with pytest.raises(ConfigurationError, match=r"mults\[0\]"):
        FatPointScheme([(1, 2, 3)], [0])
    with pytest.raises(ConfigurationError):
        FatPointScheme([], [])
    with pytest.raises(ConfigurationError):
        FatPointScheme([(1, 2, 3)], [1, 1])


def test_points_colliding_mod_p_rejected():
    p = PrimeField(2147483647)
    Z = FatPointScheme([(1, 0, 1), (1 + p.p, 0, 1)], [1, 1])
    with pytest.raises(ConfigurationError, match="coincide"):
        Z.check_in_field(p)


# -- monomial_basis -----------------------------------------------------------

def test_monomial_basis_examples():
    assert monomial_basis(0) == ((0, 0, 0),)
    assert len(monomial_basis(2)) == 6
    assert len(monomial_basis(4)) == 15
    assert monomial_basis(2)[:3] == ((2, 0, 0), (1, 1, 0), (1, 0, 1))
    with pytest.raises(ValueError):
        monomial_basis(-1)


@pytest.mark.parametrize("n", range(8))
def test_monomial_basis_is_graded_lex(n):
    B = monomial_basis(n)
    assert len(B) == comb(n + 2, 2) == len(set(B))
    assert list(B) == sorted(B, reverse=True)


# -- vanishing_matrix ---------------------------------------------------------

def test_vanishing_matrix_examples(F):
    Z = FatPointScheme([(0, 0, 1)], [1])
    idx = {e: i for i, e in enumerate(monomial_basis(2))}
    V = vanishing_matrix(Z, 2, [1], F)
    assert V.rows == ({idx[(0, 0, 2)]: 1},)
    V = vanishing_matrix(Z, 2, [2], F)
    assert V.n_rows == 3
    supports = sorted(tuple(r) for r in V.rows)
    assert supports == sorted([(idx[(1, 0, 1)],), (idx[(0, 1, 1)],), (idx[(0, 0, 2)],)])
    two = FatPointScheme([(1, 2, 3), (4, 5, 6)], [1, 1])
    assert rank(vanishing_matrix(two, 1, [1, 1], F)) == 2 == evaluation_rank([(1, 2, 3), (4, 5, 6)], 1)


@pytest.mark.parametrize("mu", [0, 1, 2, 3, 5])
def test_vanishing_matrix_row_count(F, mu):
    Z = FatPointScheme([(1, 2, 3), (4, 5, 7)], [1, 1])
    V = vanishing_matrix(Z, 4, [mu, 1], F)
    assert V.shape == (comb(mu + 1, 2) + 1, 15)


def test_vanishing_matrix_characteristic_guard():
    class Tiny(RationalField):
        characteristic = 5
    with pytest.raises(ConfigurationError):
        vanishing_matrix(FatPointScheme([(0, 0, 1)], [1]), 6, [1], Tiny())


# -- ideal_piece ---------------------------------------------------------------

def test_ideal_piece_examples(F):
    P = FatPointScheme([(1, 2, 3)], [1])
    assert ideal_piece(P, 1, [1], F).dim == 2
    assert ideal_piece(FatPointScheme([(1, 2, 3)], [2]), 2, [2], F).dim == 3
    five = FatPointScheme(FIVE, [1] * 5)
    assert ideal_piece(five, 2, [1] * 5, F).dim == 1 == 6 - evaluation_rank(FIVE, 2)


@pytest.mark.parametrize("field", [PrimeField(2147483647), RationalField()], ids=repr)
@pytest.mark.parametrize("n", range(7))
def test_ideal_piece_invariants(field, n):
    Z = FatPointScheme([(1, 2, 3), (0, 1, 5), (7, 1, 1)], [2, 1, 3])
    mults = (2, 1, 3)
    S = ideal_piece(Z, n, mults, field)
    V = vanishing_matrix(Z, n, mults, field)
    assert S.dim + rank(V) == comb(n + 2, 2)
    for row in S.basis.rows:
        assert not V.apply(row)
    assert list(S.pivots) == sorted(S.pivots)


# -- Hilbert function and sigma ------------------------------------------------

def test_hilbert_function_examples(F):
    one = FatPointScheme([(0, 0, 1)], [1])
    assert [hilbert_function(one, n, F)[1] for n in range(6)] == [1] * 6
    five = FatPointScheme(FIVE, [1] * 5)
    hq = [hilbert_function(five, n, F)[1] for n in range(4)]
    assert hq == [1, 3, 5, 5] == [evaluation_rank(FIVE, n) for n in range(4)]


def test_sigma_examples(F):
    assert sigma(FatPointScheme([(0, 0, 1)], [1]), F) == 1
    assert sigma(FatPointScheme(FIVE, [1] * 5), F) == 3
    s = sigma_data(FatPointScheme([(1, 2, 3)], [2]), F)
    assert (s.sigma, s.n_star, s.h_quotient) == (2, 1, (1, 3))


def test_sigma_collinear_points(F):
    Z = FatPointScheme([(1, 0, 1), (0, 1, 1), (1, 1, 2)], [1, 1, 1])
    s = sigma_data(Z, F)
    assert s.h_quotient == (1, 2, 3) and s.sigma == 3


def test_veronese_sigma_convention(F):
    assert sigma_data(FatPointScheme.empty(), F).sigma == 0


@pytest.mark.parametrize("seed", range(8))
def test_generic_hilbert_function(F, seed):
    """Random general points: h_quotient(n) = min(C(n+2,2), degZ)."""
    import random
    rng = random.Random(seed)
    s = rng.randint(1, 6)
    mults = [rng.randint(1, 2) for _ in range(s)]
    Z = FatPointScheme(random_points(s, seed), mults)
    sig = sigma_data(Z, F)
    hq = [hilbert_function(Z, n, F)[1] for n in range(Z.d + 2)]
    assert hq == sorted(hq) and hq[-1] == Z.degZ
    assert sig.sigma <= Z.d
    if all(m == 1 for m in mults):
        assert hq == [min(comb(n + 2, 2), Z.degZ) for n in range(Z.d + 2)]


# -- random_points ---------------------------------------------------------------

def test_random_points_deterministic_and_distinct():
    assert random_points(5, 42) == random_points(5, 42)
    assert random_points(5, 42) != random_points(5, 43)
    pts = random_points(5, 1)
    assert len(set(pts)) == 5
    assert not any(collinear(a, b, c) for a, b, c in combinations(pts, 3))


def test_random_points_generic_hilbert(F):
    Z = FatPointScheme(random_points(5, 2024), [1] * 5)
    assert [hilbert_function(Z, n, F)[1] for n in range(4)] == [1, 3, 5, 5]


def test_random_points_gives_up():
    with pytest.raises(RuntimeError):
        random_points(10, 0, coord_range=1, max_tries=50)
