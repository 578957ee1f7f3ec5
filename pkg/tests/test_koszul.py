import random
from math import comb

import pytest

from koszulnp.exactalg import (DEFAULT_PRIMES, ExactMatrix, PrimeField, RationalField,
                               flint_zeros, flint_set, rank)
from koszulnp.koszul import (GradedModule, InvariantViolation, KoszulComplex, KoszulInstance,
                             PreconditionError, SizeGuardExceeded, apply_differential,
                             colex_rank, form_of, form_product, koszul_differential,
                             koszul_dim, multiply, reduce_by_linear_form, sections,
                             wedge_subsets)
from koszulnp.picard import canonical
from koszulnp.polyspace import ConfigurationError, FatPointScheme
from koszulnp.verify import (EngineOptions, KoszulEngine, betti_table, check_np, duality_gap)

from oracles import SCROLL_BETTI, VERONESE_BETTI, VERTICES, sparse_fraction_rank, vertex_koszul


def direct(Z, t, field=None, **kw):
    return KoszulInstance(Z, t, field or PrimeField(DEFAULT_PRIMES[0]), route="direct", **kw)


# -- wedge indexing ---------------------------------------------------------------

@pytest.mark.parametrize("n,p", [(5, 0), (5, 2), (7, 3), (6, 6), (4, 5)])
def test_colex_rank_is_bijection(n, p):
    subs = wedge_subsets(n, p)
    assert len(subs) == (comb(n, p) if p <= n else 0)
    assert [colex_rank(S) for S in subs] == list(range(len(subs)))


# -- sections and products ---------------------------------------------------------

def test_sections_examples(scroll):
    inst = direct(scroll, 2)
    assert sections(inst, 0).dim == 1
    assert sections(inst, 1).dim == 5
    assert sections(inst, 2).dim == 12
    assert inst.n_W == 5 and inst.N == 4


def test_negative_degree_sections_are_zero(scroll):
    inst = direct(scroll, 2, twist=canonical(1), top=3)
    assert [sections(inst, q).dim for q in range(3)] == [0, 0, 2]


def test_multiply_unit_and_bilinear(scroll):
    inst = direct(scroll, 2)
    F = inst.field
    for i in range(inst.n_W):
        assert multiply(inst, {i: 1}, 0, {0: 1}) == {i: 1}
    rng = random.Random(0)
    for _ in range(10):
        w = {i: rng.randrange(F.p) for i in range(inst.n_W)}
        w2 = {i: rng.randrange(F.p) for i in range(inst.n_W)}
        b = {k: rng.randrange(F.p) for k in range(sections(inst, 1).dim)}
        both = {i: F.norm(w.get(i, 0) + w2.get(i, 0)) for i in range(inst.n_W)}
        lhs = multiply(inst, both, 1, b)
        a, c = multiply(inst, w, 1, b), multiply(inst, w2, 1, b)
        rhs = {k: F.norm(a.get(k, 0) + c.get(k, 0)) for k in set(a) | set(c)}
        assert lhs == {k: v for k, v in rhs.items() if v}


def test_multiply_is_polynomial_product(F):
    Z = FatPointScheme([(1, 2, 3), (4, 1, 1)], [2, 1])
    inst = direct(Z, 4, F, top=3)
    W, B1, B2 = inst.W, sections(inst, 1), sections(inst, 2)
    rng = random.Random(1)
    for _ in range(5):
        w = {rng.randrange(W.dim): rng.randrange(1, 100)}
        b = {k: rng.randrange(100) for k in range(B1.dim)}
        prod = form_product(form_of(W, w), 4, form_of(B1, b), 4, F)
        assert form_of(B2, multiply(inst, w, 1, b)) == prod


def test_scroll_products_span_B2(scroll):
    inst = direct(scroll, 2)
    cols = [multiply(inst, {i: 1}, 1, {k: 1}) for i in range(5) for k in range(5)]
    M = ExactMatrix.from_rows(inst.field, 12, cols)
    assert M.n_rows == 25 and rank(M) == 12


# -- differentials ----------------------------------------------------------------

def test_differential_examples(scroll):
    M = direct(scroll, 2).module
    D0 = koszul_differential(M, 0, 1)
    assert D0.shape == (0, 5) and D0.is_zero()
    D1 = koszul_differential(M, 1, 0)
    assert D1.shape == (5, 5) and rank(D1) == 5


@pytest.mark.parametrize("route", ["direct", "reduced"])
def test_d_squared_exact_on_scroll(scroll, route):
    inst = KoszulInstance(scroll, 2, PrimeField(DEFAULT_PRIMES[0]), route=route)
    M = inst.module
    for p in range(2, M.n_gens + 1):
        for q in range(0, M.top - 1):
            A = koszul_differential(M, p, q)
            B = koszul_differential(M, p - 1, q + 1)
            if A.n_cols and B.n_cols and A.n_rows:
                assert (B @ A).is_zero()


def test_apply_differential_matches_matrix(F):
    Z = FatPointScheme([(1, 2, 3)], [2])
    M = direct(Z, 3, F, top=3).module
    D = koszul_differential(M, 2, 1)
    for k in random.Random(2).sample(range(D.n_cols), 10):
        col = {i: r[k] for i, r in enumerate(D.rows) if k in r}
        assert apply_differential(M, 2, 1, {k: 1}) == col


def test_check_dd_detects_a_broken_module(F):
    """Non-commuting multiplication maps violate d o d = 0."""
    m01 = flint_zeros(F, 1, 1); flint_set(m01, F, 0, 0, 1)
    m02 = flint_zeros(F, 1, 1); flint_set(m02, F, 0, 0, 2)
    eye = flint_zeros(F, 1, 1); flint_set(eye, F, 0, 0, 1)
    M = GradedModule(F, 2, (1, 1, 1, 1), ((m01, m01), (eye, m02), (eye, eye)))
    with pytest.raises(InvariantViolation):
        KoszulComplex(M).check_dd(2, 0)


# -- Koszul dimensions ---------------------------------------------------------------

def test_koszul_dim_examples(scroll):
    inst = direct(scroll, 2)
    assert koszul_dim(inst, 0, 0) == 1
    assert koszul_dim(inst, 1, 1) == 3
    assert koszul_dim(inst, 2, 1) == 2
    assert koszul_dim(inst, 1, 2) == koszul_dim(inst, 2, 2) == 0


def test_scroll_ranks_against_rational_oracle(scroll):
    inst = direct(scroll, 2, RationalField())
    M = inst.module
    for p in range(1, 5):
        for q in range(0, 4):
            D = koszul_differential(M, p, q)
            cols = [dict() for _ in range(D.n_cols)]
            for i, r in enumerate(D.rows):
                for j, v in r.items():
                    cols[j][i] = v
            assert inst.complex.rank(p, q) == sparse_fraction_rank(cols)


def test_koszul_dims_out_of_range(scroll):
    inst = direct(scroll, 2)
    assert koszul_dim(inst, -1, 1) == 0
    assert koszul_dim(inst, 6, 1) == 0
    assert koszul_dim(inst, 1, -1) == 0


@pytest.mark.parametrize("t,mults", [(2, [1]), (2, []), (3, [1, 1]), (3, [2]), (3, [1, 1, 1]),
                                     (4, [2, 1])])
@pytest.mark.parametrize("route", ["direct", "reduced"])
def test_engine_matches_monomial_oracle(t, mults, route):
    if mults:
        Z = FatPointScheme(list(VERTICES[:len(mults)]), mults)
    else:
        Z = FatPointScheme.empty()
    i_max = 3 if t == 2 else 2
    oracle = vertex_koszul(t, mults, i_max, 3)
    inst = KoszulInstance(Z, t, PrimeField(DEFAULT_PRIMES[1]), route=route)
    assert {k: koszul_dim(inst, *k) for k in oracle} == oracle


def test_twisted_module_matches_oracle():
    Z = FatPointScheme([VERTICES[0]], [1])
    oracle = vertex_koszul(2, [1], 3, 2, twist=(-3, [-1]))
    for route in ("direct", "reduced"):
        inst = KoszulInstance(Z, 2, PrimeField(DEFAULT_PRIMES[0]), twist=canonical(1),
                              top=4, route=route)
        assert {k: koszul_dim(inst, *k) for k in oracle} == oracle


@pytest.mark.parametrize("route", ["direct", "reduced"])
def test_euler_characteristic_per_strand(route):
    """sum_p (-1)^p C(n,p) dim M_{j-p} = sum_p (-1)^p dim K_{p,j-p}."""
    Z = FatPointScheme([(1, 2, 3), (3, 1, 7)], [1, 1])
    inst = KoszulInstance(Z, 3, PrimeField(DEFAULT_PRIMES[0]), route=route, top=4)
    n, dims = inst.meta["n_gens"], inst.meta["dims"]
    for j in range(0, 4):
        lhs = sum((-1) ** p * comb(n, p) * dims[j - p] for p in range(0, min(j, n) + 1))
        rhs = sum((-1) ** p * koszul_dim(inst, p, j - p) for p in range(0, min(j, n) + 1))
        assert lhs == rhs


def test_reduction_stops_on_torsion(F):
    """x0 kills M_0 -> M_1, so the quotient is refused at degree 1."""
    zero = flint_zeros(F, 1, 1)
    one = flint_zeros(F, 1, 1); flint_set(one, F, 0, 0, 1)
    M = GradedModule(F, 2, (1, 1), ((zero, one),))
    R, bad = reduce_by_linear_form(M, [1, 0])
    assert R is None and bad == 1
    R, bad = reduce_by_linear_form(M, [0, 1])
    assert bad is None and R.dims == (1, 0)


def test_reduced_route_records_reductions(scroll):
    inst = KoszulInstance(scroll, 2, PrimeField(DEFAULT_PRIMES[0]), route="reduced")
    assert inst.meta["reductions"] == 3
    assert inst.meta["n_gens"] == 2


# -- instance guards ------------------------------------------------------------------

def test_instance_guards(scroll):
    F = PrimeField(DEFAULT_PRIMES[0])
    with pytest.raises(ConfigurationError):
        KoszulInstance(scroll, 2, F, twist=canonical(2))
    with pytest.raises(ValueError):
        KoszulInstance(scroll, 2, F, route="other")


def test_size_guard(scroll):
    inst = KoszulInstance(scroll, 2, PrimeField(DEFAULT_PRIMES[0]), route="direct", max_side=10)
    with pytest.raises(SizeGuardExceeded) as exc:
        koszul_dim(inst, 2, 1)
    assert exc.value.shape[0] > 10


def test_rank_cache_roundtrip(scroll):
    cache: dict = {}
    a = KoszulInstance(scroll, 2, PrimeField(DEFAULT_PRIMES[0]), route="direct", cache=cache)
    dims = [koszul_dim(a, p, q) for p in range(4) for q in range(3)]
    b = KoszulInstance(scroll, 2, PrimeField(DEFAULT_PRIMES[0]), route="direct", cache=cache)
    assert [koszul_dim(b, p, q) for p in range(4) for q in range(3)] == dims
    assert all(r.cached for r in b.complex.records.values() if 0 not in r.shape)
    assert "_module" not in b.__dict__ and "module" not in b.__dict__


# -- Betti tables, N_p, duality --------------------------------------------------------

def betti_nonzero(table):
    return {k: v for k, v in table.entries.items() if v}


@pytest.mark.parametrize("route", ["direct", "reduced"])
def test_scroll_betti(scroll, route):
    e = KoszulEngine(scroll, 2, EngineOptions(route=route))
    assert betti_nonzero(betti_table(e, 3)) == SCROLL_BETTI


@pytest.mark.parametrize("route", ["direct", "reduced"])
def test_veronese_betti(route):
    e = KoszulEngine(FatPointScheme.empty(), 2, EngineOptions(route=route))
    assert betti_nonzero(betti_table(e, 4)) == VERONESE_BETTI


def test_betti_ascii_layout(scroll):
    table = betti_table(KoszulEngine(scroll, 2), 3)
    assert table.ascii().splitlines() == [
        "       0 1 2 3",
        "total: 1 3 2 0",
        "    0: 1 . . .",
        "    1: . 3 2 .",
        "    2: . . . .",
        "    3: . . . .",
    ]


def test_betti_precondition():
    Z = FatPointScheme([(1, 2, 3)], [2])  # sigma = 2
    with pytest.raises(PreconditionError):
        betti_table(KoszulEngine(Z, 1), 2)


def test_check_np_examples(scroll):
    r1 = check_np(scroll, 2, 1)
    assert r1.passed and r1.predicted and r1.bound.dp == 2
    r2 = check_np(scroll, 2, 2)
    assert r2.bound.dp == 2 and r2.predicted and r2.passed
    assert r2.dims[(2, 2)] == 0 and r2.dims[(2, 1)] == 2


def test_check_np_refuses_non_very_ample():
    Z = FatPointScheme([(1, 2, 3)], [2])
    with pytest.raises(PreconditionError, match="very ample"):
        check_np(Z, 2, 0)


def test_check_np_detects_failure_below_bound():
    """Six general points at t = 4 (below d = 6): N_3 holds, N_4 does not."""
    from koszulnp.polyspace import random_points
    Z = FatPointScheme(random_points(6, 3), [1] * 6)
    e = KoszulEngine(Z, 4)
    assert check_np(Z, 4, 3, engine=e).passed
    r = check_np(Z, 4, 4, engine=e)
    assert not r.passed and not r.predicted
    assert r.failures == [(4, 2, 10)]


@pytest.mark.parametrize("p", [0, 1, 2])
@pytest.mark.parametrize("route", ["direct", "reduced"])
def test_scroll_duality(scroll, p, route):
    res = duality_gap(scroll, 2, p, EngineOptions(route=route))
    assert res.equal and res.lhs == 0
    assert res.rhs_index == 2 - p


def test_duality_out_of_range(scroll):
    res = duality_gap(scroll, 2, 5)
    assert res.rhs_index < 0 and (res.lhs, res.rhs) == (0, 0)


def test_duality_nontrivial_both_sides():
    """Two simple points at t = 3: both sides vanish for p <= 3 and agree beyond."""
    Z = FatPointScheme([(1, 2, 3), (3, 1, 7)], [1, 1])
    for p in range(0, 7):
        res = duality_gap(Z, 3, p, EngineOptions(route="reduced"))
        assert res.equal, (p, res)
