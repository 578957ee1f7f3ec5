"""Koszul cohomology of the section ring B = sum_q H0(F + qD_t).

The module B is held as a finite window ``B_0 .. B_top`` together with the
multiplication maps ``w_i : B_q -> B_{q+1}`` for a basis ``w_i`` of
``W = H0(D_t)``.  Koszul differentials are assembled from those maps.

Reduced route
-------------
If a linear form ``l`` in W acts injectively on ``M_{n-1} -> M_n`` for every
degree ``n`` in the window, then ``dim K_{p,q}(M, W) = dim K_{p,q}(M/lM, W/l)``
for every cell whose module degrees lie in the window (mapping-cone long
exact sequence versus the long exact sequence of ``0 -> M(-1) -> M -> M/lM``).
Injectivity is checked, degree by degree, through ranks; when it fails the
reduction stops early and the cells are computed with fewer quotients.
"""
from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from math import comb
from typing import Any, Callable, Sequence

from .exactalg import (ExactAlgError, ExactMatrix, Field, flint_is_zero, flint_rows,
                       flint_set, flint_zeros, rank, to_flint)
from .picard import DivisorClass, clamp, zero_class
from .polyspace import (ConfigurationError, FatPointScheme, GradedSectionSpace,
                        ideal_piece, monomial_basis, monomial_index, vanishing_matrix)


class InvariantViolation(ExactAlgError):
    """An internal consistency check failed; indicates an engine bug."""


class SizeGuardExceeded(ExactAlgError):
    def __init__(self, what: str, shape: tuple[int, int], limit: int):
        self.what, self.shape, self.limit = what, shape, limit
        super().__init__(f"{what}: matrix {shape[0]}x{shape[1]} exceeds size guard {limit}")


class PreconditionError(ValueError):
    pass


# -- exterior powers ---------------------------------------------------------

def colex_rank(subset: Sequence[int]) -> int:
    return sum(comb(x, j + 1) for j, x in enumerate(subset))


def wedge_subsets(n: int, p: int) -> list[tuple[int, ...]]:
    """All p-subsets of range(n) in colexicographic order."""
    if p < 0 or p > n:
        return []
    return sorted(itertools.combinations(range(n), p), key=lambda s: s[::-1])


# -- graded modules ----------------------------------------------------------

@dataclass(eq=False)
class GradedModule:
    """Window ``M_0 .. M_top`` of a graded module over Sym(W), dim W = n_gens.

    ``mult[q][i]`` is a FLINT matrix of shape ``(dims[q+1], dims[q])``.
    Pieces of negative degree are zero.
    """

    field: Field
    n_gens: int
    dims: tuple[int, ...]
    mult: tuple[tuple[Any, ...], ...]
    _cols: dict = dc_field(default_factory=dict, repr=False)

    @property
    def top(self) -> int:
        return len(self.dims) - 1

    def dim(self, q: int) -> int:
        if q < 0:
            return 0
        if q > self.top:
            raise ExactAlgError(f"degree {q} outside module window 0..{self.top}")
        return self.dims[q]

    def columns(self, q: int, i: int) -> list[dict]:
        """Sparse columns of ``mult[q][i]`` (image of each basis vector of M_q)."""
        key = (q, i)
        if key not in self._cols:
            self._cols[key] = flint_rows(self.mult[q][i].transpose(), self.field)
        return self._cols[key]

    def multiply(self, w: dict, q: int, b: dict) -> dict:
        """(sum w_i x_i) * b for generator coordinates ``w`` and ``b`` in M_q."""
        norm = self.field.norm
        out: dict = {}
        for i, wi in w.items():
            cols = self.columns(q, i)
            for k, bk in b.items():
                for c, v in cols[k].items():
                    out[c] = out.get(c, 0) + wi * bk * v
        return {c: x for c, v in out.items() if (x := norm(v))}


def _times_scalar(F, field: Field, c):
    if field.is_prime_field:
        return F * c
    from fractions import Fraction
    import flint
    c = Fraction(c)
    return F * flint.fmpq(c.numerator, c.denominator)


def reduce_by_linear_form(M: GradedModule, coeffs: Sequence) -> tuple[GradedModule | None, int | None]:
    """Quotient by ``l = sum coeffs[i] x_i``, or ``(None, n)`` if l is not
    injective on ``M_{n-1} -> M_n``.

    The surviving generators are all x_i except the last one with a nonzero
    coefficient; they map isomorphically onto W / <l>.
    """
    field = M.field
    coeffs = [field(c) for c in coeffs]
    nz = [i for i, c in enumerate(coeffs) if c]
    if not nz:
        raise ValueError("linear form is zero")
    drop = nz[-1]
    keep = [i for i in range(M.n_gens) if i != drop]
    projections = []  # (Pi_q, Lambda_q) per degree
    new_dims = []
    for q in range(M.top + 1):
        dq = M.dims[q]
        if q == 0 or M.dims[q - 1] == 0 or dq == 0:
            piv, R_rows = [], []
        else:
            L = flint_zeros(field, dq, M.dims[q - 1])
            for i in nz:
                L = L + _times_scalar(M.mult[q - 1][i], field, coeffs[i])
            R, r = L.transpose().rref()
            if r != M.dims[q - 1]:
                return None, q
            R_rows = flint_rows(R, field)[:r]
            piv = [min(row) for row in R_rows]
        pivset = set(piv)
        free = [j for j in range(dq) if j not in pivset]
        Pi = flint_zeros(field, len(free), dq)
        Lam = flint_zeros(field, dq, len(free))
        fpos = {j: f for f, j in enumerate(free)}
        for f, j in enumerate(free):
            flint_set(Pi, field, f, j, field.one)
            flint_set(Lam, field, j, f, field.one)
        for row, pc in zip(R_rows, piv):
            for j, v in row.items():
                if j in fpos:
                    flint_set(Pi, field, fpos[j], pc, field.norm(-v))
        projections.append((Pi, Lam))
        new_dims.append(len(free))
    mult = []
    for q in range(M.top):
        Pi1 = projections[q + 1][0]
        Lam = projections[q][1]
        mult.append(tuple(Pi1 * M.mult[q][i] * Lam for i in keep))
    return GradedModule(field, len(keep), tuple(new_dims), tuple(mult)), None


# -- Koszul complex ----------------------------------------------------------

def differential_shape(M: GradedModule, p: int, q: int) -> tuple[int, int]:
    n = M.n_gens
    rows = comb(n, p - 1) * M.dim(q + 1) if 1 <= p <= n + 1 else 0
    cols = comb(n, p) * M.dim(q) if 0 <= p <= n else 0
    return rows, cols


def differential_columns(M: GradedModule, p: int, q: int) -> list[dict]:
    """Columns of d_{p,q}: e_S (x) b  ->  sum_j (-1)^(j+1) e_{S - i_j} (x) x_{i_j} b."""
    n_rows, n_cols = differential_shape(M, p, q)
    if n_cols == 0:
        return []
    if n_rows == 0:
        return [{} for _ in range(n_cols)]
    field = M.field
    norm = field.norm
    dq, dq1 = M.dim(q), M.dim(q + 1)
    colmaps = [M.columns(q, i) for i in range(M.n_gens)]
    out = []
    for S in wedge_subsets(M.n_gens, p):
        faces = []
        for j, i in enumerate(S):
            face = S[:j] + S[j + 1:]
            faces.append((1 if j % 2 == 0 else -1, colex_rank(face) * dq1, colmaps[i]))
        for b in range(dq):
            col = {}
            for sign, base, cm in faces:
                for c, v in cm[b].items():
                    col[base + c] = v if sign > 0 else norm(-v)
            out.append(col)
    return out


def koszul_differential(M: GradedModule, p: int, q: int) -> ExactMatrix:
    """Matrix of d_{p,q}: L^p W (x) M_q -> L^{p-1} W (x) M_{q+1}."""
    n_rows, n_cols = differential_shape(M, p, q)
    cols = differential_columns(M, p, q)
    return ExactMatrix.from_rows(M.field, n_rows, cols).transpose() if cols else \
        ExactMatrix.zeros(M.field, n_rows, 0)


def apply_differential(M: GradedModule, p: int, q: int, vec: dict) -> dict:
    """d_{p,q} applied to a sparse vector indexed like the columns of d_{p,q}."""
    if p <= 0:
        return {}
    norm = M.field.norm
    subsets = wedge_subsets(M.n_gens, p)
    dq, dq1 = M.dim(q), M.dim(q + 1)
    out: dict = {}
    for idx, x in vec.items():
        S = subsets[idx // dq]
        b = idx % dq
        for j, i in enumerate(S):
            base = colex_rank(S[:j] + S[j + 1:]) * dq1
            sx = x if j % 2 == 0 else -x
            for c, v in M.columns(q, i)[b].items():
                out[base + c] = out.get(base + c, 0) + sx * v
    return {k: w for k, v in out.items() if (w := norm(v))}


@dataclass
class CellRecord:
    shape: tuple[int, int]
    rank: int
    seconds: float
    cached: bool = False


class KoszulComplex:
    """Ranks and cohomology dimensions of the Koszul complex of a module.

    Only ``n_gens`` and ``dims`` are needed up front; the module itself is
    built on first use, so ranks found in ``cache`` cost nothing.
    """

    def __init__(self, module: GradedModule | Callable[[], GradedModule],
                 n_gens: int | None = None, dims: Sequence[int] | None = None,
                 method: str = "auto", max_side: int | None = None,
                 cache: dict | None = None):
        if isinstance(module, GradedModule):
            self._module, self._factory = module, None
            n_gens, dims = module.n_gens, module.dims
        else:
            self._module, self._factory = None, module
        self.n_gens = n_gens
        self.dims = tuple(dims)
        self.method = method
        self.max_side = max_side
        self.cache = cache
        self.records: dict[tuple[int, int], CellRecord] = {}

    @property
    def module(self) -> GradedModule:
        if self._module is None:
            self._module = self._factory()
        return self._module

    def dim_M(self, q: int) -> int:
        if q < 0:
            return 0
        if q >= len(self.dims):
            raise ExactAlgError(f"degree {q} outside module window 0..{len(self.dims) - 1}")
        return self.dims[q]

    def shape(self, p: int, q: int) -> tuple[int, int]:
        n = self.n_gens
        rows = comb(n, p - 1) * self.dim_M(q + 1) if 1 <= p <= n + 1 else 0
        cols = comb(n, p) * self.dim_M(q) if 0 <= p <= n else 0
        return rows, cols

    def rank(self, p: int, q: int) -> int:
        if (p, q) in self.records:
            return self.records[(p, q)].rank
        if p <= 0 or p > self.n_gens or q < 0:
            return 0
        shape = self.shape(p, q)
        if 0 in shape:
            self.records[(p, q)] = CellRecord(shape, 0, 0.0)
            return 0
        key = f"{p},{q}"
        if self.cache is not None and key in self.cache:
            self.records[(p, q)] = CellRecord(shape, self.cache[key], 0.0, cached=True)
            return self.cache[key]
        if self.max_side is not None and max(shape) > self.max_side:
            raise SizeGuardExceeded(f"d_{{{p},{q}}}", shape, self.max_side)
        start = time.perf_counter()
        M = self.module
        cols = differential_columns(M, p, q)
        r = rank(ExactMatrix.from_rows(M.field, shape[0], cols), self.method)
        self.records[(p, q)] = CellRecord(shape, r, time.perf_counter() - start)
        if self.cache is not None:
            self.cache[key] = r
        return r

    def dim(self, p: int, q: int) -> int:
        if p < 0 or p > self.n_gens or q < 0:
            return 0
        k = comb(self.n_gens, p) * self.dim_M(q) - self.rank(p, q) - self.rank(p + 1, q - 1)
        if k < 0:
            raise InvariantViolation(f"negative Koszul dimension at ({p}, {q})")
        return k

    def check_dd(self, p: int, q: int, sample: int | None = None, seed: int = 0) -> int:
        """Verify d_{p-1,q+1} o d_{p,q} = 0 on all (or ``sample``) columns.

        Returns the number of columns checked (0 when the composite leaves
        the module window).
        """
        if p < 2 or p > self.n_gens or q < 0 or q + 2 >= len(self.dims):
            return 0
        M = self.module
        n_cols = self.shape(p, q)[1]
        idx: Sequence[int] = range(n_cols)
        if sample is not None and n_cols > sample:
            idx = sorted(random.Random(seed).sample(range(n_cols), sample))
        for k in idx:
            img = apply_differential(M, p, q, {k: M.field.one})
            if apply_differential(M, p - 1, q + 1, img):
                raise InvariantViolation(f"d o d != 0 at column {k} of d_{{{p},{q}}}")
        return len(idx)


# -- section modules of fat-point embeddings --------------------------------

def random_linear_forms(n_gens: int, count: int, seed: int) -> list[list[int]]:
    """Integer coefficient vectors, shared across fields so primes agree.

    The k-th vector has ``n_gens - k`` entries (one generator is dropped by
    each quotient).
    """
    rng = random.Random(seed)
    return [[rng.randint(1, 2**20) for _ in range(n_gens - k)] for k in range(count)]


class KoszulInstance:
    """The module B = sum_q H0(twist + q D_t) over one field, with its complex.

    ``route="direct"`` works with B itself; ``route="reduced"`` quotients by
    up to ``reductions`` verified general linear forms first.
    """

    def __init__(self, Z: FatPointScheme, t: int, field: Field, *,
                 twist: DivisorClass | None = None, top: int = 5,
                 route: str = "reduced", reductions: int = 3, seed: int = 0,
                 method: str = "auto", max_side: int | None = None,
                 check_products: bool = True, cache: dict | None = None):
        if route not in ("direct", "reduced"):
            raise ValueError(f"unknown route {route!r}")
        self.Z, self.t, self.field = Z, t, field
        self.twist = twist if twist is not None else zero_class(Z.s)
        if self.twist.s != Z.s:
            raise ConfigurationError("twist class has the wrong number of points")
        if self.twist.a >= t:
            raise ConfigurationError("twist degree must be below t (window starts at q = 0)")
        Z.check_in_field(field)
        top_degree = self.twist.a + top * t
        if field.characteristic and field.characteristic <= top_degree:
            raise ConfigurationError(
                f"characteristic {field.characteristic} <= top degree {top_degree}")
        self.top = top
        self.route = route
        self.max_reductions = reductions if route == "reduced" else 0
        self.seed = seed
        self.method = method
        self.max_side = max_side
        self.check_products = check_products
        self.W = ideal_piece(Z, t, Z.mults, field)
        self._sections: dict[int, GradedSectionSpace] = {}
        self.reductions_applied = 0
        self.reduction_failure: int | None = None
        self.cache = cache
        self._meta = cache.get("meta") if cache is not None else None
        if self._meta is not None:
            self.reductions_applied = self._meta["reductions"]
            self.reduction_failure = self._meta["reduction_failure"]

    @property
    def n_W(self) -> int:
        return self.W.dim

    @property
    def N(self) -> int:
        return self.W.dim - 1

    def sections(self, q: int) -> GradedSectionSpace:
        if q not in self._sections:
            deg = self.twist.a + q * self.t
            mults = clamp(b + q * m for b, m in zip(self.twist.b, self.Z.mults))
            self._sections[q] = ideal_piece(self.Z, deg, mults, self.field)
        return self._sections[q]

    @cached_property
    def section_module(self) -> GradedModule:
        field, Z, t = self.field, self.Z, self.t
        Bs = [self.sections(q) for q in range(self.top + 1)]
        mult = []
        for q in range(self.top):
            src, dst = Bs[q], Bs[q + 1]
            if src.dim == 0:
                mult.append(tuple(flint_zeros(field, dst.dim, 0) for _ in range(self.n_W)))
                continue
            n, n1 = src.degree, dst.degree
            idx1 = monomial_index(n1)
            mons = monomial_basis(n)
            w_mons = monomial_basis(t)
            BT = to_flint(src.basis).transpose()
            V1 = to_flint(vanishing_matrix(Z, n1, dst.mults, field))
            Sel = flint_zeros(field, dst.dim, len(idx1))
            for k, pc in enumerate(dst.pivots):
                flint_set(Sel, field, k, pc, field.one)
            maps = []
            for w in self.W.basis.rows:
                Mw = flint_zeros(field, len(idx1), len(mons))
                for fi, f in enumerate(mons):
                    for ei, val in w.items():
                        e = w_mons[ei]
                        flint_set(Mw, field, idx1[(e[0] + f[0], e[1] + f[1], e[2] + f[2])], fi, val)
                F = Mw * BT
                if self.check_products and V1.nrows() and not flint_is_zero(V1 * F):
                    raise InvariantViolation(
                        f"product of sections leaves B_{q + 1}: basis bug")
                maps.append(Sel * F)
            mult.append(tuple(maps))
        return GradedModule(field, self.n_W, tuple(b.dim for b in Bs), tuple(mult))

    @cached_property
    def module(self) -> GradedModule:
        M = self.section_module
        forms = random_linear_forms(M.n_gens, self.max_reductions, self.seed)
        applied, failure = 0, None
        for coeffs in forms:
            if M.n_gens <= 1:
                break
            R, bad = reduce_by_linear_form(M, coeffs)
            if R is None:
                failure = bad
                break
            M = R
            applied += 1
        if self._meta is not None and (
                self._meta["reductions"] != applied or tuple(self._meta["dims"]) != M.dims):
            raise InvariantViolation("cached module data disagrees with recomputation")
        self.reductions_applied, self.reduction_failure = applied, failure
        return M

    @property
    def meta(self) -> dict:
        """Shape data of the working module (from cache when available)."""
        if self._meta is None:
            M = self.module
            self._meta = {"n_gens": M.n_gens, "dims": list(M.dims),
                          "reductions": self.reductions_applied,
                          "reduction_failure": self.reduction_failure}
            if self.cache is not None:
                self.cache["meta"] = self._meta
        return self._meta

    @cached_property
    def complex(self) -> KoszulComplex:
        meta = self.meta
        ranks = None
        if self.cache is not None:
            ranks = self.cache.setdefault("ranks", {})
        return KoszulComplex(lambda: self.module, meta["n_gens"], meta["dims"],
                             self.method, self.max_side, ranks)

    def koszul_dim(self, p: int, q: int) -> int:
        return self.complex.dim(p, q)


def sections(inst: KoszulInstance, q: int) -> GradedSectionSpace:
    return inst.sections(q)


def multiply(inst: KoszulInstance, w: dict, q: int, b: dict) -> dict:
    """Coordinates in B_{q+1} of (w in W) * (b in B_q), both given in basis coordinates."""
    return inst.section_module.multiply(w, q, b)


def koszul_dim(inst: KoszulInstance, p: int, q: int) -> int:
    return inst.koszul_dim(p, q)


def form_of(space: GradedSectionSpace, coords: dict) -> dict:
    """The polynomial (monomial index -> coefficient) with the given coordinates."""
    norm = space.field.norm
    out: dict = {}
    for k, c in coords.items():
        for j, v in space.basis.rows[k].items():
            out[j] = out.get(j, 0) + c * v
    return {j: x for j, v in out.items() if (x := norm(v))}


def form_product(f: dict, deg_f: int, g: dict, deg_g: int, field: Field) -> dict:
    mf, mg = monomial_basis(deg_f), monomial_basis(deg_g)
    idx = monomial_index(deg_f + deg_g)
    out: dict = {}
    for i, a in f.items():
        for j, b in g.items():
            e = (mf[i][0] + mg[j][0], mf[i][1] + mg[j][1], mf[i][2] + mg[j][2])
            k = idx[e]
            out[k] = out.get(k, 0) + a * b
    return {k: x for k, v in out.items() if (x := field.norm(v))}
