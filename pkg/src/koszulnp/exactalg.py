"""Exact linear algebra over a prime field or the rationals.

Matrices are stored sparsely as one ``{column: value}`` dict per row, with
no explicit zeros.  Prime-field elements are plain ``int`` residues in
``[0, p)``; rational elements are :class:`fractions.Fraction`.

Ranks and echelon forms over a prime field are delegated to FLINT's
``nmod_mat`` (dense, word-size modulus).  A pure-Python sparse eliminator
with Markowitz-style pivoting serves the rational field and is available
for prime fields through ``method="sparse"``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import flint

# Two word-size primes just below 2**31; products of residues fit in 64 bits.
DEFAULT_PRIMES = (2147483647, 2147483629)
MIN_PRIME = 2**30

# Matrices with at most this many (rows * cols) go straight to dense FLINT.
DENSE_THRESHOLD = 4_000_000


class ExactAlgError(Exception):
    pass


class PrimeDisagreement(ExactAlgError):
    """Two primes produced different ranks for the same computation."""


def is_prime(n: int) -> bool:
    return n >= 2 and bool(flint.fmpz(n).is_prime())


class PrimeField:
    """The field Z/pZ with ``p`` a prime above 2**30."""

    is_prime_field = True

    def __init__(self, p: int):
        p = int(p)
        if not is_prime(p):
            raise ExactAlgError(f"modulus {p} is not prime")
        if p <= MIN_PRIME:
            raise ExactAlgError(f"prime {p} must exceed 2**30")
        self.p = p

    @property
    def characteristic(self) -> int:
        return self.p

    def __repr__(self) -> str:
        return f"PrimeField({self.p})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self) -> int:
        return hash(("GF", self.p))

    zero = 0
    one = 1

    def __call__(self, x: Any) -> int:
        if isinstance(x, Fraction):
            den = x.denominator % self.p
            if den == 0:
                raise ZeroDivisionError(f"denominator of {x} vanishes mod {self.p}")
            return x.numerator * pow(den, -1, self.p) % self.p
        return int(x) % self.p

    def norm(self, x: int) -> int:
        return x % self.p

    def inv(self, x: int) -> int:
        if x % self.p == 0:
            raise ZeroDivisionError("inverse of zero")
        return pow(x, -1, self.p)

    def random_element(self, rng: random.Random) -> int:
        return rng.randrange(self.p)

    def lift(self, x: int) -> int:
        """Symmetric integer representative, for readable output."""
        return x - self.p if x > self.p // 2 else x


class RationalField:
    """The rationals, with exact :class:`Fraction` arithmetic."""

    is_prime_field = False
    characteristic = 0
    zero = Fraction(0)
    one = Fraction(1)

    def __repr__(self) -> str:
        return "RationalField()"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RationalField)

    def __hash__(self) -> int:
        return hash("QQ")

    def __call__(self, x: Any) -> Fraction:
        return Fraction(x)

    def norm(self, x: Fraction) -> Fraction:
        return x

    def inv(self, x: Fraction) -> Fraction:
        if x == 0:
            raise ZeroDivisionError("inverse of zero")
        return 1 / Fraction(x)

    def random_element(self, rng: random.Random) -> Fraction:
        return Fraction(rng.randint(-1000, 1000))

    def lift(self, x: Fraction) -> Fraction:
        return x


Field = PrimeField | RationalField


@dataclass(frozen=True, eq=False)
class ExactMatrix:
    """Sparse matrix over ``field``; ``rows[i]`` maps column -> nonzero value."""

    n_rows: int
    n_cols: int
    field: Field
    rows: tuple[dict, ...]

    @classmethod
    def zeros(cls, field: Field, n_rows: int, n_cols: int) -> "ExactMatrix":
        return cls(n_rows, n_cols, field, tuple({} for _ in range(n_rows)))

    @classmethod
    def identity(cls, field: Field, n: int) -> "ExactMatrix":
        return cls(n, n, field, tuple({i: field.one} for i in range(n)))

    @classmethod
    def from_dense(cls, field: Field, data: Sequence[Sequence[Any]],
                   n_cols: int | None = None) -> "ExactMatrix":
        if n_cols is None:
            n_cols = len(data[0]) if data else 0
        rows = []
        for r in data:
            if len(r) != n_cols:
                raise ExactAlgError("ragged dense input")
            row = {}
            for j, v in enumerate(r):
                v = field(v)
                if v:
                    row[j] = v
            rows.append(row)
        return cls(len(rows), n_cols, field, tuple(rows))

    @classmethod
    def from_entries(cls, field: Field, n_rows: int, n_cols: int,
                     entries: Iterable[tuple[int, int, Any]]) -> "ExactMatrix":
        rows: list[dict] = [{} for _ in range(n_rows)]
        for i, j, v in entries:
            if not (0 <= i < n_rows and 0 <= j < n_cols):
                raise ExactAlgError(f"entry ({i}, {j}) outside {n_rows}x{n_cols}")
            if j in rows[i]:
                raise ExactAlgError(f"duplicate entry at ({i}, {j})")
            v = field(v)
            if v:
                rows[i][j] = v
        return cls(n_rows, n_cols, field, tuple(rows))

    @classmethod
    def from_rows(cls, field: Field, n_cols: int, rows: Iterable[dict]) -> "ExactMatrix":
        """Wrap already-normalized sparse rows (no copy, no zeros assumed)."""
        rows = tuple(rows)
        return cls(len(rows), n_cols, field, rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def entries(self) -> list[tuple[int, int, Any]]:
        return [(i, j, v) for i, r in enumerate(self.rows) for j, v in sorted(r.items())]

    def to_dense(self) -> list[list]:
        out = [[self.field.zero] * self.n_cols for _ in range(self.n_rows)]
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                out[i][j] = v
        return out

    def transpose(self) -> "ExactMatrix":
        cols: list[dict] = [{} for _ in range(self.n_cols)]
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                cols[j][i] = v
        return ExactMatrix(self.n_cols, self.n_rows, self.field, tuple(cols))

    def is_zero(self) -> bool:
        return not any(self.rows)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return (self.shape == other.shape and self.field == other.field
                and all(a == b for a, b in zip(self.rows, other.rows)))

    def __repr__(self) -> str:
        return f"ExactMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz}, {self.field!r})"

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        return matmul(self, other)

    def apply(self, vec: dict) -> dict:
        """Product with a sparse column vector ``{index: value}``."""
        norm = self.field.norm
        out = {}
        for i, r in enumerate(self.rows):
            s = 0
            for j, v in vec.items():
                w = r.get(j)
                if w:
                    s += w * v
            s = norm(s)
            if s:
                out[i] = s
        return out


# -- FLINT bridges -----------------------------------------------------------

def to_nmod(M: ExactMatrix) -> "flint.nmod_mat":
    F = flint.nmod_mat(M.n_rows, M.n_cols, M.field.p)
    for i, r in enumerate(M.rows):
        for j, v in r.items():
            F[i, j] = v
    return F


def from_nmod(F: "flint.nmod_mat", field: PrimeField, n_rows: int | None = None) -> ExactMatrix:
    n_rows = F.nrows() if n_rows is None else n_rows
    n_cols = F.ncols()
    rows = []
    for row in F.tolist()[:n_rows]:
        rows.append({j: int(v) for j, v in enumerate(row) if int(v)})
    return ExactMatrix(n_rows, n_cols, field, tuple(rows))


def _nmod_from_vectors(vectors: Sequence[dict], length: int, p: int) -> "flint.nmod_mat":
    F = flint.nmod_mat(len(vectors), length, p)
    for i, vec in enumerate(vectors):
        for j, v in vec.items():
            F[i, j] = v
    return F


# -- matmul ------------------------------------------------------------------

def matmul(A: ExactMatrix, B: ExactMatrix) -> ExactMatrix:
    if A.n_cols != B.n_rows:
        raise ExactAlgError(f"shape mismatch {A.shape} @ {B.shape}")
    if A.field != B.field:
        raise ExactAlgError("field mismatch")
    field = A.field
    if field.is_prime_field and A.n_rows * B.n_cols * max(A.n_cols, 1) > 50_000:
        return from_nmod(to_nmod(A) * to_nmod(B), field)
    norm = field.norm
    out = []
    for r in A.rows:
        acc: dict = {}
        for k, a in r.items():
            for j, b in B.rows[k].items():
                acc[j] = acc.get(j, 0) + a * b
        out.append({j: w for j, v in acc.items() if (w := norm(v))})
    return ExactMatrix(A.n_rows, B.n_cols, field, tuple(out))


# -- sparse elimination ------------------------------------------------------

def _sparse_rank(rows: Sequence[dict], field: Field) -> int:
    """Markowitz-style sparse elimination; destroys nothing (copies rows).

    Pivot choice: shortest active row, then within it the column with the
    fewest active entries; ties broken by lowest column, then lowest row.
    """
    norm, inv = field.norm, field.inv
    active = {i: dict(r) for i, r in enumerate(rows) if r}
    colrows: dict[int, set[int]] = {}
    for i, r in active.items():
        for j in r:
            colrows.setdefault(j, set()).add(i)
    rank = 0
    while active:
        best = None
        for i, r in active.items():
            key = (len(r), i)
            if best is None or key < best:
                best = key
        pi = best[1]
        prow = active.pop(pi)
        pc = min(prow, key=lambda j: (len(colrows[j]), j))
        for j in prow:
            colrows[j].discard(pi)
        pinv = inv(prow[pc])
        for k in sorted(colrows.pop(pc)):
            r = active[k]
            f = norm(r.pop(pc) * pinv)
            for j, v in prow.items():
                if j == pc:
                    continue
                w = norm(r.get(j, 0) - f * v)
                if w:
                    if j not in r:
                        colrows[j].add(k)
                    r[j] = w
                elif j in r:
                    del r[j]
                    colrows[j].discard(k)
            if not r:
                del active[k]
        rank += 1
    return rank


def _sparse_rref(rows: Sequence[dict], field: Field) -> tuple[list[dict], list[int]]:
    """Incremental reduced echelon form; returns (nonzero rows, pivots) sorted."""
    norm, inv = field.norm, field.inv
    pivots: dict[int, dict] = {}
    for row in rows:
        r = dict(row)
        for pc in [c for c in r if c in pivots]:
            f = r.get(pc)
            if not f:
                continue
            for j, v in pivots[pc].items():
                w = norm(r.get(j, 0) - f * v)
                if w:
                    r[j] = w
                else:
                    r.pop(j, None)
        if not r:
            continue
        lead = min(r)
        li = inv(r[lead])
        r = {j: norm(v * li) for j, v in r.items()}
        for prow in pivots.values():
            f = prow.get(lead)
            if f:
                for j, v in r.items():
                    w = norm(prow.get(j, 0) - f * v)
                    if w:
                        prow[j] = w
                    else:
                        prow.pop(j, None)
        pivots[lead] = r
    order = sorted(pivots)
    return [pivots[c] for c in order], order


# -- dense (FLINT) elimination -----------------------------------------------

def _dense_rref(M: ExactMatrix) -> tuple[list[dict], list[int]]:
    F, r = to_nmod(M).rref()
    rows = []
    pivots = []
    for row in F.tolist()[:r]:
        d = {j: int(v) for j, v in enumerate(row) if int(v)}
        rows.append(d)
        pivots.append(min(d))
    return rows, pivots


def _prefix_doubling_rank(M: ExactMatrix, seed: int = 0) -> int:
    """Rank from growing shuffled prefixes of the longer side.

    A prefix already reaching full rank certifies the answer; otherwise the
    prefix doubles until all vectors are included.
    """
    if M.n_rows >= M.n_cols:
        vecs, length = list(M.rows), M.n_cols
    else:
        vecs, length = list(M.transpose().rows), M.n_rows
    vecs = [v for v in vecs if v]
    full = min(length, len(vecs))
    order = list(range(len(vecs)))
    random.Random(seed).shuffle(order)
    size = full + 64
    while True:
        chunk = [vecs[i] for i in order[:size]]
        r = _nmod_from_vectors(chunk, length, M.field.p).rank()
        if r == full or size >= len(vecs):
            return r
        size *= 2


def _prune_singletons(rows: Sequence[dict]) -> tuple[int, list[dict]]:
    """Pivot on singleton rows and singleton columns (no fill-in possible).

    Returns the number of pivots taken and the surviving rows, restricted to
    surviving columns.  Values are never combined, so the field is irrelevant.
    """
    active = {i: dict(r) for i, r in enumerate(rows) if r}
    colrows: dict[int, set[int]] = {}
    for i, r in active.items():
        for j in r:
            colrows.setdefault(j, set()).add(i)
    row_q = [i for i, r in active.items() if len(r) == 1]
    col_q = [j for j, s in colrows.items() if len(s) == 1]
    pivots = 0
    while row_q or col_q:
        if row_q:
            i = row_q.pop()
            r = active.get(i)
            if r is None or len(r) != 1:
                continue
            (j,) = r
            # the column dies: strip it from every other row
            for k in colrows.pop(j):
                if k == i:
                    continue
                rk = active[k]
                del rk[j]
                if not rk:
                    del active[k]
                elif len(rk) == 1:
                    row_q.append(k)
            del active[i]
        else:
            j = col_q.pop()
            s = colrows.get(j)
            if s is None or len(s) != 1:
                continue
            (i,) = s
            # the row dies: its other columns lose one entry each
            for c in active.pop(i):
                cs = colrows[c]
                cs.discard(i)
                if c == j or not cs:
                    colrows.pop(c)
                elif len(cs) == 1:
                    col_q.append(c)
        pivots += 1
    return pivots, list(active.values())


def rank(M: ExactMatrix, method: str = "auto", dense_threshold: int = DENSE_THRESHOLD) -> int:
    """Rank of ``M`` over its field.

    ``method`` is ``"auto"``, ``"dense"`` or ``"sparse"``.  ``"sparse"`` is
    full Markowitz elimination (always used over the rationals).  In auto
    mode a prime-field matrix first loses its singleton rows and columns;
    the remaining core goes to FLINT, whole or by shuffled prefixes above
    ``dense_threshold`` cells.
    """
    if M.n_rows == 0 or M.n_cols == 0 or M.is_zero():
        return 0
    if method == "sparse" or not M.field.is_prime_field:
        rows = M.rows if M.n_rows <= M.n_cols else M.transpose().rows
        return _sparse_rank(rows, M.field)
    if method == "dense":
        return to_nmod(M).rank()
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if M.n_rows * M.n_cols <= dense_threshold // 16:
        return to_nmod(M).rank()
    pivots, core = _prune_singletons(M.rows)
    if not core:
        return pivots
    cols = sorted({j for r in core for j in r})
    where = {j: k for k, j in enumerate(cols)}
    core = tuple({where[j]: v for j, v in r.items()} for r in core)
    C = ExactMatrix(len(core), len(cols), M.field, core)
    if C.n_rows * C.n_cols <= dense_threshold:
        return pivots + to_nmod(C).rank()
    return pivots + _prefix_doubling_rank(C)


def rref(M: ExactMatrix, method: str = "auto") -> tuple[ExactMatrix, tuple[int, ...]]:
    """Reduced row-echelon form (zero rows kept at the bottom) and pivots."""
    if M.field.is_prime_field and method != "sparse" and M.n_rows and M.n_cols:
        rows, piv = _dense_rref(M)
    else:
        rows, piv = _sparse_rref(M.rows, M.field)
    rows = rows + [{} for _ in range(M.n_rows - len(rows))]
    return ExactMatrix(M.n_rows, M.n_cols, M.field, tuple(rows)), tuple(piv)


def row_space_basis(M: ExactMatrix, method: str = "auto") -> tuple[ExactMatrix, tuple[int, ...]]:
    """Nonzero rows of ``rref(M)``: the canonical basis of the row space."""
    R, piv = rref(M, method)
    return ExactMatrix(len(piv), M.n_cols, M.field, R.rows[:len(piv)]), piv


def kernel_basis(M: ExactMatrix, method: str = "auto") -> ExactMatrix:
    """Rows spanning the right null space, in reduced echelon form."""
    field = M.field
    R, piv = rref(M, method)
    pivset = set(piv)
    free = [j for j in range(M.n_cols) if j not in pivset]
    # column f of R, restricted to pivot rows
    colvals: dict[int, list[tuple[int, Any]]] = {f: [] for f in free}
    for r_idx, pc in enumerate(piv):
        for j, v in R.rows[r_idx].items():
            if j in colvals:
                colvals[j].append((pc, v))
    vecs = []
    for f in free:
        v = {f: field.one}
        for pc, val in colvals[f]:
            v[pc] = field.norm(-val)
        vecs.append(v)
    K = ExactMatrix(len(vecs), M.n_cols, field, tuple(vecs))
    if not vecs:
        return K
    basis, _ = row_space_basis(K, method)
    return basis


def coordinates(basis: ExactMatrix, pivots: Sequence[int], vec: dict) -> dict:
    """Coordinates of ``vec`` in an RREF ``basis`` (read off at pivots).

    Raises when ``vec`` is not in the row span.
    """
    coords = {k: vec[pc] for k, pc in enumerate(pivots) if vec.get(pc)}
    norm = basis.field.norm
    recon: dict = {}
    for k, c in coords.items():
        for j, v in basis.rows[k].items():
            recon[j] = recon.get(j, 0) + c * v
    recon = {j: w for j, v in recon.items() if (w := norm(v))}
    if recon != {j: v for j, v in vec.items() if v}:
        raise ExactAlgError("vector is not in the span of the basis")
    return coords


# -- FLINT matrices for bulk products (both fields) --------------------------

def flint_zeros(field: Field, n_rows: int, n_cols: int):
    if field.is_prime_field:
        return flint.nmod_mat(n_rows, n_cols, field.p)
    return flint.fmpq_mat(n_rows, n_cols)


def _flint_scalar(field: Field, v):
    if field.is_prime_field:
        return v
    v = Fraction(v)
    return flint.fmpq(v.numerator, v.denominator)


def flint_set(F, field: Field, i: int, j: int, v) -> None:
    F[i, j] = _flint_scalar(field, v)


def to_flint(M: ExactMatrix):
    if M.field.is_prime_field:
        return to_nmod(M)
    F = flint.fmpq_mat(M.n_rows, M.n_cols)
    for i, r in enumerate(M.rows):
        for j, v in r.items():
            F[i, j] = _flint_scalar(M.field, v)
    return F


def flint_rows(F, field: Field) -> list[dict]:
    """Sparse rows of a FLINT matrix, as field elements."""
    out = []
    if field.is_prime_field:
        for row in F.tolist():
            out.append({j: iv for j, v in enumerate(row) if (iv := int(v))})
    else:
        for row in F.tolist():
            out.append({j: Fraction(int(v.p), int(v.q)) for j, v in enumerate(row) if v != 0})
    return out


def from_flint(F, field: Field) -> ExactMatrix:
    return ExactMatrix(F.nrows(), F.ncols(), field, tuple(flint_rows(F, field)))


def flint_is_zero(F) -> bool:
    return all(v == 0 for v in F.entries())
