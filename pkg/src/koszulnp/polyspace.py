"""Graded pieces of fat-point ideals in k[w0, w1, w2].

A degree-n form is a coefficient vector over :func:`monomial_basis` (n).
Vanishing to order mu at a point is imposed by the (mu-1)-th partial
derivatives at that point; by Euler's relation this is equivalent to all
lower-order conditions once the characteristic exceeds n.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Sequence

from .exactalg import ExactAlgError, ExactMatrix, Field, kernel_basis, rank


class ConfigurationError(ValueError):
    pass


def _as_fraction(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        raise ConfigurationError(f"coordinate {x!r}: use integers or exact rationals")
    return Fraction(x)


@dataclass(frozen=True)
class PointP2:
    """A point of the projective plane with rational homogeneous coordinates.

    Stored with the last nonzero coordinate scaled to 1.
    """

    coords: tuple[Fraction, Fraction, Fraction]

    def __init__(self, coords: Sequence):
        c = tuple(_as_fraction(x) for x in coords)
        if len(c) != 3:
            raise ConfigurationError(f"a point needs 3 coordinates, got {len(c)}")
        nz = [x for x in c if x != 0]
        if not nz:
            raise ConfigurationError("the zero vector is not a projective point")
        last = nz[-1]
        object.__setattr__(self, "coords", tuple(x / last for x in c))

    def in_field(self, field: Field) -> tuple:
        return tuple(field(x) for x in self.coords)

    def to_json(self) -> list[str]:
        return [str(x) for x in self.coords]


def collinear(p: PointP2, q: PointP2, r: PointP2) -> bool:
    (a, b, c), (d, e, f), (g, h, i) = p.coords, q.coords, r.coords
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g) == 0


@dataclass(frozen=True)
class FatPointScheme:
    """Z = m_1 P_1 + ... + m_s P_s with distinct support points."""

    points: tuple[PointP2, ...]
    mults: tuple[int, ...]
    seed: int | None = dc_field(default=None, compare=False)
    veronese: bool = False

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(
            p if isinstance(p, PointP2) else PointP2(p) for p in self.points))
        object.__setattr__(self, "mults", tuple(int(m) for m in self.mults))
        if self.veronese:
            if self.points or self.mults:
                raise ConfigurationError("veronese: the control case takes no points")
            return
        if len(self.points) < 1:
            raise ConfigurationError("points: need at least one point")
        if len(self.points) != len(self.mults):
            raise ConfigurationError(
                f"mults: {len(self.mults)} multiplicities for {len(self.points)} points")
        for i, m in enumerate(self.mults):
            if m < 1:
                raise ConfigurationError(f"mults[{i}] = {m}: multiplicities must be >= 1")
        seen: dict[tuple, int] = {}
        for i, p in enumerate(self.points):
            if p.coords in seen:
                raise ConfigurationError(
                    f"points[{seen[p.coords]}] and points[{i}] coincide")
            seen[p.coords] = i

    @property
    def s(self) -> int:
        return len(self.points)

    @property
    def d(self) -> int:
        return sum(self.mults)

    @property
    def degZ(self) -> int:
        return sum(comb(m + 1, 2) for m in self.mults)

    @classmethod
    def empty(cls) -> "FatPointScheme":
        """No points at all: the plane itself (Veronese control case)."""
        return cls((), (), veronese=True)

    def key(self) -> tuple:
        return (tuple(p.coords for p in self.points), self.mults, self.veronese)

    def check_in_field(self, field: Field) -> None:
        """Reject schemes whose points collide (or blow up) modulo the prime."""
        try:
            images = [p.in_field(field) for p in self.points]
        except ZeroDivisionError as exc:
            raise ConfigurationError(f"point not defined over {field!r}: {exc}") from None
        seen = {}
        for i, c in enumerate(images):
            if c in seen:
                raise ConfigurationError(
                    f"points[{seen[c]}] and points[{i}] coincide over {field!r}")
            seen[c] = i


def random_points(s: int, seed: int, coord_range: int = 10_000,
                  general: bool = True, max_tries: int = 1000) -> list[PointP2]:
    """Seeded integer points; resamples on coincidences.

    With ``general`` set, also rejects collinear triples, so the sample is in
    linear general position.
    """
    if s < 1:
        raise ConfigurationError("random points: count must be >= 1")
    rng = random.Random(seed)
    pts: list[PointP2] = []
    tries = 0
    while len(pts) < s:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(f"could not sample {s} distinct points after {max_tries} tries")
        c = [rng.randint(-coord_range, coord_range) for _ in range(3)]
        if c == [0, 0, 0]:
            continue
        p = PointP2(c)
        if any(p == q for q in pts):
            continue
        if general and any(collinear(p, a, b)
                           for i, a in enumerate(pts) for b in pts[i + 1:]):
            continue
        pts.append(p)
    return pts


@lru_cache(maxsize=None)
def monomial_basis(n: int) -> tuple[tuple[int, int, int], ...]:
    """Exponent triples of degree n, graded-lex with w0 > w1 > w2."""
    if n < 0:
        raise ValueError(f"negative degree {n}")
    return tuple((a, b, n - a - b) for a in range(n, -1, -1) for b in range(n - a, -1, -1))


@lru_cache(maxsize=None)
def monomial_index(n: int) -> dict[tuple[int, int, int], int]:
    return {e: i for i, e in enumerate(monomial_basis(n))}


def _falling(e: int, k: int) -> int:
    return factorial(e) // factorial(e - k)


def _check_char(field: Field, n: int) -> None:
    ch = field.characteristic
    if ch and ch <= n:
        raise ConfigurationError(
            f"characteristic {ch} does not exceed degree {n}; derivative conditions unfaithful")


def vanishing_matrix(Z: FatPointScheme, n: int, mults: Sequence[int], field: Field) -> ExactMatrix:
    """Rows are the functionals f -> (d^alpha f)(P_i) with |alpha| = mu_i - 1.

    When mu_i - 1 exceeds n the order-n derivatives are used instead; they
    force f = 0, which is the right answer.
    """
    if n < 0:
        raise ValueError(f"negative degree {n}")
    if len(mults) != Z.s:
        raise ValueError("one multiplicity per point required")
    _check_char(field, n)
    mons = monomial_basis(n)
    rows = []
    for P, mu in zip(Z.points, mults):
        if mu <= 0:
            continue
        k = min(mu - 1, n)
        x = P.in_field(field)
        # powers of each coordinate, reused across monomials
        pw = [[field.one] * (n + 1) for _ in range(3)]
        for v in range(3):
            for e in range(1, n + 1):
                pw[v][e] = field.norm(pw[v][e - 1] * x[v])
        for alpha in monomial_basis(k):
            row = {}
            for j, e in enumerate(mons):
                if e[0] < alpha[0] or e[1] < alpha[1] or e[2] < alpha[2]:
                    continue
                c = (_falling(e[0], alpha[0]) * _falling(e[1], alpha[1])
                     * _falling(e[2], alpha[2]))
                val = field.norm(field(c) * pw[0][e[0] - alpha[0]]
                                 * pw[1][e[1] - alpha[1]] * pw[2][e[2] - alpha[2]])
                if val:
                    row[j] = val
            rows.append(row)
    return ExactMatrix.from_rows(field, len(mons), rows)


@dataclass(frozen=True, eq=False)
class GradedSectionSpace:
    """Degree-n forms vanishing to order mu_i at P_i, as an RREF row basis."""

    degree: int
    mults: tuple[int, ...]
    basis: ExactMatrix
    pivots: tuple[int, ...]

    @property
    def dim(self) -> int:
        return self.basis.n_rows

    @property
    def field(self) -> Field:
        return self.basis.field


def ideal_piece(Z: FatPointScheme, n: int, mults: Sequence[int], field: Field) -> GradedSectionSpace:
    mults = tuple(int(m) for m in mults)
    if n < 0:
        return GradedSectionSpace(n, mults, ExactMatrix.zeros(field, 0, 0), ())
    V = vanishing_matrix(Z, n, mults, field)
    K = kernel_basis(V)
    pivots = tuple(min(r) for r in K.rows)
    return GradedSectionSpace(n, mults, K, pivots)


def hilbert_function(Z: FatPointScheme, n: int, field: Field) -> tuple[int, int]:
    """(dim I_n, dim (R/I)_n) for the fat-point ideal I of Z."""
    total = comb(n + 2, 2)
    V = vanishing_matrix(Z, n, Z.mults, field)
    h_I = total - rank(V)
    return h_I, total - h_I


@dataclass(frozen=True)
class SigmaResult:
    sigma: int
    n_star: int
    h_quotient: tuple[int, ...]


def sigma_data(Z: FatPointScheme, field: Field) -> SigmaResult:
    """Scan the Hilbert function of R/I until it reaches deg Z.

    The empty scheme gets sigma = 0 (used for bound display only).
    """
    if Z.veronese:
        return SigmaResult(0, -1, ())
    hq = []
    for n in range(Z.d + 1):
        _, q = hilbert_function(Z, n, field)
        hq.append(q)
        if q == Z.degZ:
            return SigmaResult(n + 1, n, tuple(hq))
    raise ExactAlgError(f"Hilbert function never reached deg Z = {Z.degZ} by n = {Z.d}")


def sigma(Z: FatPointScheme, field: Field) -> int:
    return sigma_data(Z, field).sigma
