"""Divisor classes on the blowup of the plane at the support of Z.

A class a*E0 - sum b_i*E_i is stored as ``DivisorClass(a, (b_1, ..., b_s))``.
The intersection form is diag(1, -1, ..., -1) in the basis E0, ..., Es.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

from .exactalg import Field
from .polyspace import FatPointScheme, ideal_piece, sigma as sigma_of


class PicardError(ValueError):
    pass


@dataclass(frozen=True)
class DivisorClass:
    a: int
    b: tuple[int, ...]

    def __init__(self, a: int, b: Sequence[int]):
        object.__setattr__(self, "a", int(a))
        object.__setattr__(self, "b", tuple(int(x) for x in b))

    @property
    def s(self) -> int:
        return len(self.b)

    def __add__(self, other: "DivisorClass") -> "DivisorClass":
        _same_s(self, other)
        return DivisorClass(self.a + other.a, [x + y for x, y in zip(self.b, other.b)])

    def __mul__(self, k: int) -> "DivisorClass":
        return DivisorClass(k * self.a, [k * x for x in self.b])

    __rmul__ = __mul__

    def __neg__(self) -> "DivisorClass":
        return self * -1

    def __str__(self) -> str:
        return f"({self.a}; {', '.join(map(str, self.b))})"


def _same_s(D: DivisorClass, E: DivisorClass) -> None:
    if D.s != E.s:
        raise PicardError(f"classes live on different blowups (s={D.s} vs s={E.s})")


def intersect(D: DivisorClass, E: DivisorClass) -> int:
    _same_s(D, E)
    return D.a * E.a - sum(x * y for x, y in zip(D.b, E.b))


def zero_class(s: int) -> DivisorClass:
    return DivisorClass(0, [0] * s)


def line_class(s: int) -> DivisorClass:
    return DivisorClass(1, [0] * s)


def exceptional_class(s: int, i: int) -> DivisorClass:
    """E_i as a class: coefficient -1 in the b-slot (since b enters with a minus)."""
    b = [0] * s
    b[i] = -1
    return DivisorClass(0, b)


def canonical(s: int) -> DivisorClass:
    if s < 1:
        raise PicardError("canonical class needs s >= 1")
    return DivisorClass(-3, [-1] * s)


def D_t(Z: FatPointScheme, t: int) -> DivisorClass:
    return DivisorClass(t, Z.mults)


def clamp(b: Sequence[int]) -> tuple[int, ...]:
    return tuple(max(x, 0) for x in b)


def h0(D: DivisorClass, Z: FatPointScheme, field: Field) -> int:
    """Sections of D as degree-a forms; negative b_i impose nothing."""
    if D.s != Z.s:
        raise PicardError(f"class has s={D.s}, scheme has s={Z.s}")
    if D.a < 0:
        return 0
    return ideal_piece(Z, D.a, clamp(D.b), field).dim


def riemann_roch_h0(t: int, Z: FatPointScheme) -> int:
    """Predicted h0(K + D_t) = t(t-3)/2 - sum C(m_i, 2) + 1, valid for t >= d."""
    if t < Z.d:
        raise PicardError(
            f"t = {t} < d = {Z.d}: the Riemann-Roch count is only established for t >= d")
    return t * (t - 3) // 2 - sum(comb(m, 2) for m in Z.mults) + 1


@dataclass(frozen=True)
class BoundResult:
    sigma: int
    d: int
    p: int
    dp: int
    binding_term: tuple[str, ...]

    def to_json(self) -> dict:
        return {"sigma": self.sigma, "d": self.d, "p": self.p, "dp": self.dp,
                "binding_term": list(self.binding_term)}


def bound_from_sigma(sig: int, d: int, p: int) -> BoundResult:
    if p < 0:
        raise PicardError(f"p = {p} must be >= 0")
    # least t with 3(t - 1) >= d + p
    third = 1 + -(-(d + p) // 3)
    terms = {"sigma+1": sig + 1, "d": d, "1+(d+p)/3": third}
    dp = max(terms.values())
    return BoundResult(sig, d, p, dp, tuple(k for k, v in terms.items() if v == dp))


def bound_dp(Z: FatPointScheme, p: int, field: Field, sig: int | None = None) -> BoundResult:
    if sig is None:
        sig = sigma_of(Z, field)
    return bound_from_sigma(sig, Z.d, p)


@dataclass(frozen=True)
class AmbientDim:
    N: int
    lower_bound: int
    very_ample: bool

    def to_json(self) -> dict:
        return {"N": self.N, "lower_bound": self.lower_bound, "very_ample": self.very_ample}


def ambient_dim(Z: FatPointScheme, t: int, field: Field, sig: int | None = None) -> AmbientDim:
    """N = h0(D_t) - 1 next to the lower bound C(t+2, 2) - deg Z - 1."""
    if sig is None:
        sig = sigma_of(Z, field)
    N = h0(D_t(Z, t), Z, field) - 1
    lower = comb(t + 2, 2) - Z.degZ - 1
    if N < lower:
        raise PicardError(f"N = {N} below C(t+2,2) - deg Z - 1 = {lower}")
    return AmbientDim(N, lower, t >= sig + 1)
