"""Dual-prime driver: Betti tables, N_p checks, scans and the duality check.

Every quantity is computed once per configured field and the results must
agree; a mismatch raises :class:`PrimeDisagreement`.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace
from typing import Iterable, Sequence

from .cache import RankCache
from .exactalg import DEFAULT_PRIMES, Field, PrimeDisagreement, PrimeField, RationalField
from .koszul import KoszulInstance, PreconditionError
from .picard import (BoundResult, DivisorClass, D_t, bound_from_sigma, canonical, h0,
                     riemann_roch_h0)
from .polyspace import FatPointScheme, SigmaResult, sigma_data


@dataclass(frozen=True)
class EngineOptions:
    primes: tuple[int, ...] = DEFAULT_PRIMES
    rational: bool = False
    route: str = "reduced"
    seed: int = 0
    q_max: int = 3
    method: str = "auto"
    max_side: int | None = 250_000
    # d o d is checked on every column below this many, else on a sample
    dd_exact_below: int = 4000
    dd_sample: int = 200
    cache: RankCache | None = dc_field(default=None, compare=False)

    def fields(self) -> list[Field]:
        if self.rational:
            return [RationalField()]
        return [PrimeField(p) for p in self.primes]


def field_label(field: Field) -> str:
    return str(field.p) if field.is_prime_field else "QQ"


def agreed(what: str, values: Sequence, fields: Sequence[Field]):
    if len(set(values)) > 1:
        detail = ", ".join(f"{field_label(f)}: {v}" for f, v in zip(fields, values))
        raise PrimeDisagreement(f"bad prime: {what} differs ({detail})")
    return values[0]


def sigma_checked(Z: FatPointScheme, fields: Sequence[Field]) -> SigmaResult:
    return agreed("sigma", [sigma_data(Z, f) for f in fields], fields)


class KoszulEngine:
    """One :class:`KoszulInstance` per field, queried in lockstep."""

    def __init__(self, Z: FatPointScheme, t: int, opts: EngineOptions = EngineOptions(),
                 twist: DivisorClass | None = None):
        self.Z, self.t, self.opts = Z, t, opts
        self.twist = twist
        self.fields = opts.fields()
        self.instances = self._build(3)
        metas = [inst.meta for inst in self.instances]
        applied = [m["reductions"] for m in metas]
        if len(set(applied)) > 1:
            # keep the primes on identical routes so their ranks are comparable
            self.instances = self._build(min(applied))
        self.dd_columns = 0
        self.dd_cells = 0

    def _build(self, reductions: int) -> list[KoszulInstance]:
        o = self.opts
        out = []
        tw = self.twist
        key = f"t={self.t}|twist={tw}|route={o.route}|seed={o.seed}|red={reductions}|qmax={o.q_max}"
        for f in self.fields:
            bucket = o.cache.bucket(self.Z, field_label(f), key) if o.cache else None
            out.append(KoszulInstance(
                self.Z, self.t, f, twist=tw, top=o.q_max + 2, route=o.route,
                reductions=reductions, seed=o.seed, method=o.method,
                max_side=o.max_side, cache=bucket))
        return out

    def _agreed(self, what: str, values: Sequence):
        return agreed(what, values, self.fields)

    @property
    def n_W(self) -> int:
        return self._agreed("dim W", [inst.n_W for inst in self.instances])

    @property
    def N(self) -> int:
        return self.n_W - 1

    @property
    def meta(self) -> dict:
        return self.instances[0].meta

    def section_dims(self) -> list[int]:
        return self._agreed("section dimensions",
                            [tuple(inst.meta["dims"]) for inst in self.instances])

    def koszul_dim(self, p: int, q: int) -> int:
        dims = [inst.koszul_dim(p, q) for inst in self.instances]
        for key in ((p, q), (p + 1, q - 1)):
            ranks = [inst.complex.records[key].rank for inst in self.instances
                     if key in inst.complex.records]
            if len(ranks) == len(self.instances):
                self._agreed(f"rank of d_{{{key[0]},{key[1]}}}", ranks)
        return self._agreed(f"dim K_{{{p},{q}}}", dims)

    def records(self) -> dict:
        return self.instances[0].complex.records

    def matrices_compared(self) -> int:
        return sum(1 for r in self.records().values() if 0 not in r.shape)

    def check_complex(self) -> None:
        """d o d = 0 for every differential built so far, on every field."""
        o = self.opts
        for inst in self.instances:
            cx = inst.complex
            for (p, q), rec in list(cx.records.items()):
                if rec.cached or 0 in rec.shape:
                    continue
                sample = None if rec.shape[1] <= o.dd_exact_below else o.dd_sample
                n = cx.check_dd(p, q, sample=sample)
                if n:
                    self.dd_columns += n
                    self.dd_cells += 1


@dataclass
class BettiTable:
    """beta_{i, i+q} = dim K_{i,q}; rows of the diagram are q, columns are i."""

    entries: dict[tuple[int, int], int]
    i_max: int
    q_max: int

    def koszul(self, i: int, q: int) -> int:
        return self.entries.get((i, i + q), 0)

    def ascii(self) -> str:
        cols = range(self.i_max + 1)
        rows = range(self.q_max + 1)
        cells = {(i, q): self.koszul(i, q) for i in cols for q in rows}
        totals = [sum(cells[(i, q)] for q in rows) for i in cols]
        width = max(len(str(v)) for v in list(cells.values()) + totals + [self.i_max])
        label = max(len("total:"), len(str(self.q_max)) + 1)
        lines = [" " * label + "".join(f" {i:>{width}}" for i in cols),
                 f"{'total:':>{label}}" + "".join(f" {v:>{width}}" for v in totals)]
        for q in rows:
            body = "".join(f" {(cells[(i, q)] or '.'):>{width}}" for i in cols)
            lines.append(f"{str(q) + ':':>{label}}" + body)
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {"i_max": self.i_max, "q_max": self.q_max,
                "entries": [{"i": i, "j": j, "beta": b}
                            for (i, j), b in sorted(self.entries.items())]}


def betti_table(engine: KoszulEngine, i_max: int, q_max: int | None = None,
                sigma: int | None = None) -> BettiTable:
    Z, t = engine.Z, engine.t
    if q_max is None:
        q_max = engine.opts.q_max
    if sigma is None:
        sigma = sigma_checked(Z, engine.fields).sigma
    if t < sigma:
        raise PreconditionError(f"t = {t} < sigma = {sigma}: coordinate ring is not B")
    entries = {}
    for i in range(i_max + 1):
        for q in range(q_max + 1):
            entries[(i, i + q)] = engine.koszul_dim(i, q)
    return BettiTable(entries, i_max, q_max)


def np_cells(p: int, q_max: int) -> list[tuple[int, int]]:
    """The (i, q) cells that must vanish for N_p."""
    cells = [(0, q) for q in range(1, q_max + 1)]
    cells += [(i, q) for i in range(1, p + 1) for q in range(q_max + 1) if q != 1]
    return cells


@dataclass
class NpResult:
    p: int
    t: int
    passed: bool
    dims: dict[tuple[int, int], int]
    bound: BoundResult
    failures: list[tuple[int, int, int]]

    @property
    def predicted(self) -> bool:
        return self.t >= self.bound.dp

    def to_json(self) -> dict:
        return {
            "p": self.p, "t": self.t, "passed": self.passed,
            "theorem_predicts_pass": self.predicted, "bound": self.bound.to_json(),
            "koszul": [{"i": i, "q": q, "dim": k} for (i, q), k in sorted(self.dims.items())],
            "nonzero_obstructions": [{"i": i, "q": q, "dim": k} for i, q, k in self.failures],
        }


def check_np(Z: FatPointScheme, t: int, p: int, opts: EngineOptions = EngineOptions(),
             engine: KoszulEngine | None = None, sig: SigmaResult | None = None) -> NpResult:
    """N_p test: no generators beyond the unit, linear first p syzygy steps."""
    if p < 0:
        raise ValueError("p must be >= 0")
    if sig is None:
        sig = sigma_checked(Z, opts.fields())
    if t < sig.sigma + 1:
        raise PreconditionError(
            f"t = {t} < sigma + 1 = {sig.sigma + 1}: D_t is not known to be very ample")
    bound = bound_from_sigma(sig.sigma, Z.d, p)
    if engine is None:
        engine = KoszulEngine(Z, t, opts)
    dims = {}
    for i in range(p + 1):
        for q in range(engine.opts.q_max + 1):
            dims[(i, q)] = engine.koszul_dim(i, q)
    failures = [(i, q, dims[(i, q)]) for i, q in np_cells(p, engine.opts.q_max) if dims[(i, q)]]
    return NpResult(p, t, not failures, dims, bound, failures)


@dataclass
class ScanResult:
    p: int
    results: list[NpResult]
    skipped: list[int]
    bound: BoundResult

    @property
    def first_pass(self) -> int | None:
        for r in self.results:
            if r.passed:
                return r.t
        return None

    @property
    def predicted_failures(self) -> list[int]:
        return [r.t for r in self.results if r.predicted and not r.passed]


def scan(Z: FatPointScheme, p: int, ts: Iterable[int], opts: EngineOptions = EngineOptions()) -> ScanResult:
    sig = sigma_checked(Z, opts.fields())
    results, skipped = [], []
    for t in ts:
        if t < sig.sigma + 1:
            skipped.append(t)
            continue
        results.append(check_np(Z, t, p, opts, sig=sig))
    return ScanResult(p, results, skipped, bound_from_sigma(sig.sigma, Z.d, p))


def canonical_twist(Z: FatPointScheme) -> DivisorClass:
    return DivisorClass(-3, ()) if Z.veronese else canonical(Z.s)


@dataclass
class DualityResult:
    p: int
    N: int
    lhs: int
    rhs: int
    rhs_index: int

    @property
    def equal(self) -> bool:
        return self.lhs == self.rhs


def duality_gap(Z: FatPointScheme, t: int, p: int, opts: EngineOptions = EngineOptions(),
                engine: KoszulEngine | None = None) -> DualityResult:
    """dim K_{p,2}(D_t) next to dim K_{N-2-p,1}(D_t, K)."""
    sig = sigma_checked(Z, opts.fields())
    if t < sig.sigma + 1:
        raise PreconditionError(f"t = {t} < sigma + 1 = {sig.sigma + 1}")
    if engine is None:
        engine = KoszulEngine(Z, t, opts)
    lhs = engine.koszul_dim(p, 2)
    N = engine.N
    k = N - 2 - p
    if k < 0:
        return DualityResult(p, N, lhs, 0, k)
    twisted = KoszulEngine(Z, t, replace(opts, q_max=1), twist=canonical_twist(Z))
    rhs = twisted.koszul_dim(k, 1)
    return DualityResult(p, N, lhs, rhs, k)


# -- numeric facts used as cross-checks --------------------------------------

def h0_checked(D: DivisorClass, Z: FatPointScheme, fields: Sequence[Field]) -> int:
    return agreed(f"h0{D}", [h0(D, Z, f) for f in fields], fields)


def riemann_roch_check(Z: FatPointScheme, t: int, fields: Sequence[Field]) -> tuple[int, int]:
    """(formula, direct count) for h0(K + D_t); requires t >= d."""
    formula = riemann_roch_h0(t, Z)
    direct = h0_checked(canonical_twist(Z) + D_t(Z, t), Z, fields)
    return formula, direct
