"""Command-line driver.

    koszulnp {sigma,bound,betti,verify,scan,duality} CONFIG [flags]

CONFIG is a YAML (or JSON) document; see README.md for the schema.
Exit codes: 0 pass, 1 mathematical check failed, 2 configuration error,
3 size guard refusal, 4 prime disagreement.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from pathlib import Path
from typing import Any

import yaml

from .cache import RankCache
from .exactalg import DEFAULT_PRIMES, MIN_PRIME, PrimeDisagreement, is_prime
from .koszul import InvariantViolation, PreconditionError, SizeGuardExceeded
from .picard import PicardError, bound_from_sigma, D_t, intersect
from .polyspace import ConfigurationError, FatPointScheme, random_points
from .report import VerificationReport, audit_dump, cell_rows, engine_summary
from .verify import (EngineOptions, KoszulEngine, betti_table, canonical_twist, check_np,
                     duality_gap, riemann_roch_check, sigma_checked)

log = logging.getLogger("koszulnp")

COMMANDS = ("sigma", "bound", "betti", "verify", "scan", "duality")
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SIZE, EXIT_PRIME = 0, 1, 2, 3, 4

_TOP_KEYS = {"command", "scheme", "t", "p", "scan", "i_max", "q_max", "primes", "rational",
             "route", "seed", "limits", "output", "cache_dir"}


@dataclass
class RunConfig:
    scheme: FatPointScheme
    scheme_spec: dict
    command: str | None = None
    t: int | str | None = None
    p: int = 1
    t_range: tuple[int, int] | None = None
    i_max: int | None = None
    q_max: int = 3
    primes: tuple[int, ...] = DEFAULT_PRIMES
    rational: bool = False
    route: str = "reduced"
    seed: int = 0
    max_side: int | None = 250_000
    output: str | None = None
    cache_dir: str | None = None

    def options(self, cache: RankCache | None = None) -> EngineOptions:
        return EngineOptions(primes=self.primes, rational=self.rational, route=self.route,
                             seed=self.seed, q_max=self.q_max, max_side=self.max_side,
                             cache=cache)

    def echo(self) -> dict:
        """Re-runnable config document (explicit points always included)."""
        spec = dict(self.scheme_spec)
        if not self.scheme.veronese:
            spec["resolved_points"] = [p.to_json() for p in self.scheme.points]
        out: dict[str, Any] = {"command": self.command, "scheme": spec, "t": self.t, "p": self.p,
                               "q_max": self.q_max, "primes": list(self.primes),
                               "rational": self.rational, "route": self.route, "seed": self.seed,
                               "limits": {"max_side": self.max_side}}
        if self.t_range:
            out["scan"] = {"t_min": self.t_range[0], "t_max": self.t_range[1]}
        if self.i_max is not None:
            out["i_max"] = self.i_max
        return out


def _int(value, name: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{name}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{name}: {value} must be >= {minimum}")
    return value


def _coord(x, name: str):
    if isinstance(x, bool) or isinstance(x, float):
        raise ConfigurationError(f"{name}: {x!r} is not exact; use integers or 'a/b' strings")
    if isinstance(x, int):
        return x
    if isinstance(x, str):
        try:
            return Fraction(x)
        except ValueError:
            raise ConfigurationError(f"{name}: cannot parse {x!r} as a rational") from None
    raise ConfigurationError(f"{name}: unsupported coordinate {x!r}")


def _parse_scheme(doc) -> tuple[FatPointScheme, dict]:
    if not isinstance(doc, dict):
        raise ConfigurationError("scheme: expected a mapping")
    unknown = set(doc) - {"points", "random", "veronese", "mults", "resolved_points"}
    if unknown:
        raise ConfigurationError(f"scheme: unknown keys {sorted(unknown)}")
    modes = [k for k in ("points", "random", "veronese") if doc.get(k) not in (None, False)]
    if len(modes) != 1:
        raise ConfigurationError("scheme: give exactly one of points, random, veronese")
    if modes[0] == "veronese":
        if doc.get("mults"):
            raise ConfigurationError("scheme.mults: the veronese control case has no points")
        return FatPointScheme.empty(), {"veronese": True}
    if modes[0] == "points":
        raw = doc["points"]
        if not isinstance(raw, list):
            raise ConfigurationError("scheme.points: expected a list of coordinate triples")
        pts = []
        for i, c in enumerate(raw):
            if not isinstance(c, list) or len(c) != 3:
                raise ConfigurationError(f"scheme.points[{i}]: expected 3 coordinates")
            pts.append([_coord(x, f"scheme.points[{i}]") for x in c])
        seed = None
        spec = {"points": [[str(x) if isinstance(x, Fraction) else x for x in c] for c in pts]}
    else:
        r = doc["random"]
        if not isinstance(r, dict):
            raise ConfigurationError("scheme.random: expected a mapping")
        unknown = set(r) - {"count", "seed", "general", "range"}
        if unknown:
            raise ConfigurationError(f"scheme.random: unknown keys {sorted(unknown)}")
        count = _int(r.get("count"), "scheme.random.count", 1)
        seed = _int(r.get("seed", 0), "scheme.random.seed")
        general = bool(r.get("general", True))
        rng = _int(r.get("range", 10_000), "scheme.random.range", 1)
        pts = random_points(count, seed, rng, general)
        spec = {"random": {"count": count, "seed": seed, "general": general, "range": rng}}
    mults = doc.get("mults")
    if mults is None:
        mults = [1] * len(pts)
    if not isinstance(mults, list):
        raise ConfigurationError("scheme.mults: expected a list")
    mults = [_int(m, f"scheme.mults[{i}]", 1) for i, m in enumerate(mults)]
    spec["mults"] = mults
    try:
        Z = FatPointScheme(pts, mults, seed=seed)
    except ConfigurationError as exc:
        raise ConfigurationError(f"scheme.{exc}") from None
    # echoed reports carry the points they used; refuse to silently drift
    resolved = doc.get("resolved_points")
    if resolved is not None and resolved != [p.to_json() for p in Z.points]:
        raise ConfigurationError("scheme.resolved_points: do not match the generated points")
    return Z, spec


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Validate a config document; every failure names the offending field."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config: not valid YAML/JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigurationError("config: expected a mapping at top level")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"config: unknown keys {sorted(unknown)}")
    if "scheme" not in doc:
        raise ConfigurationError("scheme: missing")
    Z, spec = _parse_scheme(doc["scheme"])
    cmd = command or doc.get("command")
    if cmd is not None and cmd not in COMMANDS:
        raise ConfigurationError(f"command: unknown command {cmd!r}")
    t = doc.get("t")
    if t is not None and t != "auto":
        t = _int(t, "t", 1)
    p = _int(doc.get("p", 1), "p", 0)
    q_max = _int(doc.get("q_max", 3), "q_max", 1)
    i_max = doc.get("i_max")
    if i_max is not None:
        i_max = _int(i_max, "i_max", 0)
    t_range = None
    if doc.get("scan") is not None:
        sc = doc["scan"]
        if not isinstance(sc, dict):
            raise ConfigurationError("scan: expected a mapping with t_min and t_max")
        lo = _int(sc.get("t_min"), "scan.t_min", 1)
        hi = _int(sc.get("t_max"), "scan.t_max", 1)
        if hi < lo:
            raise ConfigurationError(f"scan: t_max = {hi} < t_min = {lo}")
        t_range = (lo, hi)
    primes = doc.get("primes", list(DEFAULT_PRIMES))
    if isinstance(primes, int):
        primes = [primes]
    if not isinstance(primes, list) or not 1 <= len(primes) <= 2:
        raise ConfigurationError("primes: give one or two primes")
    primes = tuple(_int(x, "primes") for x in primes)
    if len(set(primes)) != len(primes):
        raise ConfigurationError("primes: the two primes must differ")
    rational = bool(doc.get("rational", False))
    route = doc.get("route", "reduced")
    if route not in ("reduced", "direct"):
        raise ConfigurationError(f"route: {route!r} is not 'reduced' or 'direct'")
    seed = _int(doc.get("seed", 0), "seed")
    limits = doc.get("limits") or {}
    if not isinstance(limits, dict) or set(limits) - {"max_side"}:
        raise ConfigurationError("limits: only max_side is supported")
    max_side = limits.get("max_side", 250_000)
    if max_side is not None:
        max_side = _int(max_side, "limits.max_side", 1)
    cfg = RunConfig(Z, spec, cmd, t, p, t_range, i_max, q_max, primes, rational, route,
                    seed, max_side, doc.get("output"), doc.get("cache_dir"))
    validate_primes(cfg)
    return cfg


def degree_bound(cfg: RunConfig) -> int:
    """Largest polynomial degree any command of this config will touch."""
    ts = [cfg.t] if isinstance(cfg.t, int) else []
    if cfg.t_range:
        ts.append(cfg.t_range[1])
    top = cfg.q_max + 2
    return max([top * t for t in ts] + [cfg.scheme.d + 1])


def validate_primes(cfg: RunConfig) -> None:
    deg = degree_bound(cfg)
    for q in cfg.primes:
        if q <= deg:
            raise ConfigurationError(
                f"primes: characteristic {q} <= degree bound {deg} implied by t and q_max")
        if q <= MIN_PRIME:
            raise ConfigurationError(f"primes: {q} must exceed 2^30")
        if not is_prime(q):
            raise ConfigurationError(f"primes: {q} is not prime")


# -- commands ----------------------------------------------------------------

def _instance_block(cfg: RunConfig, sig) -> dict:
    Z = cfg.scheme
    out = {"s": Z.s, "mults": list(Z.mults), "d": Z.d, "degZ": Z.degZ,
           "veronese": Z.veronese, "sigma": sig.sigma, "n_star": sig.n_star,
           "h_quotient": list(sig.h_quotient)}
    if Z.veronese:
        out["note"] = "no points: sigma is 0 by convention, for bound display only"
    return out


def _resolve_t(cfg: RunConfig, sig) -> int:
    if cfg.t is None:
        raise ConfigurationError("t: required for this command (integer or 'auto')")
    if cfg.t == "auto":
        return bound_from_sigma(sig.sigma, cfg.scheme.d, cfg.p).dp
    return cfg.t


def _instance_checks(rep: VerificationReport, cfg: RunConfig, engine: KoszulEngine, sig,
                     t: int, dims: dict) -> None:
    """Facts that hold for every t >= sigma, checked on what was computed."""
    Z = cfg.scheme
    fields = engine.fields
    lower = comb(t + 2, 2) - Z.degZ - 1
    rep.instance.update({"t": t, "N": engine.N, "N_lower_bound": lower,
                         "very_ample": t >= sig.sigma + 1})
    if not Z.veronese:
        D = D_t(Z, t)
        rep.instance["D_t_squared"] = intersect(D, D)
    if t >= sig.sigma:
        rep.add("ambient_dimension", engine.N == lower,
                f"N = {engine.N}, C(t+2,2) - degZ - 1 = {lower}", predicted=True)
        bad = [(q, k) for (i, q), k in dims.items() if i == 0 and q >= 1 and k]
        rep.add("projective_normality", not bad,
                "K_{0,q} = 0 for computed q >= 1" if not bad else f"nonzero K_(0,q): {bad}",
                predicted=True)
    if t >= sig.sigma + 1:
        bad = [(i, k) for (i, q), k in dims.items() if i >= 1 and q >= 3 and k]
        rep.add("regularity_strand", not bad,
                "K_{i,3} = 0 for computed i >= 1" if not bad else f"nonzero K_(i,3): {bad}",
                predicted=True)
    if not Z.veronese and t >= Z.d and t < sig.sigma + 1:
        rep.notes.append("Riemann-Roch count not compared: t < sigma + 1 "
                         "(h1(K + D_t) need not vanish there)")
    if not Z.veronese and t >= max(Z.d, sig.sigma + 1):
        formula, direct = riemann_roch_check(Z, t, fields)
        rep.add("riemann_roch", formula == direct,
                f"formula {formula}, direct h0(K + D_t) = {direct}", predicted=True)
    engine.check_complex()
    rep.add("complex_dd", True,
            f"d o d = 0 on {engine.dd_columns} columns over {engine.dd_cells} differential pairs")
    n = engine.matrices_compared()
    rep.add("prime_agreement", True,
            f"{n} matrices agree across {len(fields)} fields" if len(fields) > 1
            else "single field configured")


def _finish_cells(rep: VerificationReport, engine: KoszulEngine, dims: dict) -> None:
    rep.cells = cell_rows(engine, dims)
    rep.engine = engine_summary(engine)


def cmd_sigma(cfg: RunConfig, rep: VerificationReport, opts: EngineOptions) -> None:
    sig = sigma_checked(cfg.scheme, opts.fields())
    rep.instance = _instance_block(cfg, sig)
    if not cfg.scheme.veronese:
        hq = sig.h_quotient
        rep.add("hilbert_stabilized", hq[-1] == cfg.scheme.degZ and list(hq) == sorted(hq),
                f"h_quotient {list(hq)} reaches degZ = {cfg.scheme.degZ}")
        rep.add("sigma_at_most_d", sig.sigma <= cfg.scheme.d,
                f"sigma = {sig.sigma}, d = {cfg.scheme.d}")
    rep.results = {"sigma": sig.sigma, "n_star": sig.n_star}


def cmd_bound(cfg: RunConfig, rep: VerificationReport, opts: EngineOptions) -> None:
    sig = sigma_checked(cfg.scheme, opts.fields())
    rep.instance = _instance_block(cfg, sig)
    b = bound_from_sigma(sig.sigma, cfg.scheme.d, cfg.p)
    rep.results = {"bound": b.to_json(), "sigma_plus_p": sig.sigma + cfg.p,
                   "below_sigma_plus_p": b.dp < sig.sigma + cfg.p}
    rep.add("bound_consistent",
            b.dp >= sig.sigma + 1 and b.dp >= cfg.scheme.d and 3 * (b.dp - 1) >= cfg.scheme.d + cfg.p,
            f"d_p = {b.dp} via {', '.join(b.binding_term)}")


def cmd_betti(cfg: RunConfig, rep: VerificationReport, opts: EngineOptions) -> None:
    Z = cfg.scheme
    sig = sigma_checked(Z, opts.fields())
    rep.instance = _instance_block(cfg, sig)
    t = _resolve_t(cfg, sig)
    i_max = cfg.i_max if cfg.i_max is not None else max(cfg.p + 1, 3)
    engine = KoszulEngine(Z, t, opts)
    table = betti_table(engine, i_max, cfg.q_max, sigma=sig.sigma)
    dims = {(i, j - i): b for (i, j), b in table.entries.items()}
    rep.results = {"betti": table.to_json()}
    rep.betti_ascii = table.ascii()
    _instance_checks(rep, cfg, engine, sig, t, dims)
    _finish_cells(rep, engine, dims)


def cmd_verify(cfg: RunConfig, rep: VerificationReport, opts: EngineOptions) -> None:
    Z = cfg.scheme
    sig = sigma_checked(Z, opts.fields())
    rep.instance = _instance_block(cfg, sig)
    t = _resolve_t(cfg, sig)
    engine = KoszulEngine(Z, t, opts)
    res = check_np(Z, t, cfg.p, opts, engine=engine, sig=sig)
    i_max = max(cfg.p + 1, cfg.i_max or 0)
    table = betti_table(engine, i_max, cfg.q_max, sigma=sig.sigma)
    dims = {(i, j - i): b for (i, j), b in table.entries.items()}
    rep.results = {"np": res.to_json(), "betti": table.to_json()}
    rep.betti_ascii = table.ascii()
    detail = (f"t = {t}, bound d_p = {res.bound.dp}"
              + ("" if res.passed else f"; nonzero cells {res.failures}"))
    rep.add(f"N_{cfg.p}", res.passed, detail, predicted=res.predicted)
    _instance_checks(rep, cfg, engine, sig, t, dims)
    _finish_cells(rep, engine, dims)
    if not res.passed and res.predicted:
        rep.audit = _audit(cfg, engine, [(i, q) for i, q, _ in res.failures])


def cmd_scan(cfg: RunConfig, rep: VerificationReport, opts: EngineOptions) -> None:
    Z = cfg.scheme
    if cfg.t_range is None:
        raise ConfigurationError("scan: t_min and t_max are required for the scan command")
    sig = sigma_checked(Z, opts.fields())
    rep.instance = _instance_block(cfg, sig)
    bound = bound_from_sigma(sig.sigma, Z.d, cfg.p)
    rows, first, bad = [], None, []
    for t in range(cfg.t_range[0], cfg.t_range[1] + 1):
        if t < sig.sigma + 1:
            rows.append({"t": t, "skipped": "t < sigma + 1 (not known very ample)"})
            continue
        engine = KoszulEngine(Z, t, opts)
        res = check_np(Z, t, cfg.p, opts, engine=engine, sig=sig)
        engine.check_complex()
        rows.append({"t": t, "passed": res.passed, "theorem_predicts_pass": res.predicted,
                     "n_W": engine.n_W,
                     "koszul": [{"i": i, "q": q, "dim": k} for (i, q), k in sorted(res.dims.items())],
                     "cells": cell_rows(engine, res.dims), "engine": engine_summary(engine)})
        if res.passed and first is None:
            first = t
        if res.predicted and not res.passed:
            bad.append(t)
            rep.audit = _audit(cfg, engine, [(i, q) for i, q, _ in res.failures], suffix=f"t{t}")
    rep.results = {"p": cfg.p, "bound": bound.to_json(), "first_pass": first, "per_t": rows}
    rep.add("theorem_consistent", not bad,
            f"first N_{cfg.p} at t = {first}; bound d_p = {bound.dp}"
            + (f"; predicted passes failed at t = {bad}" if bad else ""), predicted=True)


def cmd_duality(cfg: RunConfig, rep: VerificationReport, opts: EngineOptions) -> None:
    Z = cfg.scheme
    sig = sigma_checked(Z, opts.fields())
    rep.instance = _instance_block(cfg, sig)
    t = _resolve_t(cfg, sig)
    engine = KoszulEngine(Z, t, opts)
    res = duality_gap(Z, t, cfg.p, opts, engine=engine)
    rep.instance.update({"t": t, "N": res.N, "canonical": str(canonical_twist(Z))})
    rep.results = {"p": cfg.p, "lhs_K_p2": res.lhs, "rhs_index": res.rhs_index,
                   "rhs_K_twisted": res.rhs}
    if res.rhs_index < 0:
        rep.notes.append("N - 2 - p < 0: the twisted side is zero by convention")
    rep.notes.append("twisted B_0 = H0(K) = 0 (negative degree), so K_(k,1)(K) has no incoming map")
    rep.add("duality", res.equal,
            f"K_({cfg.p},2) = {res.lhs}, K_({res.rhs_index},1)(K) = {res.rhs}", predicted=True)
    rep.engine = engine_summary(engine)


def _audit(cfg: RunConfig, engine: KoszulEngine, cells, suffix: str = "") -> str:
    base = Path(cfg.output).with_suffix("") if cfg.output else Path("koszulnp_audit")
    directory = Path(f"{base}.audit{('_' + suffix) if suffix else ''}")
    log.error("theorem-predicted check failed; dumping matrices to %s", directory)
    return audit_dump(engine, cells, directory)


HANDLERS = {"sigma": cmd_sigma, "bound": cmd_bound, "betti": cmd_betti,
            "verify": cmd_verify, "scan": cmd_scan, "duality": cmd_duality}


def run(cfg: RunConfig) -> tuple[VerificationReport, int]:
    if cfg.command is None:
        raise ConfigurationError("command: not given on the command line or in the config")
    rep = VerificationReport(cfg.command, cfg.echo())
    cache = RankCache(cfg.cache_dir) if cfg.cache_dir else None
    opts = cfg.options(cache)
    code = EXIT_PASS
    try:
        HANDLERS[cfg.command](cfg, rep, opts)
        if not rep.passed:
            code = EXIT_FAIL
    except (ConfigurationError, PreconditionError, PicardError) as exc:
        rep.error, code = {"class": "configuration", "message": str(exc)}, EXIT_CONFIG
    except SizeGuardExceeded as exc:
        rep.error = {"class": "size_guard", "message": str(exc),
                     "matrix": list(exc.shape), "limit": exc.limit}
        code = EXIT_SIZE
    except PrimeDisagreement as exc:
        rep.error, code = {"class": "prime_disagreement", "message": str(exc)}, EXIT_PRIME
    except InvariantViolation as exc:
        rep.error, code = {"class": "invariant_violation", "message": str(exc)}, EXIT_FAIL
    finally:
        if cache is not None:
            cache.flush()
    return rep, code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="koszulnp", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="YAML or JSON config document ('-' for stdin)")
    ap.add_argument("--seed", type=int, help="override the seed for random points and linear forms")
    ap.add_argument("--primes", type=int, nargs="+", metavar="P", help="override the primes")
    ap.add_argument("--max-side", type=int, help="size guard: largest matrix side allowed")
    ap.add_argument("--output", "-o", help="write the JSON report here")
    ap.add_argument("--rational", action="store_true", help="compute over the rationals")
    ap.add_argument("--route", choices=("reduced", "direct"))
    ap.add_argument("--cache-dir", help="persist differential ranks here")
    ap.add_argument("--json", action="store_true", help="print the JSON report to stdout")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _apply_overrides(text: str, args) -> str:
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        return text
    if args.seed is not None:
        doc["seed"] = args.seed
        rnd = (doc.get("scheme") or {}).get("random")
        if isinstance(rnd, dict):
            rnd["seed"] = args.seed
    if args.primes:
        doc["primes"] = args.primes
    if args.max_side is not None:
        doc.setdefault("limits", {})["max_side"] = args.max_side
    if args.output:
        doc["output"] = args.output
    if args.rational:
        doc["rational"] = True
    if args.route:
        doc["route"] = args.route
    if args.cache_dir:
        doc["cache_dir"] = args.cache_dir
    return yaml.safe_dump(doc)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
        cfg = parse_config(_apply_overrides(text, args), command=args.command)
    except (OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep, code = run(cfg)
    if cfg.output:
        rep.write(cfg.output)
    if args.json:
        print(json.dumps(rep.to_json(), indent=2))
    else:
        print(rep.summary())
        if rep.betti_ascii:
            print(rep.betti_ascii)
    return code


if __name__ == "__main__":
    sys.exit(main())
