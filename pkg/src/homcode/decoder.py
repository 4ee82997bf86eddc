"""Local list decoder for affine homomorphisms ``G -> H``.

Candidates are grown one step of a polycyclic series of ``G`` at a time:
``extend`` proposes images of the next generator from two oracle queries,
``prune`` keeps candidates that explain a heavy value of ``f(sx) phi(x)^-1``
on a random coset, and the survivors are shifted by the frequent values of
``f(x) phi(x)^-1`` on all of ``G``.

Partial maps are tables indexed by polycyclic *code*, so the restriction
to ``G_i`` of a table is its first ``|G_i|`` entries.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np

from .combinatorial import lambda_value, special_intersecting_constant, trial_seed
from .groups import Group, PolycyclicData, ensure_polycyclic
from .homs import (
    AffineHom,
    GroupWord,
    affine_tables,
    extend_table,
    extension_valid,
    format_affine,
    is_affine_table,
)

NOISE_MODELS = ("uniform-random-values", "adversarial-second-hom", "constant-garbage")
PRUNE_DOMAINS = ("coset", "group")
EPS_DENOMINATOR = 1 << 32
FILTER_STREAM = (1 << 32) - 1  # stream index of the closing filter


def as_rational(x) -> Fraction:
    return Fraction(x).limit_denominator(EPS_DENOMINATOR)


def fv_sample_count(epsilon: float, h_order: int, delta: float = 0.01) -> int:
    """Chernoff-style sample size ``ceil(32/eps^2 * ln(|H|/delta))``."""
    return math.ceil(32 / epsilon**2 * math.log(h_order / delta))


@dataclass(frozen=True)
class DecoderParams:
    epsilon: float
    outer_repeats: int = 16
    extend_repeats: int = 10
    prune_repeats: int = 3
    prune_cap: int = 4096
    fv_samples: int = 40
    final_samples: int = 256
    fv_delta: float = 0.01
    prune_domain: str = "coset"
    overflow_retries: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        for name in ("outer_repeats", "extend_repeats", "prune_repeats", "prune_cap", "fv_samples", "final_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.prune_domain not in PRUNE_DOMAINS:
            raise ValueError(f"prune_domain must be one of {PRUNE_DOMAINS}")

    @classmethod
    def desk(cls, epsilon: float, seed: int = 0, **overrides) -> "DecoderParams":
        """Loop counts small enough for interactive runs on groups of a few thousand elements."""
        return cls(epsilon=epsilon, seed=seed, **overrides)

    @classmethod
    def paper_defaults(cls, epsilon: float, G: Group, H: Group, seed: int = 0, c: int = 2) -> "DecoderParams":
        """Literal loop counts: ``L^4`` extend rounds, ``L^2`` prune rounds and a cap of
        ``L^(2C)``, with ``L = log2|G| log2|H| / eps``; ``C log2(1/eps)`` outer rounds."""
        C = special_intersecting_constant(c)
        L = max(math.log2(G.order) * math.log2(H.order) / epsilon, 1.0)
        cap = int(mpmath.ceil(mpmath.power(L, 2 * C)))
        return cls(
            epsilon=epsilon,
            outer_repeats=max(1, math.ceil(float(C) * math.log2(1 / epsilon))),
            extend_repeats=math.ceil(L**4),
            prune_repeats=math.ceil(L**2),
            prune_cap=cap,
            fv_samples=fv_sample_count(epsilon, H.order),
            final_samples=fv_sample_count(epsilon, H.order),
            seed=seed,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PartialHom:
    """Homomorphism on ``G_level`` as a code-indexed table."""

    level: int
    table: np.ndarray

    def key(self) -> bytes:
        return self.table.tobytes()

    def restrict(self, level: int, pc: PolycyclicData) -> "PartialHom":
        if not 0 <= level <= self.level:
            raise ValueError("can only restrict to a lower level")
        return PartialHom(level, self.table[: pc.sizes[level]])

    def is_valid(self, pc: PolycyclicData, G: Group, H: Group) -> bool:
        """Exhaustive check that the table is a homomorphism on ``G_level``."""
        size = pc.sizes[self.level]
        if self.table.shape != (size,):
            return False
        elems = pc.code_to_elem[:size]
        prod = G.table[np.ix_(elems, elems)]
        codes = pc.elem_to_code[prod]
        if (codes >= size).any():
            return False
        lhs = self.table[codes]
        rhs = H.table[np.ix_(self.table, self.table)]
        return bool((lhs == rhs).all())


def trivial_partial() -> PartialHom:
    return PartialHom(0, np.zeros(1, dtype=np.intp))


@dataclass
class LevelStats:
    level: int
    extended: int
    kept: int
    dropped: int


@dataclass
class QueryTally:
    extend: int = 0
    prune: int = 0
    final: int = 0
    filter: int = 0

    @property
    def total(self) -> int:
        return self.extend + self.prune + self.final + self.filter


@dataclass
class DecodeReport:
    G: str
    H: str
    params: DecoderParams
    lam: Fraction
    recovered: list[AffineHom]
    queries: int
    tally: QueryTally
    level_sizes: list[list[LevelStats]]
    prune_overflow: bool
    overflowed_repeats: int
    final_candidates: int
    invalid_candidates: int
    wall_time: float = 0.0
    notes: tuple[str, ...] = (
        "extend raises the candidate to the integer representative of the inverse of c1-c2",
    )

    @property
    def accounting_ok(self) -> bool:
        return self.queries == self.tally.total

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "schema": "homcode.decode/1",
            "G": self.G,
            "H": self.H,
            "seed": self.params.seed,
            "params": self.params.to_dict(),
            "lambda": str(self.lam),
            "recovered": [format_affine(phi) for phi in self.recovered],
            "queries": self.queries,
            "query_tally": asdict(self.tally),
            "level_sizes": [[asdict(s) for s in rep] for rep in self.level_sizes],
            "prune_overflow": self.prune_overflow,
            "overflowed_repeats": self.overflowed_repeats,
            "final_candidates": self.final_candidates,
            "invalid_candidates": self.invalid_candidates,
            "notes": list(self.notes),
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True, default=str) + "\n"


class PruneOverflow(RuntimeError):
    def __init__(self, level: int, size: int, cap: int):
        self.level, self.size, self.cap = level, size, cap
        super().__init__(f"prune at level {level} kept {size} candidates, cap is {cap}")


# --------------------------------------------------------------------------
# frequent values


def _heavy(values: np.ndarray, cutoff: Fraction) -> list[int]:
    vals, counts = np.unique(values, return_counts=True)
    keep = counts * cutoff.denominator >= cutoff.numerator * values.size
    return [int(v) for v in vals[keep]]


def _fv_cutoff(threshold: Fraction, epsilon: Fraction, exact: bool) -> Fraction:
    return threshold if exact else threshold - epsilon / 8


def frequent_values(
    point_fn: Callable[[np.ndarray], np.ndarray],
    domain: np.ndarray,
    threshold,
    params: DecoderParams,
    rng: np.random.Generator,
) -> set[int]:
    """Values of ``point_fn`` over ``domain`` whose frequency reaches ``threshold``.

    Domains no larger than ``fv_samples`` are evaluated in full and cut at
    ``threshold`` exactly. Otherwise ``fv_samples`` uniform points are drawn
    and the cut is ``threshold - eps/8``, midway between the values that
    must be kept and those at ``threshold - eps/4`` that must not.
    """
    domain = np.asarray(domain)
    exact = domain.size <= params.fv_samples
    points = domain if exact else domain[rng.integers(domain.size, size=params.fv_samples)]
    cutoff = _fv_cutoff(as_rational(threshold), as_rational(params.epsilon), exact)
    return set(_heavy(np.asarray(point_fn(points)), cutoff))


# --------------------------------------------------------------------------
# decoding context


@dataclass
class _Context:
    G: Group
    H: Group
    pc: PolycyclicData
    f: GroupWord
    params: DecoderParams
    threshold: Fraction
    epsilon: Fraction
    tally: QueryTally = field(default_factory=QueryTally)

    def query(self, elems: np.ndarray, phase: str) -> np.ndarray:
        setattr(self.tally, phase, getattr(self.tally, phase) + int(np.size(elems)))
        return self.f.query_many(elems)

    def high_code(self, i: int, rng: np.random.Generator) -> int:
        pc = self.pc
        return sum(int(rng.integers(p)) * pc.sizes[j] for j, p in enumerate(pc.orders) if j >= i)


def sorted_polycyclic(G: Group) -> Group:
    """``G`` with a polycyclic series whose relative orders do not increase upwards; cached.

    Solvable groups without such a series (``S4``) fall back to an unsorted
    one, and the decode report says so.
    """
    if G.pc is not None and G.pc.is_sorted:
        return G
    cached = G.__dict__.get("_sorted_pc")
    if cached is None:
        cached = ensure_polycyclic(G, sorted_only=True)
        G.__dict__["_sorted_pc"] = cached
    return cached


def _context(f: GroupWord, params: DecoderParams, G: Group | None = None) -> _Context:
    G = sorted_polycyclic(G or f.source)
    H = f.target
    lam = lambda_value(G, H)
    eps = as_rational(params.epsilon)
    return _Context(G, H, G.pc, f, params, lam + eps / 2, eps)


def _as_partials(S) -> list[PartialHom]:
    S = list(S)
    if not all(isinstance(s, PartialHom) for s in S):
        raise TypeError("expected PartialHom members")
    return S


# --------------------------------------------------------------------------
# extend and prune


def _extend(ctx: _Context, i: int, S: list[PartialHom], rng: np.random.Generator) -> tuple[list[PartialHom], int]:
    pc, H = ctx.pc, ctx.H
    p = pc.orders[i - 1]
    low = pc.sizes[i - 1]
    modulus = pc.sizes[i]
    out: dict[bytes, PartialHom] = {}
    dropped = 0
    for _ in range(ctx.params.extend_repeats):
        s = ctx.high_code(i, rng)
        y1, y2 = (int(v) for v in rng.integers(low, size=2))
        c1, c2 = (int(v) for v in rng.integers(p, size=2))
        if math.gcd(c1 - c2, modulus) != 1:
            continue
        gamma = pow(c1 - c2, -1, modulus)
        codes = np.array([s + c1 * low + y1, s + c2 * low + y2])
        f1, f2 = (int(v) for v in ctx.query(pc.code_to_elem[codes], "extend"))
        T, inv = H.table, H.inverses
        middle = int(T[inv[f2], f1])
        for phi in S:
            x = int(T[T[phi.table[y2], middle], inv[phi.table[y1]]])
            a = H.power(x, gamma)
            if not extension_valid(pc, H, i - 1, phi.table, a):
                dropped += 1
                continue
            theta = PartialHom(i, extend_table(H, phi.table, a, p))
            out.setdefault(theta.key(), theta)
    return list(out.values()), dropped


def _prune(ctx: _Context, i: int, S: list[PartialHom], rng: np.random.Generator) -> list[PartialHom]:
    if not S:
        return []
    pc, G, H, params = ctx.pc, ctx.G, ctx.H, ctx.params
    size = pc.sizes[i]
    exact = size <= params.fv_samples
    cutoff = _fv_cutoff(ctx.threshold, ctx.epsilon, exact)
    keep = np.zeros(len(S), dtype=bool)
    for _ in range(params.prune_repeats):
        x = np.arange(size) if exact else rng.integers(size, size=params.fv_samples)
        if params.prune_domain == "coset":
            points = pc.code_to_elem[ctx.high_code(i, rng) + x]
        else:
            s = pc.code_to_elem[int(rng.integers(G.order))]
            points = G.table[s, pc.code_to_elem[x]]
        fx = ctx.query(points, "prune")
        for k, phi in enumerate(S):
            if not keep[k] and _heavy(H.table[fx, H.inverses[phi.table[x]]], cutoff):
                keep[k] = True
    out = [phi for k, phi in enumerate(S) if keep[k]]
    if len(out) > params.prune_cap:
        raise PruneOverflow(i, len(out), params.prune_cap)
    return out


def extend(i: int, S, f: GroupWord, params: DecoderParams, rng: np.random.Generator, G: Group | None = None):
    """Level-``i`` extensions of the level-``(i-1)`` partial homs in ``S``.

    Returns ``(extensions, dropped)`` where ``dropped`` counts proposals that
    failed the homomorphism check on ``G_i``.
    """
    ctx = _context(f, params, G)
    return _extend(ctx, i, _as_partials(S), rng)


def prune(i: int, S, f: GroupWord, params: DecoderParams, rng: np.random.Generator, G: Group | None = None):
    ctx = _context(f, params, G)
    return _prune(ctx, i, _as_partials(S), rng)


# --------------------------------------------------------------------------
# list decoding


def _one_repetition(ctx: _Context, rng: np.random.Generator) -> tuple[list[PartialHom], list[LevelStats]]:
    S = [trivial_partial()]
    stats = []
    for i in range(1, ctx.pc.length + 1):
        ext, dropped = _extend(ctx, i, S, rng)
        S = _prune(ctx, i, ext, rng)
        stats.append(LevelStats(i, len(ext), len(S), dropped))
    return S, stats


def _shifted_candidates(ctx: _Context, S: list[PartialHom], rng: np.random.Generator) -> list[np.ndarray]:
    if not S:
        return []
    pc, H, params = ctx.pc, ctx.H, ctx.params
    n = ctx.G.order
    exact = n <= params.fv_samples
    x = np.arange(n) if exact else rng.integers(n, size=params.fv_samples)
    fx = ctx.query(pc.code_to_elem[x], "final")
    cutoff = _fv_cutoff(ctx.threshold, ctx.epsilon, exact)
    out = []
    for phi in S:
        for b in _heavy(H.table[fx, H.inverses[phi.table[x]]], cutoff):
            codes = H.table[b, phi.table]
            table = np.empty(n, dtype=np.intp)
            table[pc.code_to_elem] = codes
            out.append(table)
    return out


def list_decode(f: GroupWord, params: DecoderParams, G: Group | None = None) -> DecodeReport:
    """Run the outer loop and return the validated, filtered list."""
    start = time.perf_counter()
    ctx = _context(f, params, G)
    G, H = ctx.G, ctx.H
    lam = ctx.threshold - ctx.epsilon / 2
    if ctx.epsilon > 1 - lam:
        raise ValueError(f"epsilon must lie in (0, 1 - Lambda] = (0, {1 - lam}]")
    q0 = f.queries
    retries = params.outer_repeats if params.overflow_retries is None else params.overflow_retries
    candidates: dict[bytes, np.ndarray] = {}
    level_sizes = []
    completed = overflowed = attempt = 0
    while completed < params.outer_repeats and attempt < params.outer_repeats + retries:
        rng = np.random.default_rng(trial_seed(params.seed, attempt))
        attempt += 1
        try:
            S, stats = _one_repetition(ctx, rng)
        except PruneOverflow:
            overflowed += 1
            continue
        completed += 1
        level_sizes.append(stats)
        for t in _shifted_candidates(ctx, S, rng):
            candidates.setdefault(t.tobytes(), t)

    # closing filter first, then validation of whatever would be reported
    recovered = []
    invalid = 0
    if candidates:
        rng = np.random.default_rng(trial_seed(params.seed, FILTER_STREAM))
        n = G.order
        exact = n <= params.final_samples
        x = np.arange(n) if exact else rng.integers(n, size=params.final_samples)
        fx = ctx.query(x, "filter")
        for t in candidates.values():
            hits = int((t[x] == fx).sum())
            if hits * ctx.threshold.denominator < ctx.threshold.numerator * x.size:
                continue
            if is_affine_table(G, H, t, by_generators=True):
                recovered.append(AffineHom.from_table(f.source, H, t))
            else:
                invalid += 1
    recovered.sort(key=AffineHom.sort_key)
    notes = DecodeReport.notes
    if not ctx.pc.is_sorted:
        notes += (f"relative orders {ctx.pc.orders} are not sorted; run is experimental",)
    return DecodeReport(
        G.name, H.name, params, lam, recovered, f.queries - q0, ctx.tally, level_sizes,
        completed == 0 and overflowed > 0, overflowed, len(candidates), invalid,
        time.perf_counter() - start, notes,
    )


def query_bound(params: DecoderParams, series_length: int, attempts: int | None = None) -> int:
    """Upper bound on oracle queries for one run.

    Per repetition: two queries per extend round and at most ``fv_samples``
    per prune round at each of the ``k`` levels, plus ``fv_samples`` for the
    final shift search; then ``final_samples`` for the closing filter.
    """
    reps = attempts if attempts is not None else params.outer_repeats
    per_rep = series_length * (2 * params.extend_repeats + params.prune_repeats * params.fv_samples) + params.fv_samples
    return reps * per_rep + params.final_samples


# --------------------------------------------------------------------------
# corrupted oracles


def nearest_other_affine(phi: AffineHom) -> np.ndarray | None:
    """The affine hom (table) closest to ``phi`` other than itself; lowest table breaks ties."""
    tables = affine_tables(phi.source, phi.target)
    counts = (tables == phi.table[None, :]).sum(axis=1)
    counts[counts == phi.source.order] = -1
    if counts.max() < 0:
        return None
    best = np.flatnonzero(counts == counts.max())
    return tables[min(best, key=lambda i: tables[i].tobytes())]


def corrupt(phi: AffineHom, target_agreement, noise_model: str, rng: np.random.Generator, name: str = "f") -> GroupWord:
    """Word agreeing with ``phi`` on exactly ``round(t |G|)`` points."""
    if noise_model not in NOISE_MODELS:
        raise ValueError(f"noise_model must be one of {NOISE_MODELS}")
    G, H = phi.source, phi.target
    n, q = G.order, H.order
    t = float(target_agreement)
    if not (1 / q - 1e-12 <= t <= 1 + 1e-12):
        raise ValueError(f"target agreement must lie in [1/|H|, 1], got {t}")
    keep = int(round(t * n))
    bad = n - keep
    base = phi.table
    values = base.copy()
    if bad == 0:
        return GroupWord(G, H, values, name=name)
    if q < 2:
        raise ValueError("cannot corrupt a word over the trivial group")

    def random_other(points: np.ndarray) -> np.ndarray:
        shift = rng.integers(1, q, size=points.size)
        return (base[points] + shift) % q

    if noise_model == "uniform-random-values":
        pts = rng.permutation(n)[:bad]
        values[pts] = random_other(pts)
    elif noise_model == "constant-garbage":
        h = int(rng.integers(q))
        order = rng.permutation(n)
        order = np.concatenate([order[base[order] != h], order[base[order] == h]])
        pts = order[:bad]
        values[pts] = np.where(base[pts] != h, h, (h + 1) % q)
    else:
        other = nearest_other_affine(phi)
        order = rng.permutation(n)
        if other is None:
            pts = order[:bad]
            values[pts] = random_other(pts)
        else:
            differ = order[other[order] != base[order]]
            same = order[other[order] == base[order]]
            pts = np.concatenate([differ, same])[:bad]
            flip = pts[other[pts] != base[pts]]
            rest = pts[other[pts] == base[pts]]
            values[flip] = other[flip]
            values[rest] = random_other(rest)
    return GroupWord(G, H, values, name=name)


def planted_instance(G: Group, H: Group, agreement, noise_model: str, rng: np.random.Generator) -> tuple[AffineHom, GroupWord]:
    tables = affine_tables(G, H)
    phi = AffineHom.from_table(G, H, tables[int(rng.integers(tables.shape[0]))])
    return phi, corrupt(phi, agreement, noise_model, rng)


def is_partial_hom(pc: PolycyclicData, G: Group, H: Group, partial: PartialHom) -> bool:
    return partial.is_valid(pc, G, H)


def restrict_to_level(G: Group, phi: AffineHom, level: int) -> PartialHom:
    """Base homomorphism of ``phi`` restricted to ``G_level``, in code order."""
    pc = sorted_polycyclic(G).pc
    return PartialHom(level, phi.base.table[pc.code_to_elem[: pc.sizes[level]]].astype(np.intp))
