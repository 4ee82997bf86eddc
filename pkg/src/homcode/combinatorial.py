"""Set-family and list-size checks: special intersecting families, the
Johnson bound, the repetition transfer, the exponential worst case and
empirical list-size sweeps.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np
import sympy

from .catalog import coordinates, elementary_abelian
from .chain import QuotientChain, build_chain, project
from .groups import Group, classify
from .homs import (
    AffineHom,
    GroupWord,
    Hom,
    affine_tables,
    as_table,
    hom_tables,
    lambda_bruteforce,
    lambda_formula,
    HypothesisError,
)

EXHAUSTIVE_SUBSET_LIMIT = 12
INEQUALITY_RTOL = mpmath.mpf("1e-12")


def trial_seed(master: int, index: int) -> int:
    """Seed of trial ``index`` under master seed ``master``.

    Split rule: the first 32-bit word generated by
    ``SeedSequence([master, index])``. Any trial can be replayed alone by
    seeding ``numpy.random.default_rng`` with this value.
    """
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


# --------------------------------------------------------------------------
# special intersecting families


@dataclass(frozen=True)
class SetFamily:
    ambient_size: int
    sets: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.ambient_size < 1:
            raise ValueError("ambient set must be nonempty")
        for k, s in enumerate(self.sets):
            bad = [x for x in s if not 0 <= x < self.ambient_size]
            if bad:
                raise ValueError(f"set {k} has element {bad[0]} outside [0, {self.ambient_size})")

    @classmethod
    def of(cls, ambient_size: int, sets: Iterable[Iterable[int]]) -> "SetFamily":
        return cls(ambient_size, tuple(frozenset(int(x) for x in s) for s in sets))

    def __len__(self) -> int:
        return len(self.sets)

    def density(self, s: Iterable[int]) -> Fraction:
        return Fraction(len(frozenset(s)), self.ambient_size)

    def union(self) -> frozenset[int]:
        return frozenset().union(*self.sets)


@dataclass
class FamilyReport:
    rho: Fraction
    tau: Fraction
    c: int
    conditions: tuple[bool, bool, bool, bool]
    witnesses: tuple[object, object, object, object]
    alpha_values: tuple[Fraction, ...]
    subset_pairs_checked: int
    exhaustive: bool
    sampling_seed: int | None = None

    @property
    def holds(self) -> bool:
        return all(self.conditions)


def _bits(s: frozenset[int]) -> int:
    out = 0
    for x in s:
        out |= 1 << x
    return out


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _condition4_exhaustive(masks: list[int], n: int, tau: Fraction):
    """All ``J ⊆ I`` with ``|J| >= 2`` and ``mu(S_I) > tau``, via submask enumeration."""
    ell = len(masks)
    full = (1 << n) - 1
    inter = [full] * (1 << ell)
    for K in range(1, 1 << ell):
        low = K & -K
        inter[K] = inter[K ^ low] & masks[low.bit_length() - 1]
    checked = 0
    for I in range(1 << ell):
        if _popcount(I) < 2:
            continue
        if _popcount(inter[I]) * tau.denominator <= tau.numerator * n:
            continue
        J = (I - 1) & I
        while J:
            if _popcount(J) >= 2:
                checked += 1
                if inter[J] != inter[I]:
                    return checked, (_index_set(J), _index_set(I))
            J = (J - 1) & I
    return checked, None


def _index_set(K: int) -> tuple[int, ...]:
    return tuple(i for i in range(K.bit_length()) if K >> i & 1)


def _condition4_sampled(masks: list[int], n: int, tau: Fraction, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    ell = len(masks)
    full = (1 << n) - 1
    checked = 0
    for _ in range(samples):
        size = int(rng.integers(2, ell + 1))
        I = sorted(int(v) for v in rng.choice(ell, size=size, replace=False))
        SI = full
        for i in I:
            SI &= masks[i]
        if _popcount(SI) * tau.denominator <= tau.numerator * n:
            continue
        jsize = int(rng.integers(2, size + 1))
        J = sorted(int(v) for v in rng.choice(I, size=jsize, replace=False))
        SJ = full
        for j in J:
            SJ &= masks[j]
        checked += 1
        if SJ != SI:
            return checked, (tuple(J), tuple(I))
    return checked, None


def check_special_family(
    family: SetFamily,
    rho,
    tau,
    c: int,
    seed: int = 0,
    samples: int = 20000,
) -> FamilyReport:
    """Evaluate the four conditions of a ``(rho, tau, c)``-special intersecting family.

    1. every density is at least ``rho``;
    2. pairwise intersections have density at most ``rho``;
    3. ``sum (mu(S_i) - rho)^c <= 1``;
    4. for ``J ⊆ I`` with ``|J| >= 2`` and ``mu(S_I) > tau``, ``S_I = S_J``.

    Condition 4 is exhaustive for up to 12 sets and sampled (seed recorded)
    beyond that. Everything else is exact rational arithmetic.
    """
    if c < 1:
        raise ValueError("c must be at least 1")
    rho, tau = Fraction(rho), Fraction(tau)
    n = family.ambient_size
    dens = [family.density(s) for s in family.sets]
    alphas = tuple(d - rho for d in dens)

    w1 = next((i for i, d in enumerate(dens) if d < rho), None)
    w2 = None
    for i, j in itertools.combinations(range(len(family)), 2):
        if family.density(family.sets[i] & family.sets[j]) > rho:
            w2 = (i, j)
            break
    total = sum((a**c for a in alphas), Fraction(0))
    w3 = None if total <= 1 else total

    masks = [_bits(s) for s in family.sets]
    exhaustive = len(family) <= EXHAUSTIVE_SUBSET_LIMIT
    if exhaustive:
        checked, w4 = _condition4_exhaustive(masks, n, tau)
        used_seed = None
    else:
        checked, w4 = _condition4_sampled(masks, n, tau, samples, seed)
        used_seed = seed
    return FamilyReport(
        rho, tau, c,
        (w1 is None, w2 is None, w3 is None, w4 is None),
        (w1, w2, w3, w4),
        alphas, checked, exhaustive, used_seed,
    )


def special_intersecting_constant(c: float = 2):
    """``2c(c+1)(4 + (c+1) log2 3)``."""
    if c < 1:
        raise ValueError("c must be at least 1")
    c = mpmath.mpf(c)
    return 2 * c * (c + 1) * (4 + (c + 1) * mpmath.log(3, 2))


class NotSpecialError(ValueError):
    def __init__(self, report: FamilyReport):
        self.report = report
        failed = [k + 1 for k, ok in enumerate(report.conditions) if not ok]
        super().__init__(f"family is not special: conditions {failed} fail")


@dataclass(frozen=True)
class InequalityResult:
    holds: bool
    alpha: Fraction
    lhs: mpmath.mpf
    rhs: mpmath.mpf


def family_inequality(family: SetFamily, rho, c: int = 2, C=None) -> InequalityResult:
    """``alpha^C >= sum alpha_i^C`` where ``alpha = mu(union) - rho``; 50 significant digits."""
    rho = Fraction(rho)
    report = check_special_family(family, rho, rho * rho, c)
    if not report.holds:
        raise NotSpecialError(report)
    C = special_intersecting_constant(c) if C is None else C
    alpha = family.density(family.union()) - rho
    with mpmath.workdps(50):
        C = mpmath.mpf(C)

        def power(q: Fraction):
            return mpmath.power(mpmath.mpf(q.numerator) / q.denominator, C)

        lhs = power(alpha) if alpha > 0 else mpmath.mpf(0)
        rhs = mpmath.fsum(power(a) for a in report.alpha_values if a > 0)
        holds = bool(lhs >= rhs or mpmath.almosteq(lhs, rhs, rel_eps=INEQUALITY_RTOL, abs_eps=0))
    return InequalityResult(holds, alpha, lhs, rhs)


def verify_family_inequality(family: SetFamily, rho, c: int = 2, C=None) -> bool:
    return family_inequality(family, rho, c, C).holds


# --------------------------------------------------------------------------
# equalizer families along a quotient chain


@dataclass(frozen=True)
class EqualizerFamily:
    level: int  # families live at H_(level+1), extending phi at H_(level)
    parent: np.ndarray
    members: tuple[np.ndarray, ...]
    family: SetFamily


def equalizer_families(
    G: Group,
    chain: QuotientChain,
    word,
    p: int,
    epsilon,
) -> list[EqualizerFamily]:
    """Families ``Eq(phi_i, f^(k+1))`` over all ``phi_i`` extending a fixed ``phi``.

    For each level ``k`` and each affine hom ``phi`` into ``H_(k)`` with
    ``agr(phi, f^(k)) >= 1/p + epsilon``, collect the affine homs into
    ``H_(k+1)`` that extend ``phi`` and agree with ``f^(k+1)`` on at least
    ``1/p + epsilon``.
    """
    floor_ = Fraction(1, p) + Fraction(epsilon)
    n = G.order
    w = as_table(word)

    def keep(tables: np.ndarray, fk: np.ndarray) -> np.ndarray:
        counts = (tables == fk[None, :]).sum(axis=1)
        return tables[counts * floor_.denominator >= floor_.numerator * n]

    out = []
    for k in range(chain.length):
        fk = project(chain, w, k)
        fk1 = project(chain, w, k + 1)
        parents = keep(affine_tables(G, chain.quotients[k]), fk)
        children = keep(affine_tables(G, chain.quotients[k + 1]), fk1)
        if parents.size == 0 or children.size == 0:
            continue
        down = chain.level_map(k + 1, k)[children]
        for phi in parents:
            ext = children[(down == phi[None, :]).all(axis=1)]
            if ext.shape[0] == 0:
                continue
            sets = [np.flatnonzero(t == fk1) for t in ext]
            out.append(EqualizerFamily(k, phi, tuple(ext), SetFamily.of(n, sets)))
    return out


def equalizer_ratio_divides(G: Group, family: EqualizerFamily, tau) -> tuple[bool, object]:
    """For ``J ⊆ I`` (``|J| >= 2``), ``|Eq(Phi_J)| / |Eq(Phi_I)|`` is an integer dividing ``|G|``.

    Checked on every ``I`` whose ``mu(S_I)`` exceeds ``tau`` (the cases the
    argument needs), with ``J`` ranging over pairs inside ``I`` and ``I``
    itself. Families of more than 12 members are checked on pairs only.
    """
    tables = np.stack(family.members)
    ell = tables.shape[0]
    n = G.order
    tau = Fraction(tau)
    S = [frozenset(s) for s in family.family.sets]

    def eq_size(idx) -> int:
        sub = tables[list(idx)]
        return int((sub == sub[0]).all(axis=0).sum())

    subsets = (
        (I for r in range(2, ell + 1) for I in itertools.combinations(range(ell), r))
        if ell <= EXHAUSTIVE_SUBSET_LIMIT
        else itertools.combinations(range(ell), 2)
    )
    for I in subsets:
        SI = frozenset.intersection(*(S[i] for i in I))
        if Fraction(len(SI), n) <= tau:
            continue
        eI = eq_size(I)
        for J in itertools.combinations(I, 2):
            eJ = eq_size(J)
            if eI == 0 or eJ % eI or n % (eJ // eI):
                return False, (J, I, eJ, eI)
    return True, None


# --------------------------------------------------------------------------
# q-ary Johnson bound


@dataclass
class JohnsonCertificate:
    holds: bool
    q: int
    sum_of_squares: Fraction
    alphas: tuple[Fraction, ...]
    used: tuple[int, ...]
    dropped_low_agreement: tuple[int, ...]
    dropped_pairwise: tuple[int, ...]


def check_johnson(f, homs: Sequence, q: int | None = None) -> JohnsonCertificate:
    """Check ``sum alpha_i^2 <= 1`` with ``alpha_i = agr(f, phi_i) - 1/q``.

    Inputs violating the hypotheses are filtered and reported: functions with
    agreement below ``1/q`` are dropped, then functions whose agreement with
    an already kept one exceeds ``1/q`` are dropped greedily in input order.
    """
    w = as_table(f)
    n = w.size
    if q is None:
        target = getattr(f, "target", None)
        if target is None:
            raise ValueError("alphabet size q is needed for bare tables")
        q = target.order
    tables = np.stack([as_table(h) for h in homs]) if len(homs) else np.zeros((0, n), dtype=np.intp)
    counts = (tables == w[None, :]).sum(axis=1)
    low = tuple(int(i) for i in np.flatnonzero(counts * q < n))
    kept: list[int] = []
    pair_drop = []
    for i in np.flatnonzero(counts * q >= n):
        i = int(i)
        if any(int((tables[i] == tables[j]).sum()) * q > n for j in kept):
            pair_drop.append(i)
        else:
            kept.append(i)
    alphas = tuple(Fraction(int(counts[i]), n) - Fraction(1, q) for i in kept)
    total = sum((a * a for a in alphas), Fraction(0))
    return JohnsonCertificate(total <= 1, q, total, alphas, tuple(kept), low, tuple(pair_drop))


# --------------------------------------------------------------------------
# repetition transfer


@dataclass
class RepetitionReport:
    holds: bool
    r: int
    s: int
    a: Fraction
    a_transferred: Fraction
    list_r: int  # max over tested words of the C_r list size
    list_s: int  # C_s list size: exact when exhaustive, else best witness
    list_s_exact: bool
    words_tested: int
    exhaustive: bool
    violation: object = None


def _repeat(code: np.ndarray, times: int) -> np.ndarray:
    return np.tile(code, (1, times))


def _list_sizes(code_rep: np.ndarray, words: np.ndarray, a: Fraction) -> np.ndarray:
    length = code_rep.shape[1]
    matches = (words[:, None, :] == code_rep[None, :, :]).sum(axis=2)
    return (matches * a.denominator >= a.numerator * length).sum(axis=1)


def _all_words(alphabet: int, length: int) -> np.ndarray:
    return np.array(list(itertools.product(range(alphabet), repeat=length)), dtype=np.intp).reshape(-1, length)


def repetition_transfer_check(
    code,
    r: int,
    s: int,
    a,
    alphabet: int | None = None,
    exhaustive_limit: int = 8,
    random_words: int = 1000,
    seed: int = 0,
    exact_s_limit: int = 12,
) -> RepetitionReport:
    """Check ``l(C_r, a) <= l(C_s, floor(s/r) (r/s) a)`` for a repetition code.

    Each tested word ``w`` (all of them when ``r*n <= exhaustive_limit``,
    else ``random_words`` uniform ones) is padded to ``w' = (w,...,w,w'')``
    per the transfer construction; every ``c`` listed for ``w`` must then be
    listed for ``w'``. When ``s*n`` is small the right-hand list size is
    also computed exactly over all words.
    """
    if not s > r >= 1:
        raise ValueError("need s > r >= 1")
    code = np.array(sorted(set(tuple(int(v) for v in c) for c in code)), dtype=np.intp)
    if code.ndim != 2 or code.shape[0] == 0:
        raise ValueError("code must be a nonempty set of equal-length strings")
    n = code.shape[1]
    q = int(alphabet if alphabet is not None else code.max() + 1)
    a = Fraction(a)
    a2 = Fraction(s // r) * Fraction(r, s) * a
    Cr, Cs = _repeat(code, r), _repeat(code, s)
    rng = np.random.default_rng(seed)
    exhaustive = r * n <= exhaustive_limit
    words = _all_words(q, r * n) if exhaustive else rng.integers(q, size=(random_words, r * n))
    tail_len = (s - (s // r) * r) * n
    tail = rng.integers(q, size=(words.shape[0], tail_len))
    padded = np.concatenate([np.tile(words, (1, s // r)), tail], axis=1)

    m_r = (words[:, None, :] == Cr[None, :, :]).sum(axis=2) * a.denominator >= a.numerator * r * n
    m_s = (padded[:, None, :] == Cs[None, :, :]).sum(axis=2) * a2.denominator >= a2.numerator * s * n
    lost = m_r & ~m_s
    violation = None
    if lost.any():
        wi, ci = map(int, np.argwhere(lost)[0])
        violation = {"word": words[wi].tolist(), "codeword": code[ci].tolist()}
    list_r = int(m_r.sum(axis=1).max())
    list_s = int(m_s.sum(axis=1).max())
    exact = s * n <= exact_s_limit
    if exact:
        list_s = int(_list_sizes(Cs, _all_words(q, s * n), a2).max())
    holds = violation is None and list_r <= list_s
    return RepetitionReport(holds, r, s, a, a2, list_r, list_s, exact, int(words.shape[0]), exhaustive, violation)


def ahom_strings(G: Group, H: Group) -> list[tuple[int, ...]]:
    """Affine homs ``G -> H`` written out as strings over the alphabet ``H``."""
    return [tuple(int(v) for v in t) for t in affine_tables(G, H)]


# --------------------------------------------------------------------------
# exponential worst case


@dataclass
class WorstCase:
    G: Group
    H: Group
    word: GroupWord
    expected_count: int
    family: tuple[Hom, ...]


def _normalized(v: Sequence[int], p: int) -> tuple[int, ...]:
    lead = next(x for x in v if x)
    inv = pow(lead, -1, p)
    return tuple(x * inv % p for x in v)


def worst_case_instance(p: int, n: int, m: int) -> WorstCase:
    """``G = Z_p^n``, ``H = Z_p^m``, the zero word and the maps ``x -> (a.x) b``.

    ``phi_{a,b} = phi_{c,d}`` exactly when ``c = lam a`` and ``b = lam d``, so
    the family is indexed by ``a`` with leading coordinate 1 and any nonzero
    ``b``.
    """
    if not sympy.isprime(p):
        raise ValueError(f"{p} is not prime")
    G, H = elementary_abelian(p, n), elementary_abelian(p, m)
    xs = np.array([coordinates(x, p, n) for x in range(G.order)], dtype=np.int64)
    weights = p ** np.arange(m)
    nonzero = lambda k: (v for v in itertools.product(range(p), repeat=k) if any(v))
    seen = {}
    for a in nonzero(n):
        if _normalized(a, p) != a:
            continue
        dots = xs @ np.array(a) % p
        for b in nonzero(m):
            vals = (dots[:, None] * np.array(b)[None, :]) % p
            table = (vals * weights).sum(axis=1)
            seen.setdefault(table.tobytes(), Hom(G, H, table))
    word = GroupWord(G, H, np.zeros(G.order, dtype=np.intp), name="zero")
    expected = (p**n - 1) * (p**m - 1) // (p - 1)
    return WorstCase(G, H, word, expected, tuple(seen.values()))


def count_homs_at_agreement(G: Group, H: Group, word, a) -> int:
    """Homomorphisms (not affine) with agreement exactly ``a``, by full enumeration."""
    a = Fraction(a)
    counts = (hom_tables(G, H) == as_table(word)[None, :]).sum(axis=1)
    return int((counts * a.denominator == a.numerator * G.order).sum())


# --------------------------------------------------------------------------
# list-size sweeps


def lambda_value(G: Group, H: Group) -> Fraction:
    try:
        return lambda_formula(G, H)
    except HypothesisError:
        return lambda_bruteforce(G, H)


def _next_prime_above(n: int) -> int:
    return int(sympy.nextprime(n))


def finite_q_bound_log10(G: Group, H: Group, epsilon: float, C) -> float | None:
    """``log10`` of the bound at a concrete prime ``q > max(|G|, |H|)``.

    Applies only when the index-``p`` prime from the agreement formula is not
    the smallest prime of ``|G|`` (the repetition route). ``None`` otherwise,
    or when the finite-``q`` denominator is not positive.
    """
    lam = lambda_value(G, H)
    if lam == 0:
        return None
    p = lam.denominator
    if p == min(sympy.factorint(G.order)):
        return None
    small = math.prod(q**e for q, e in sympy.factorint(G.order).items() if q < p)
    q = _next_prime_above(max(G.order, H.order))
    frac = (q // small) * small / q
    denom = (frac - 1) / p + frac * epsilon
    if denom <= 0:
        return None
    return float(C) * math.log10(1 / denom)


@dataclass
class ListBoundRow:
    seed: int
    epsilon: float
    kind: str
    list_size: int
    bound_log10: float
    sanity_bound: float
    passed: bool


@dataclass
class ListBoundReport:
    G: str
    H: str
    epsilon: float
    trials: int
    master_seed: int
    lam: str
    C: float
    bound_log10: float
    finite_q_bound_log10: float | None
    sanity_bound: float
    max_list_size: int
    sanity_ok: bool
    bound_ok: bool
    rows: list[ListBoundRow] = field(default_factory=list)
    note: str = "the (1/eps)^2 ceiling is an empirical Johnson-level sanity check, not a proven bound"

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("rows")
        d["schema"] = "homcode.list-bound/1"
        return d

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LIST_BOUND_COLUMNS)
        for r in self.rows:
            w.writerow([r.seed, r.epsilon, r.kind, r.list_size, f"{r.bound_log10:.6f}", r.sanity_bound, int(r.passed)])
        return buf.getvalue()


LIST_BOUND_COLUMNS = ("seed", "epsilon", "kind", "list_size", "bound_log10", "sanity_bound", "pass")
WORD_KINDS = ("random", "corrupted-hom", "two-hom-mix", "zero")


def _adversarial_word(kind: str, tables: np.ndarray, H: Group, lam: Fraction, eps: float, rng) -> np.ndarray:
    n = tables.shape[1]
    if kind == "random":
        return rng.integers(H.order, size=n)
    if kind == "zero":
        return np.zeros(n, dtype=np.intp)
    if kind == "corrupted-hom":
        base = tables[rng.integers(tables.shape[0])].copy()
        t = rng.uniform(float(lam) + eps, 1.0)
        bad = rng.permutation(n)[: n - int(round(t * n))]
        base[bad] = rng.integers(H.order, size=bad.size)
        return base
    if kind == "two-hom-mix":
        i, j = rng.choice(tables.shape[0], size=2, replace=tables.shape[0] < 2)
        pick = rng.random(n) < 0.5
        return np.where(pick, tables[i], tables[j])
    raise ValueError(f"unknown word kind {kind!r}")


def verify_list_bound(
    G: Group,
    H: Group,
    epsilon: float,
    trials: int,
    master_seed: int = 0,
    c: int = 2,
) -> ListBoundReport:
    """Brute-force list sizes at agreement ``Lambda + epsilon`` over mixed words.

    Trials cycle through random words, corrupted homs, mixtures of two homs
    and the zero word. Each row compares the list size with ``(1/eps)^C``
    (stored as ``log10``) and with the ``(1/eps)^2`` sanity ceiling.
    """
    if not (classify(G).supersolvable and classify(H).supersolvable):
        raise HypothesisError("list-size sweeps need supersolvable G and H")
    lam = lambda_value(G, H)
    C = special_intersecting_constant(c)
    bound_log10 = float(C) * math.log10(1 / epsilon)
    sanity = (1 / epsilon) ** 2
    thr = lam + Fraction(epsilon).limit_denominator(1 << 32)
    tables = affine_tables(G, H)
    n = G.order
    rows = []
    for t in range(trials):
        seed = trial_seed(master_seed, t)
        rng = np.random.default_rng(seed)
        kind = WORD_KINDS[t % len(WORD_KINDS)]
        w = _adversarial_word(kind, tables, H, lam, epsilon, rng)
        counts = (tables == w[None, :]).sum(axis=1)
        size = int((counts * thr.denominator >= thr.numerator * n).sum())
        ok = math.log10(size) <= bound_log10 if size else True
        rows.append(ListBoundRow(seed, epsilon, kind, size, bound_log10, sanity, ok))
    mx = max((r.list_size for r in rows), default=0)
    return ListBoundReport(
        G.name, H.name, epsilon, trials, master_seed, str(lam), float(C), bound_log10,
        finite_q_bound_log10(G, H, epsilon, C), sanity, mx, mx <= sanity,
        all(r.passed for r in rows), rows,
    )
