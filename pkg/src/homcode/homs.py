"""Homomorphisms, affine homomorphisms and received words between finite groups."""

from __future__ import annotations

import itertools
import logging
import math
import threading
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import sympy

from .groups import (
    Group,
    GroupError,
    PolycyclicData,
    classify,
    derived_subgroup,
    ensure_polycyclic,
)

log = logging.getLogger(__name__)

#: Below this order a group without a solvable series is enumerated by brute force.
TABLE_FALLBACK_ORDER = 64


class HypothesisError(GroupError):
    """The groups do not meet the hypotheses a computation relies on."""


class DomainMismatchError(ValueError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.intp)
    a.setflags(write=False)
    return a


class Hom:
    """A homomorphism ``G -> H`` stored as its full table of images."""

    __slots__ = ("source", "target", "table", "_key")

    def __init__(self, source: Group, target: Group, table: np.ndarray):
        self.source = source
        self.target = target
        self.table = _readonly(table)
        self._key = self.table.tobytes()

    def __call__(self, x: int) -> int:
        return int(self.table[x])

    def __eq__(self, other) -> bool:
        return isinstance(other, Hom) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"Hom({self.source.name}->{self.target.name}, {self.table.tolist()})"

    def generator_images(self) -> tuple[int, ...]:
        pc = polycyclic(self.source).pc
        return tuple(int(self.table[g]) for g in pc.gens)

    def is_homomorphism(self) -> bool:
        return is_homomorphism_table(self.source, self.target, self.table)


class AffineHom:
    """``x -> shift * base(x)``, kept in canonical form ``shift = phi(1)``."""

    __slots__ = ("shift", "base", "table", "_key")

    def __init__(self, shift: int, base: Hom):
        self.shift = int(shift)
        self.base = base
        self.table = _readonly(base.target.table[self.shift, base.table])
        self._key = self.table.tobytes()

    @classmethod
    def from_table(cls, source: Group, target: Group, table: np.ndarray) -> "AffineHom":
        table = np.asarray(table, dtype=np.intp)
        shift = int(table[0])
        base = target.table[target.inverses[shift], table]
        return cls(shift, Hom(source, target, base))

    @property
    def source(self) -> Group:
        return self.base.source

    @property
    def target(self) -> Group:
        return self.base.target

    def __call__(self, x: int) -> int:
        return int(self.table[x])

    def __eq__(self, other) -> bool:
        return isinstance(other, AffineHom) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"AffineHom(shift={self.shift}, {self.table.tolist()})"

    def sort_key(self) -> tuple:
        return tuple(self.table.tolist())

    def is_affine_homomorphism(self) -> bool:
        return is_affine_table(self.source, self.target, self.table)


class GroupWord:
    """A received word ``f: G -> H`` reachable only through counted queries.

    The counter is protected by a lock so concurrent decoders can share one
    oracle; the value table itself is read-only.
    """

    def __init__(self, source: Group, target: Group, values, name: str = "w"):
        values = np.asarray(values, dtype=np.intp)
        if values.shape != (source.order,):
            raise DomainMismatchError(f"word needs {source.order} values, got {values.shape}")
        if values.size and (values.min() < 0 or values.max() >= target.order):
            raise ValueError("word values must be elements of the target group")
        self.source = source
        self.target = target
        self.name = name
        self._values = _readonly(values)
        self._queries = 0
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"GroupWord({self.name}: {self.source.name}->{self.target.name})"

    def query(self, x: int) -> int:
        with self._lock:
            self._queries += 1
        return int(self._values[x])

    __call__ = query

    def query_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.intp)
        with self._lock:
            self._queries += int(xs.size)
        return self._values[xs]

    @property
    def queries(self) -> int:
        return self._queries

    def reset_queries(self) -> None:
        with self._lock:
            self._queries = 0

    @property
    def table(self) -> np.ndarray:
        """Uncounted full view, for brute-force oracles and reports only."""
        return self._values


# --------------------------------------------------------------------------
# validation helpers


def is_homomorphism_table(G: Group, H: Group, table) -> bool:
    """Full check of ``t(xy) = t(x) t(y)`` over all pairs."""
    t = np.asarray(table, dtype=np.intp)
    return bool((t[G.table] == H.table[t[:, None], t[None, :]]).all())


def is_homomorphism_by_generators(G: Group, H: Group, table) -> bool:
    """``t(xg) = t(x) t(g)`` for every x and every generator g, plus ``t(1) = 1``.

    Equivalent to the full check, since every element is a product of
    generators, at ``|G|`` times the number of generators.
    """
    t = np.asarray(table, dtype=np.intp)
    if t.shape != (G.order,) or t[0] != 0:
        return False
    gens = np.array(G.generators, dtype=np.intp)
    if gens.size == 0:
        return True
    return bool((t[G.table[:, gens]] == H.table[t[:, None], t[gens][None, :]]).all())


def is_affine_table(G: Group, H: Group, table, by_generators: bool = False) -> bool:
    t = np.asarray(table, dtype=np.intp)
    base = H.table[H.inverses[t[0]], t]
    check = is_homomorphism_by_generators if by_generators else is_homomorphism_table
    return check(G, H, base)


# --------------------------------------------------------------------------
# enumeration


def polycyclic(G: Group) -> Group:
    """``G`` with polycyclic data, cached on the group object."""
    if G.pc is not None:
        return G
    cached = G.__dict__.get("_auto_pc")
    if cached is None:
        cached = ensure_polycyclic(G)
        G.__dict__["_auto_pc"] = cached
    return cached


def extension_images(pc: PolycyclicData, H: Group, i: int, phi: np.ndarray) -> np.ndarray:
    """Elements ``a`` of H for which ``g_{i+1} -> a`` extends the hom ``phi``.

    ``phi`` is a code-indexed table of a homomorphism on ``G_i``. The test is
    ``a^p = phi(g^p)`` and ``a phi(g_j) a^-1 = phi(g g_j g^-1)`` for ``j <= i``;
    together these are exactly the conditions for the extension to be a
    homomorphism on ``G_{i+1}``.
    """
    p = pc.orders[i]
    cand = np.flatnonzero(H.powers(p) == phi[pc.pow_codes[i]])
    T, inv = H.table, H.inverses
    for j, cc in enumerate(pc.conj_codes[i]):
        if cand.size == 0:
            break
        gj = phi[pc.sizes[j]]
        ok = T[T[cand, gj], inv[cand]] == phi[cc]
        cand = cand[ok]
    return cand


def extension_valid(pc: PolycyclicData, H: Group, i: int, phi: np.ndarray, a: int) -> bool:
    p = pc.orders[i]
    if H.power(a, p) != phi[pc.pow_codes[i]]:
        return False
    T, ainv = H.table, H.inv(a)
    for j, cc in enumerate(pc.conj_codes[i]):
        if T[T[a, phi[pc.sizes[j]]], ainv] != phi[cc]:
            return False
    return True


def extend_table(H: Group, phi: np.ndarray, a: int, p: int) -> np.ndarray:
    """Code table of ``g^c x -> a^c phi(x)`` on ``G_{i+1}``."""
    blocks = [phi]
    acc = 0
    for _ in range(1, p):
        acc = int(H.table[acc, a])
        blocks.append(H.table[acc, phi])
    return np.concatenate(blocks).astype(np.intp)


def _code_tables(G: Group, H: Group, injective: bool = False) -> list[np.ndarray]:
    pc = G.pc
    tables = [np.zeros(1, dtype=np.intp)]
    for i, p in enumerate(pc.orders):
        nxt = []
        for phi in tables:
            for a in extension_images(pc, H, i, phi):
                theta = extend_table(H, phi, int(a), p)
                if injective and np.unique(theta).size != theta.size:
                    continue
                nxt.append(theta)
        tables = nxt
    return tables


def _bruteforce_tables(G: Group, H: Group) -> list[np.ndarray]:
    gens = G.generators
    out = []
    for images in itertools.product(range(H.order), repeat=len(gens)):
        t = np.full(G.order, -1, dtype=np.intp)
        t[0] = 0
        frontier = [0]
        ok = True
        while frontier and ok:
            nxt = []
            for x in frontier:
                for g, img in zip(gens, images):
                    y = int(G.table[x, g])
                    v = int(H.table[t[x], img])
                    if t[y] < 0:
                        t[y] = v
                        nxt.append(y)
                    elif t[y] != v:
                        ok = False
                        break
                if not ok:
                    break
            frontier = nxt
        if ok and is_homomorphism_table(G, H, t):
            out.append(t)
    return out


def hom_tables(G: Group, H: Group) -> np.ndarray:
    """All homomorphism tables ``G -> H`` as an ``(N, |G|)`` array."""
    if not classify(G).solvable:
        if G.order > TABLE_FALLBACK_ORDER:
            raise GroupError(f"{G.name} is not solvable and too large for table enumeration")
        tables = _bruteforce_tables(G, H)
    else:
        Gp = polycyclic(G)
        tables = [t[Gp.pc.elem_to_code] for t in _code_tables(Gp, H)]
    return np.array(tables, dtype=np.intp).reshape(len(tables), G.order)


def enumerate_homs(G: Group, H: Group) -> list[Hom]:
    return [Hom(G, H, t) for t in hom_tables(G, H)]


def affine_tables(G: Group, H: Group) -> np.ndarray:
    """Tables of every affine hom, ordered by (shift, base)."""
    base = hom_tables(G, H)
    return H.table[np.arange(H.order)[:, None, None], base[None, :, :]].reshape(-1, G.order).astype(np.intp)


def enumerate_affine_homs(G: Group, H: Group) -> list[AffineHom]:
    homs = enumerate_homs(G, H)
    return [AffineHom(h, phi) for h in range(H.order) for phi in homs]


def hom_from_generator_images(G: Group, H: Group, images: Sequence[int]) -> Hom:
    Gp = polycyclic(G)
    pc = Gp.pc
    if len(images) != pc.length:
        raise ValueError(f"need {pc.length} generator images, got {len(images)}")
    phi = np.zeros(1, dtype=np.intp)
    for i, (p, a) in enumerate(zip(pc.orders, images)):
        if not extension_valid(pc, H, i, phi, int(a)):
            raise GroupError(f"generator images {tuple(images)} violate the relations at g{i + 1}")
        phi = extend_table(H, phi, int(a), p)
    return Hom(G, H, phi[pc.elem_to_code])


def find_isomorphism(G: Group, H: Group) -> Hom | None:
    if G.order != H.order:
        return None
    if not classify(G).solvable:
        for t in _bruteforce_tables(G, H):
            if np.unique(t).size == G.order:
                return Hom(G, H, t)
        return None
    Gp = polycyclic(G)
    tables = _code_tables(Gp, H, injective=True)
    return Hom(G, H, tables[0][Gp.pc.elem_to_code]) if tables else None


# --------------------------------------------------------------------------
# agreement


def as_table(f) -> np.ndarray:
    if isinstance(f, np.ndarray):
        return f
    if isinstance(f, (Hom, AffineHom, GroupWord)):
        return f.table
    return np.asarray(f, dtype=np.intp)


def _check_domains(*fs) -> None:
    sizes = {as_table(f).shape for f in fs}
    if len(sizes) > 1:
        raise DomainMismatchError(f"functions have different domains: {sizes}")
    sources = {id(getattr(f, "source").table) for f in fs if hasattr(f, "source")}
    targets = {id(getattr(f, "target").table) for f in fs if hasattr(f, "target")}
    if len(sources) > 1 or len(targets) > 1:
        raise DomainMismatchError("functions have different source or target groups")


def agreement(f, g) -> Fraction:
    _check_domains(f, g)
    a, b = as_table(f), as_table(g)
    return Fraction(int((a == b).sum()), a.size)


def equalizer(functions: Iterable) -> frozenset[int]:
    fs = list(functions)
    if not fs:
        raise ValueError("equalizer of an empty collection is undefined here")
    _check_domains(*fs)
    tables = np.stack([as_table(f) for f in fs])
    return frozenset(int(x) for x in np.flatnonzero((tables == tables[0]).all(axis=0)))


def lambda_formula(G: Group, H: Group) -> Fraction:
    """``1/p`` for the smallest prime ``p | gcd(|G|,|H|)`` with an index-p normal subgroup of G.

    G has a normal subgroup of prime index p exactly when p divides the
    order of its abelianization.
    """
    cg, ch = classify(G), classify(H)
    if not (cg.solvable or ch.nilpotent):
        raise HypothesisError(
            f"needs G solvable or H nilpotent; {G.name} is not solvable and {H.name} is not nilpotent"
        )
    ab = G.order // derived_subgroup(G).order
    for p in sorted(sympy.factorint(math.gcd(G.order, H.order))):
        if ab % p == 0:
            return Fraction(1, p)
    return Fraction(0)


def max_pairwise_agreement(tables: np.ndarray) -> Fraction:
    n_fun, n = tables.shape
    if n_fun < 2:
        return Fraction(0)
    best = 0
    chunk = max(1, (1 << 23) // max(1, n_fun * n))
    for start in range(0, n_fun, chunk):
        block = tables[start : start + chunk]
        counts = (block[:, None, :] == tables[None, :, :]).sum(axis=2)
        counts[np.arange(block.shape[0]), start + np.arange(block.shape[0])] = -1
        best = max(best, int(counts.max()))
    return Fraction(best, n)


def lambda_bruteforce(G: Group, H: Group) -> Fraction:
    """Exact maximum agreement over all pairs of distinct affine homs."""
    tables = affine_tables(G, H)
    if tables.shape[0] < 2:
        log.warning("aHom(%s, %s) has fewer than two members; Lambda taken as 0", G.name, H.name)
        return Fraction(0)
    return max_pairwise_agreement(tables)


def brute_force_list_decode(G: Group, H: Group, w, a) -> list[AffineHom]:
    """Every affine hom with ``agr(phi, w) >= a``, sorted by table."""
    tables = affine_tables(G, H)
    wt = as_table(w)
    counts = (tables == wt[None, :]).sum(axis=1)
    a = Fraction(a)
    keep = np.flatnonzero(counts * a.denominator >= a.numerator * G.order)
    out = [AffineHom.from_table(G, H, tables[i]) for i in keep]
    return sorted(out, key=AffineHom.sort_key)


# --------------------------------------------------------------------------
# serialization


def format_group_word(w: GroupWord) -> str:
    head = f"word {w.name} source {w.source.name} target {w.target.name}"
    return head + "\n" + " ".join(str(int(v)) for v in w.table) + "\n"


def parse_group_word(text: str, groups: dict[str, Group]) -> GroupWord:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if not lines:
        raise ValueError("line 1: empty word file")
    parts = lines[0].split()
    if len(parts) != 6 or parts[0] != "word" or parts[2] != "source" or parts[4] != "target":
        raise ValueError(f"line 1: expected 'word <name> source <G> target <H>', got {lines[0]!r}")
    try:
        G, H = groups[parts[3]], groups[parts[5]]
    except KeyError as e:
        raise ValueError(f"line 1: unknown group {e.args[0]!r}") from None
    try:
        values = [int(v) for ln in lines[1:] for v in ln.split()]
    except ValueError:
        raise ValueError("line 2: word values must be integers") from None
    return GroupWord(G, H, values, name=parts[1])


def format_affine(phi: AffineHom) -> str:
    images = " ".join(str(v) for v in phi.base.generator_images())
    return f"affine shift {phi.shift} images {images}".rstrip()


def parse_affine(text: str, G: Group, H: Group) -> AffineHom:
    parts = text.split()
    if len(parts) < 3 or parts[0] != "affine" or parts[1] != "shift" or "images" not in parts:
        raise ValueError(f"expected 'affine shift <h> images ...', got {text!r}")
    shift = int(parts[2])
    images = [int(v) for v in parts[parts.index("images") + 1 :]]
    return AffineHom(shift, hom_from_generator_images(G, H, images))
