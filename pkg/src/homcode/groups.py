"""Finite groups as multiplication tables, plus the structural machinery the
decoder needs: cyclic series, quotients, polycyclic normal forms.

Elements are plain ``int`` indices into a group's table; index 0 is always the
identity.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import sympy

#: Largest order we are willing to materialize as a table (order**2 entries).
MAX_ORDER = 4096


class GroupError(ValueError):
    pass


class GroupValidationError(GroupError):
    """A table failed one of the group axioms; ``witness`` is the first offender."""

    def __init__(self, axiom: str, witness: tuple, message: str):
        super().__init__(f"{axiom}: {message}")
        self.axiom = axiom
        self.witness = witness


class PresentationError(GroupError):
    def __init__(self, message: str, realized_order: int | None = None):
        super().__init__(f"{message} (realized order: {realized_order})")
        self.realized_order = realized_order


class NotSupersolvableError(GroupError):
    pass


class NotSolvableError(GroupError):
    pass


class MissingPolycyclicError(GroupError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _dtype_for(n: int):
    return np.int16 if n <= np.iinfo(np.int16).max else np.int32


class Group:
    """A finite group given by its full multiplication table.

    ``table[x, y]`` is the index of ``x*y``. Build instances through
    :func:`build_group_from_table` or :func:`build_group_from_polycyclic`
    unless the table is already known to be valid.
    """

    def __init__(self, table: np.ndarray, name: str = "", pc: "PolycyclicData | None" = None):
        table = np.asarray(table)
        n = table.shape[0]
        self.table = _readonly(table.astype(_dtype_for(n), copy=False))
        inv = np.argmax(self.table == 0, axis=1)
        self.inverses = _readonly(inv.astype(np.intp))
        self.name = name
        self.pc = pc

    def __repr__(self) -> str:
        return f"Group({self.name or '?'}, order={self.order})"

    @property
    def order(self) -> int:
        return self.table.shape[0]

    @property
    def identity(self) -> int:
        return 0

    def elements(self) -> range:
        return range(self.order)

    def mul(self, x: int, y: int) -> int:
        return int(self.table[x, y])

    def inv(self, x: int) -> int:
        return int(self.inverses[x])

    def product(self, xs: Iterable[int]) -> int:
        acc = 0
        for x in xs:
            acc = int(self.table[acc, x])
        return acc

    def power(self, x: int, e: int) -> int:
        if e < 0:
            x, e = self.inv(x), -e
        acc, base = 0, x
        while e:
            if e & 1:
                acc = int(self.table[acc, base])
            base = int(self.table[base, base])
            e >>= 1
        return acc

    def powers(self, e: int) -> np.ndarray:
        """``x**e`` for every element ``x`` at once (``e >= 0``)."""
        idx = np.arange(self.order)
        acc = np.zeros(self.order, dtype=np.intp)
        base = idx
        while e:
            if e & 1:
                acc = self.table[acc, base].astype(np.intp)
            base = self.table[base, base].astype(np.intp)
            e >>= 1
        return acc

    @cached_property
    def power_table(self) -> np.ndarray:
        """``power_table[x, e] = x**e`` for ``0 <= e <= exponent``."""
        exp = self.exponent
        out = np.zeros((self.order, exp + 1), dtype=np.intp)
        cur = np.zeros(self.order, dtype=np.intp)
        idx = np.arange(self.order)
        for e in range(1, exp + 1):
            cur = self.table[cur, idx].astype(np.intp)
            out[:, e] = cur
        return _readonly(out)

    @cached_property
    def element_orders(self) -> np.ndarray:
        n = self.order
        orders = np.zeros(n, dtype=np.intp)
        cur = np.arange(n)
        idx = np.arange(n)
        for e in range(1, n + 1):
            hit = (cur == 0) & (orders == 0)
            orders[hit] = e
            if orders.all():
                break
            cur = self.table[cur, idx]
        return _readonly(orders)

    @cached_property
    def exponent(self) -> int:
        return math.lcm(*(int(o) for o in np.unique(self.element_orders)))

    def element_order(self, x: int) -> int:
        return int(self.element_orders[x])

    @cached_property
    def generators(self) -> tuple[int, ...]:
        return _small_generating_set(self.table, range(self.order))

    def is_abelian(self) -> bool:
        return bool((self.table == self.table.T).all())

    def with_pc(self, pc: "PolycyclicData") -> "Group":
        g = Group.__new__(Group)
        g.table, g.inverses, g.name, g.pc = self.table, self.inverses, self.name, pc
        return g


@dataclass(frozen=True, eq=False)
class PolycyclicData:
    """Polycyclic generating sequence ``g_1..g_k`` with prime relative orders.

    Every element is uniquely ``g_k^a_k ... g_1^a_1``; its *code* is the
    mixed-radix integer ``sum a_i * sizes[i-1]`` (``a_1`` least significant),
    so the subgroup ``G_i = <g_1..g_i>`` is exactly the codes below
    ``sizes[i]``.
    """

    gens: tuple[int, ...]
    orders: tuple[int, ...]
    code_to_elem: np.ndarray
    elem_to_code: np.ndarray
    pow_codes: tuple[int, ...]
    conj_codes: tuple[tuple[int, ...], ...]

    @property
    def length(self) -> int:
        return len(self.orders)

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate(self.orders, lambda a, b: a * b, initial=1))

    @property
    def is_sorted(self) -> bool:
        """Relative orders nonincreasing from the bottom (``p_1 >= ... >= p_k``)."""
        return all(a >= b for a, b in zip(self.orders, self.orders[1:]))

    def exponents(self, x: int) -> tuple[int, ...]:
        code = int(self.elem_to_code[x])
        out = []
        for p in self.orders:
            code, r = divmod(code, p)
            out.append(r)
        return tuple(out)

    def code_of(self, exps: Sequence[int]) -> int:
        return sum(a * s for a, s in zip(exps, self.sizes))

    def element(self, exps: Sequence[int]) -> int:
        if len(exps) != self.length:
            raise ValueError("exponent vector has wrong length")
        for a, p in zip(exps, self.orders):
            if not 0 <= a < p:
                raise ValueError(f"exponent {a} out of range for relative order {p}")
        return int(self.code_to_elem[self.code_of(exps)])

    def level_members(self, i: int) -> np.ndarray:
        return self.code_to_elem[: self.sizes[i]]


@dataclass(frozen=True, eq=False)
class Subgroup:
    parent: Group
    members: frozenset[int]
    gens: tuple[int, ...] | None = field(default=None, compare=False)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Subgroup)
            and other.parent.table is self.parent.table
            and other.members == self.members
        )

    def __hash__(self) -> int:
        return hash(self.members)

    def __contains__(self, x: int) -> bool:
        return x in self.members

    def __len__(self) -> int:
        return len(self.members)

    @property
    def order(self) -> int:
        return len(self.members)

    @cached_property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.parent.order, dtype=bool)
        m[list(self.members)] = True
        return _readonly(m)

    @cached_property
    def sorted_members(self) -> np.ndarray:
        return _readonly(np.array(sorted(self.members), dtype=np.intp))

    @cached_property
    def generators(self) -> tuple[int, ...]:
        if self.gens is not None:
            return self.gens
        return _small_generating_set(self.parent.table, self.sorted_members)


@dataclass(frozen=True)
class CyclicSeries:
    """Chain ``{1} = G_0 < G_1 < ... < G_k = G`` with ``|G_i : G_{i-1}| = primes[i-1]``."""

    groups: tuple[Subgroup, ...]
    primes: tuple[int, ...]
    kind: str  # "normal" (each G_i normal in G) or "subnormal"
    unsorted: bool = False

    @property
    def length(self) -> int:
        return len(self.primes)


@dataclass(frozen=True)
class Classification:
    abelian: bool
    nilpotent: bool
    supersolvable: bool
    solvable: bool


# --------------------------------------------------------------------------
# closures


def _mask_from(n: int, elems: Iterable[int]) -> np.ndarray:
    m = np.zeros(n, dtype=bool)
    m[np.fromiter(elems, dtype=np.intp)] = True
    return m


def _closure_mask(table: np.ndarray, gens: Iterable[int], start: np.ndarray | None = None) -> np.ndarray:
    """Mask of the subgroup generated by ``gens`` (and ``start`` if given, which
    must already be closed)."""
    n = table.shape[0]
    gens = np.unique(np.fromiter(gens, dtype=np.intp))
    if start is None:
        mask = np.zeros(n, dtype=bool)
        mask[0] = True
        frontier = np.array([0], dtype=np.intp)
    else:
        mask = start.copy()
        frontier = np.flatnonzero(mask)
    if gens.size == 0:
        return mask
    while frontier.size:
        prods = np.unique(table[np.ix_(frontier, gens)].ravel())
        new = prods[~mask[prods]]
        mask[new] = True
        frontier = new.astype(np.intp)
    return mask


def _small_generating_set(table: np.ndarray, members: Iterable[int]) -> tuple[int, ...]:
    members = np.fromiter(members, dtype=np.intp)
    n = table.shape[0]
    target = members.size
    gens: list[int] = []
    mask = np.zeros(n, dtype=bool)
    mask[0] = True
    while int(mask.sum()) < target:
        missing = members[~mask[members]]
        # prefer high-order elements: fewer generators
        gens.append(int(missing[0]))
        mask = _closure_mask(table, gens, start=mask)
    return tuple(gens)


def _subgroup_from_mask(G: Group, mask: np.ndarray, gens: tuple[int, ...] | None = None) -> Subgroup:
    return Subgroup(G, frozenset(int(x) for x in np.flatnonzero(mask)), gens)


def _normal_closure_mask(G: Group, elems: Iterable[int], within: Sequence[int] | None = None) -> np.ndarray:
    """Smallest subgroup containing ``elems`` normalized by ``within`` (default all of G)."""
    conj_by = np.fromiter(G.generators if within is None else within, dtype=np.intp)
    T, inv = G.table, G.inverses
    gens = set(int(x) for x in elems)
    while True:
        mask = _closure_mask(T, gens)
        members = np.flatnonzero(mask)
        sub_gens = _small_generating_set(T, members) if members.size > 1 else ()
        if not sub_gens:
            return mask
        sg = np.array(sub_gens, dtype=np.intp)
        conj = T[T[conj_by[:, None], sg[None, :]], inv[conj_by][:, None]].ravel()
        outside = np.unique(conj[~mask[conj]])
        if outside.size == 0:
            return mask
        gens.update(int(x) for x in outside)


# --------------------------------------------------------------------------
# construction


def build_group_from_table(mul_table, name: str = "") -> Group:
    """Validate a Cayley table and wrap it as a :class:`Group`.

    Checks run in the order: shape/range, associativity, identity, inverses.
    If the identity is not at index 0 it is swapped there.
    """
    T = np.asarray(mul_table)
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] == 0:
        raise GroupValidationError("shape", (), f"table must be square and nonempty, got {T.shape}")
    n = T.shape[0]
    if n > MAX_ORDER:
        raise GroupError(f"order {n} exceeds MAX_ORDER={MAX_ORDER}")
    if not np.issubdtype(T.dtype, np.integer):
        raise GroupValidationError("closure", (), "entries must be integers")
    bad = np.argwhere((T < 0) | (T >= n))
    if bad.size:
        x, y = (int(v) for v in bad[0])
        raise GroupValidationError("closure", (x, y), f"entry table[{x},{y}]={T[x, y]} outside [0,{n})")
    T = T.astype(np.intp)
    witness = _first_nonassociative(T)
    if witness is not None:
        a, b, c = witness
        raise GroupValidationError(
            "associativity", witness, f"({a}*{b})*{c} != {a}*({b}*{c})"
        )
    idx = np.arange(n)
    ids = np.flatnonzero((T == idx[None, :]).all(axis=1) & (T == idx[:, None]).all(axis=0))
    if ids.size == 0:
        raise GroupValidationError("identity", (), "no two-sided identity element")
    e = int(ids[0])
    has_inv = ((T == e) & (T.T == e)).any(axis=1)
    if not has_inv.all():
        x = int(np.flatnonzero(~has_inv)[0])
        raise GroupValidationError("inverse", (x,), f"element {x} has no two-sided inverse")
    if e != 0:
        perm = idx.copy()
        perm[0], perm[e] = e, 0  # perm is its own inverse
        T = perm[T[np.ix_(perm, perm)]]
    return Group(T, name=name)


def _first_nonassociative(T: np.ndarray) -> tuple[int, int, int] | None:
    n = T.shape[0]
    chunk = max(1, (1 << 22) // (n * n))
    for a0 in range(0, n, chunk):
        a = np.arange(a0, min(n, a0 + chunk))
        left = T[T[a][:, :, None], np.arange(n)[None, None, :]]  # (a*b)*c
        right = T[a[:, None, None], T[None, :, :]]  # a*(b*c)
        bad = np.argwhere(left != right)
        if bad.size:
            i, b, c = (int(v) for v in bad[0])
            return (int(a[i]), b, c)
    return None


_WORD_TOKEN = re.compile(r"g(\d+)(?:\^(-?\d+))?$")


def parse_word(text: str) -> tuple[tuple[int, int], ...]:
    """Parse ``"g1^2 g3"`` into ``((1, 2), (3, 1))``. ``"1"`` or ``""`` is the empty word."""
    text = text.strip()
    if text in ("", "1", "e"):
        return ()
    out = []
    for tok in text.replace("*", " ").split():
        m = _WORD_TOKEN.match(tok)
        if not m:
            raise ValueError(f"bad word token {tok!r}")
        out.append((int(m.group(1)), int(m.group(2) or 1)))
    return tuple(out)


def format_word(word: Sequence[tuple[int, int]]) -> str:
    return " ".join(f"g{g}^{e}" for g, e in word) or "1"


def _as_word(w) -> tuple[tuple[int, int], ...]:
    return parse_word(w) if isinstance(w, str) else tuple((int(g), int(e)) for g, e in w)


def build_group_from_polycyclic(
    relative_orders: Sequence[int],
    power_relations: Mapping[int, object] | None = None,
    conjugation_relations: Mapping[tuple[int, int], object] | None = None,
    name: str = "",
) -> Group:
    """Compile a consistent polycyclic presentation into a table.

    Generators are 1-based. ``power_relations[i]`` is the word for
    ``g_i^p_i`` over ``g_1..g_{i-1}``; ``conjugation_relations[(j, i)]`` with
    ``j > i`` is the word for ``g_j g_i g_j^-1`` over ``g_1..g_{j-1}``.
    Missing relations default to the identity / trivial action.  Element
    indices equal normal-form codes.
    """
    orders = tuple(int(p) for p in relative_orders)
    for p in orders:
        if not sympy.isprime(p):
            raise PresentationError(f"relative order {p} is not prime")
    total = math.prod(orders)
    if total > MAX_ORDER:
        raise GroupError(f"order {total} exceeds MAX_ORDER={MAX_ORDER}")
    power_relations = {int(k): _as_word(v) for k, v in (power_relations or {}).items()}
    conj = {(int(j), int(i)): _as_word(v) for (j, i), v in (conjugation_relations or {}).items()}
    k = len(orders)
    for i, w in power_relations.items():
        if not 1 <= i <= k or any(not 1 <= g < i for g, _ in w):
            raise PresentationError(f"power relation for g{i} must be a word over g1..g{i - 1}")
    for (j, i), w in conj.items():
        if not 1 <= i < j <= k or any(not 1 <= g < j for g, _ in w):
            raise PresentationError(f"conjugation relation ({j},{i}) must have j>i and use g1..g{j - 1}")

    T = np.zeros((1, 1), dtype=np.intp)
    n = 1
    for level in range(1, k + 1):
        p = orders[level - 1]
        gens = [math.prod(orders[: g - 1]) for g in range(1, level)]  # codes of g_1..g_{level-1}

        def evaluate(word):
            acc = 0
            for g, e in word:
                x = gens[g - 1]
                if e < 0:
                    x, e = int(np.argmax(T[x] == 0)), -e
                for _ in range(e):
                    acc = int(T[acc, x])
            return acc

        z = evaluate(power_relations.get(level, ()))
        images = [evaluate(conj.get((level, g), ((g, 1),))) for g in range(1, level)]
        # sigma(x) = g x g^-1 extended from generator images along the normal form
        sigma = np.zeros(n, dtype=np.intp)
        for g in range(1, level):
            size = gens[g - 1]
            block = sigma[:size].copy()
            acc = 0
            for c in range(1, orders[g - 1]):
                acc = int(T[acc, images[g - 1]])
                sigma[c * size : (c + 1) * size] = T[acc, block]
        idx = np.arange(n)
        ok = (
            len(np.unique(sigma)) == n
            and bool((sigma[T] == T[sigma[:, None], sigma[None, :]]).all())
            and int(sigma[z]) == z
        )
        if ok:
            sp = idx
            for _ in range(p):
                sp = sigma[sp]
            zinv = int(np.argmax(T[z] == 0))
            ok = bool((sp == T[T[z, idx], zinv]).all())
        if not ok:
            raise PresentationError(
                f"inconsistent relations at generator g{level}",
                _realized_order(orders, power_relations, conj),
            )
        sigma_inv = np.argsort(sigma)
        inv_pows = [idx]
        for _ in range(1, p):
            inv_pows.append(sigma_inv[inv_pows[-1]])
        new = np.zeros((p * n, p * n), dtype=np.intp)
        for a in range(p):
            for b in range(p):
                w = inv_pows[b]
                if a + b >= p:
                    w = T[z, w]
                block = T[w[:, None], idx[None, :]]
                new[a * n : (a + 1) * n, b * n : (b + 1) * n] = ((a + b) % p) * n + block
        T, n = new, n * p

    G = Group(T, name=name)
    codes = np.arange(n, dtype=np.intp)
    pc = _pc_from_codes(G, tuple(math.prod(orders[: i - 1]) for i in range(1, k + 1)), orders, codes)
    return G.with_pc(pc)


def _realized_order(orders, power_relations, conj) -> int | None:
    """Order of the group the relations actually present (coset enumeration)."""
    from sympy.combinatorics.fp_groups import FpGroup
    from sympy.combinatorics.free_groups import free_group

    k = len(orders)
    F, *g = free_group(" ".join(f"g{i}" for i in range(1, k + 1)))
    if k == 1:
        g = [g[0]] if not isinstance(g[0], (list, tuple)) else list(g[0])

    def word(w):
        out = F.identity
        for gi, e in w:
            out = out * g[gi - 1] ** e
        return out

    rels = []
    for i in range(1, k + 1):
        rels.append(g[i - 1] ** orders[i - 1] * word(power_relations.get(i, ())) ** -1)
        for j in range(1, i):
            w = conj.get((i, j), ((j, 1),))
            rels.append(g[i - 1] * g[j - 1] * g[i - 1] ** -1 * word(w) ** -1)
    try:
        return int(FpGroup(F, rels).order())
    except Exception:  # coset enumeration can blow up; the order is informational only
        return None


def _pc_from_codes(G: Group, gens: tuple[int, ...], orders: tuple[int, ...], code_to_elem: np.ndarray) -> PolycyclicData:
    elem_to_code = np.empty_like(code_to_elem)
    elem_to_code[code_to_elem] = np.arange(code_to_elem.size)
    T = G.table
    pow_codes = []
    conj_codes = []
    for i, (g, p) in enumerate(zip(gens, orders)):
        pow_codes.append(int(elem_to_code[G.power(g, p)]))
        gi = G.inv(g)
        conj_codes.append(tuple(int(elem_to_code[T[T[g, h], gi]]) for h in gens[:i]))
    return PolycyclicData(
        gens=tuple(int(g) for g in gens),
        orders=tuple(orders),
        code_to_elem=_readonly(code_to_elem.astype(np.intp)),
        elem_to_code=_readonly(elem_to_code.astype(np.intp)),
        pow_codes=tuple(pow_codes),
        conj_codes=tuple(conj_codes),
    )


def polycyclic_from_series(G: Group, series: CyclicSeries) -> PolycyclicData:
    """Pick ``g_i`` as the lowest index in ``G_i \\ G_{i-1}`` and enumerate normal forms."""
    T = G.table
    gens = []
    elems = np.array([0], dtype=np.intp)
    for lower, upper, p in zip(series.groups, series.groups[1:], series.primes):
        g = min(upper.members - lower.members)
        gens.append(g)
        blocks = [elems]
        power = 0
        for _ in range(1, p):
            power = int(T[power, g])
            blocks.append(T[power, elems].astype(np.intp))
        elems = np.concatenate(blocks)
    if elems.size != G.order or np.unique(elems).size != G.order:
        raise GroupError("series does not yield a normal-form bijection")
    return _pc_from_codes(G, tuple(gens), series.primes, elems)


def ensure_polycyclic(G: Group, sorted_only: bool = False) -> Group:
    """Return ``G`` carrying polycyclic data, deriving it from a subnormal series if needed."""
    if G.pc is not None and (not sorted_only or G.pc.is_sorted):
        return G
    series = subnormal_cyclic_series(G)
    return G.with_pc(polycyclic_from_series(G, series))


# --------------------------------------------------------------------------
# subgroups, quotients, classification


def subgroup_generated(G: Group, elements: Iterable[int]) -> Subgroup:
    elements = tuple(int(x) for x in elements)
    for x in elements:
        if not 0 <= x < G.order:
            raise ValueError(f"element {x} not in group of order {G.order}")
    gens = tuple(x for x in dict.fromkeys(elements) if x != 0)
    return _subgroup_from_mask(G, _closure_mask(G.table, gens), gens)


def normal_closure(G: Group, elements: Iterable[int]) -> Subgroup:
    return _subgroup_from_mask(G, _normal_closure_mask(G, elements))


def _as_members(N) -> np.ndarray:
    if isinstance(N, Subgroup):
        return N.sorted_members
    return np.array(sorted(int(x) for x in N), dtype=np.intp)


def is_normal(G: Group, N) -> bool:
    members = _as_members(N)
    mask = _mask_from(G.order, members)
    T, inv = G.table, G.inverses
    g = np.array(G.generators, dtype=np.intp)
    if g.size == 0:
        return True
    conj = T[T[g[:, None], members[None, :]], inv[g][:, None]]
    return bool(mask[conj].all())


def quotient(G: Group, N) -> tuple[Group, np.ndarray]:
    """Materialize ``G/N``; returns the quotient group and the projection array.

    Cosets are numbered by their lowest-index representative, so the coset
    ``N`` itself is 0.
    """
    members = _as_members(N)
    if not is_normal(G, members):
        raise GroupError("quotient requires a normal subgroup")
    n = G.order
    label = np.full(n, -1, dtype=np.intp)
    reps = []
    for x in range(n):
        if label[x] < 0:
            label[G.table[x, members]] = len(reps)
            reps.append(x)
    reps = np.array(reps, dtype=np.intp)
    Q = label[G.table[np.ix_(reps, reps)]]
    name = f"{G.name}/N" if G.name else ""
    return Group(Q, name=name), _readonly(label)


def derived_subgroup(G: Group, H=None) -> Subgroup:
    """Commutator subgroup of ``H`` (default ``G``), as a subgroup of ``G``."""
    members = np.arange(G.order) if H is None else _as_members(H)
    gens = np.array(_small_generating_set(G.table, members), dtype=np.intp) if members.size > 1 else np.array([], np.intp)
    return _subgroup_from_mask(G, _commutator_mask(G, gens, gens, within=gens))


def _commutator_mask(G: Group, a_gens, b_members, within) -> np.ndarray:
    T, inv = G.table, G.inverses
    a = np.asarray(a_gens, dtype=np.intp)
    b = np.asarray(b_members, dtype=np.intp)
    if a.size == 0 or b.size == 0:
        m = np.zeros(G.order, dtype=bool)
        m[0] = True
        return m
    comms = T[T[T[a[:, None], b[None, :]], inv[a][:, None]], inv[b][None, :]].ravel()
    return _normal_closure_mask(G, np.unique(comms), within=within)


def _derived_series_solvable(G: Group) -> bool:
    members = np.arange(G.order)
    while members.size > 1:
        gens = np.array(_small_generating_set(G.table, members), dtype=np.intp)
        nxt = np.flatnonzero(_commutator_mask(G, gens, gens, within=gens))
        if nxt.size == members.size:
            return False
        members = nxt
    return True


def _lower_central_nilpotent(G: Group) -> bool:
    gens = np.array(G.generators, dtype=np.intp)
    members = np.arange(G.order)
    while members.size > 1:
        sub = np.array(_small_generating_set(G.table, members), dtype=np.intp)
        # [G, gamma] is generated by [g, x] for generators g of G and x of gamma, normal-closed in G
        nxt = np.flatnonzero(_commutator_mask(G, gens, sub, within=gens))
        if nxt.size == members.size:
            return False
        members = nxt
    return True


def _prime_factors(n: int) -> list[int]:
    return sorted(sympy.factorint(n))


def _next_normal_step(G: Group, N_mask: np.ndarray, prefer_largest: bool) -> tuple[np.ndarray, int] | None:
    """A normal subgroup M > N of G with |M:N| prime, or None.

    With ``prefer_largest`` only the largest prime dividing |G:N| is tried;
    this is complete for supersolvable groups.
    """
    index = G.order // int(N_mask.sum())
    primes = _prime_factors(index)
    primes = [primes[-1]] if prefer_largest else primes
    T = G.table
    gens = np.array(G.generators, dtype=np.intp)
    n_members = np.flatnonzero(N_mask)
    n_gens = _small_generating_set(T, n_members) if n_members.size > 1 else ()
    size = int(N_mask.sum())
    for q in primes:
        # x must have order q modulo N
        for x in np.flatnonzero(~N_mask & N_mask[G.powers(q)]):
            M = _normal_closure_mask(G, list(n_gens) + [int(x)], within=gens)
            if int(M.sum()) == q * size:
                return M, q
    return None


def normal_cyclic_series(G: Group, largest_first: bool = True) -> CyclicSeries:
    """Chain of G-normal subgroups with prime indices.

    ``largest_first`` puts the largest primes at the bottom, which is the
    sorted order ``p_1 >= ... >= p_k`` and exists for every supersolvable G.
    """
    N = np.zeros(G.order, dtype=bool)
    N[0] = True
    groups = [_subgroup_from_mask(G, N)]
    primes = []
    while int(N.sum()) < G.order:
        step = _next_normal_step(G, N, prefer_largest=largest_first)
        if step is None:
            raise NotSupersolvableError(
                f"{G.name or 'group'} is not supersolvable; use subnormal_cyclic_series instead"
            )
        N, q = step
        groups.append(_subgroup_from_mask(G, N))
        primes.append(q)
    return CyclicSeries(tuple(groups), tuple(primes), kind="normal")


def normal_cyclic_series_sorted(G: Group) -> CyclicSeries:
    series = normal_cyclic_series(G, largest_first=True)
    assert all(a >= b for a, b in zip(series.primes, series.primes[1:]))
    return series


def is_supersolvable(G: Group) -> bool:
    try:
        normal_cyclic_series(G, largest_first=True)
    except NotSupersolvableError:
        return False
    return True


def classify(G: Group) -> Classification:
    abelian = G.is_abelian()
    solvable = abelian or _derived_series_solvable(G)
    nilpotent = abelian or _lower_central_nilpotent(G)
    supersolvable = abelian or (solvable and is_supersolvable(G))
    return Classification(abelian, nilpotent, supersolvable, solvable)


def _prime_index_normal_subgroups(G: Group, H: np.ndarray, q: int) -> Iterator[np.ndarray]:
    """Masks of the normal subgroups of index ``q`` in the subgroup ``H`` (a member array).

    They are the hyperplanes of the elementary abelian quotient ``H / H'H^q``.
    """
    T = G.table
    if H.size % q:
        return
    hg = np.array(_small_generating_set(T, H), dtype=np.intp)
    D = _commutator_mask(G, hg, hg, within=hg)
    qpows = [G.power(int(x), q) for x in hg]
    M = _closure_mask(T, list(_small_generating_set(T, np.flatnonzero(D))) + qpows)
    M = _normal_closure_mask(G, np.flatnonzero(M), within=hg)
    m_size = int(M.sum())
    r = round(math.log(H.size // m_size, q)) if H.size > m_size else 0
    if r == 0:
        return
    basis = []
    span = M.copy()
    for _ in range(r):
        x = int(H[~span[H]][0])
        basis.append(x)
        # span contains H' so it is normal in H; span<x> is already a subgroup
        span = _closure_mask(T, [x], start=span)
    m_members = np.flatnonzero(M)
    coords = np.zeros((G.order, r), dtype=np.intp)
    for c in itertools.product(range(q), repeat=r):
        t = 0
        for b, e in zip(basis, c):
            for _ in range(e):
                t = int(T[t, b])
        coords[T[t, m_members]] = c
    for lam in itertools.product(range(q), repeat=r):
        nz = [v for v in lam if v]
        if not nz or nz[0] != 1:
            continue
        vals = (coords[H] @ np.array(lam)) % q
        mask = np.zeros(G.order, dtype=bool)
        mask[H[vals == 0]] = True
        yield mask


def subnormal_cyclic_series(G: Group) -> CyclicSeries:
    """Composition series with prime factors, sorted ``p_1 >= ... >= p_k`` when possible.

    Searches top-down for a chain whose prime indices are nondecreasing from
    the top. If none exists the first composition series found is returned
    with ``unsorted=True``.
    """
    if not classify(G).solvable:
        raise NotSolvableError(f"{G.name or 'group'} is not solvable")
    failed: set[tuple[frozenset, int]] = set()

    def search(H: np.ndarray, min_prime: int, sorted_: bool) -> list[tuple[np.ndarray, int]] | None:
        if H.size == 1:
            return []
        key = (frozenset(H.tolist()), min_prime)
        if sorted_ and key in failed:
            return None
        for q in _prime_factors(H.size):
            if sorted_ and q < min_prime:
                continue
            for K in _prime_index_normal_subgroups(G, H, q):
                rest = search(np.flatnonzero(K), q if sorted_ else 0, sorted_)
                if rest is not None:
                    return [(K, q)] + rest
                if not sorted_:
                    break
        if sorted_:
            failed.add(key)
        return None

    top = np.arange(G.order)
    chain = search(top, 0, True)
    unsorted = chain is None
    if unsorted:
        chain = search(top, 0, False)
        assert chain is not None
    masks = [m for m, _ in reversed(chain)]
    primes = tuple(q for _, q in reversed(chain))
    groups = [_subgroup_from_mask(G, m) for m in masks] + [_subgroup_from_mask(G, np.ones(G.order, bool))]
    return CyclicSeries(tuple(groups), primes, kind="subnormal", unsorted=unsorted)


def semidirect_decompose(G: Group, k: int) -> tuple[Subgroup, Subgroup]:
    """Split a supersolvable G as ``N ⋊ K`` with ``N`` carrying the ``k`` largest primes."""
    factors = sympy.factorint(G.order)
    primes = sorted(factors, reverse=True)
    if not 1 <= k <= len(primes):
        raise ValueError(f"k must be in [1, {len(primes)}]")
    series = normal_cyclic_series_sorted(G)
    n_order = math.prod(p ** factors[p] for p in primes[:k])
    N = next(S for S in series.groups if S.order == n_order)
    m_order = G.order // n_order
    T = G.table
    orders = G.element_orders
    candidates = [x for x in range(1, G.order) if math.gcd(int(orders[x]), n_order) == 1]
    seen: set[frozenset] = set()

    def search(gens: list[int], mask: np.ndarray) -> np.ndarray | None:
        size = int(mask.sum())
        if size == m_order:
            return mask
        for x in candidates:
            if mask[x]:
                continue
            new = _closure_mask(T, gens + [x])
            s = int(new.sum())
            if m_order % s or math.gcd(s, n_order) != 1:
                continue
            key = frozenset(np.flatnonzero(new).tolist())
            if key in seen:
                continue
            seen.add(key)
            found = search(gens + [x], new)
            if found is not None:
                return found
        return None

    start = np.zeros(G.order, dtype=bool)
    start[0] = True
    K = search([], start)
    if K is None:
        raise GroupError("no complement found; classification is inconsistent")
    return N, _subgroup_from_mask(G, K)


# --------------------------------------------------------------------------
# sampling


def _require_pc(G: Group) -> PolycyclicData:
    if G.pc is None:
        raise MissingPolycyclicError(f"{G.name or 'group'} has no polycyclic data")
    return G.pc


def sample_uniform(G: Group, rng: np.random.Generator) -> int:
    pc = _require_pc(G)
    return pc.element([int(rng.integers(p)) for p in pc.orders])


def sample_coset(G: Group, i: int, high_exponents: Sequence[int], rng: np.random.Generator) -> int:
    """Uniform element of the coset ``s G_i`` where ``s = g_k^a_k ... g_{i+1}^a_{i+1}``.

    ``high_exponents`` lists ``(a_{i+1}, ..., a_k)``.
    """
    pc = _require_pc(G)
    if not 0 <= i <= pc.length or len(high_exponents) != pc.length - i:
        raise ValueError("high_exponents must have length k - i")
    low = [int(rng.integers(p)) for p in pc.orders[:i]]
    return pc.element(low + list(high_exponents))
