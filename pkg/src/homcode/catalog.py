"""Built-in groups and the line-oriented catalog file format.

File format::

    group <name> order <n> repr table
    <n lines of n space-separated indices>

    group <name> order <n> repr pc
    orders p1 ... pk
    pow i: <word>
    conj j i: <word>

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
import sympy

from .groups import (
    Classification,
    Group,
    GroupError,
    build_group_from_polycyclic,
    build_group_from_table,
    classify,
    format_word,
    parse_word,
)


class CatalogError(GroupError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class UnknownGroupError(CatalogError):
    pass


# --------------------------------------------------------------------------
# constructors


def cyclic(n: int) -> Group:
    """Z_n with element ``i`` the residue ``i``."""
    r = np.arange(n)
    return build_group_from_table((r[:, None] + r[None, :]) % n, name=f"Z{n}")


def elementary_abelian(p: int, k: int) -> Group:
    """Z_p^k; element index is ``sum x_i p^(i-1)`` and carries the obvious pc data."""
    return build_group_from_polycyclic([p] * k, name=f"Z{p}^{k}" if k > 1 else f"Z{p}")


def coordinates(index: int, p: int, k: int) -> tuple[int, ...]:
    out = []
    for _ in range(k):
        index, r = divmod(index, p)
        out.append(r)
    return tuple(out)


def dihedral(n: int) -> Group:
    """Symmetries of the n-gon, order 2n; ``r^i s^j`` has index ``i + n*j``."""
    els = [(i, j) for j in range(2) for i in range(n)]
    idx = {e: t for t, e in enumerate(els)}
    T = np.empty((2 * n, 2 * n), dtype=np.intp)
    for a, (i, j) in enumerate(els):
        for b, (k, l) in enumerate(els):
            T[a, b] = idx[((i + (k if j == 0 else -k)) % n, (j + l) % 2)]
    return build_group_from_table(T, name=f"D{n}")


def from_permutations(perms: Sequence[Sequence[int]], name: str = "") -> Group:
    """Group table of a list of permutations closed under composition.

    ``(a*b)(i) = a(b(i))``. The identity permutation need not come first.
    """
    perms = [tuple(p) for p in perms]
    idx = {p: t for t, p in enumerate(perms)}
    n = len(perms)
    T = np.empty((n, n), dtype=np.intp)
    for a, pa in enumerate(perms):
        for b, pb in enumerate(perms):
            T[a, b] = idx[tuple(pa[i] for i in pb)]
    return build_group_from_table(T, name=name)


def _sign(p: Sequence[int]) -> int:
    inversions = sum(1 for i in range(len(p)) for j in range(i + 1, len(p)) if p[i] > p[j])
    return -1 if inversions % 2 else 1


def symmetric(n: int) -> Group:
    return from_permutations(list(itertools.permutations(range(n))), name=f"S{n}")


def alternating(n: int) -> Group:
    perms = [p for p in itertools.permutations(range(n)) if _sign(p) == 1]
    return from_permutations(perms, name=f"A{n}")


def quaternion() -> Group:
    # g1 = -1, g2 = i, g3 = j
    return build_group_from_polycyclic(
        [2, 2, 2],
        power_relations={2: "g1", 3: "g1"},
        conjugation_relations={(3, 2): "g2 g1"},
        name="Q8",
    )


def z3_semidirect_z4() -> Group:
    # g1 = a (order 3), g2 = b^2, g3 = b acting by inversion
    return build_group_from_polycyclic(
        [3, 2, 2],
        power_relations={3: "g2"},
        conjugation_relations={(3, 1): "g1^2"},
        name="Z3:Z4",
    )


def direct_product(A: Group, B: Group) -> Group:
    """``A x B`` with ``(a, b)`` at index ``a + |A| * b``."""
    na, nb = A.order, B.order
    ta = A.table.astype(np.intp)
    tb = B.table.astype(np.intp)
    a = np.arange(na * nb) % na
    b = np.arange(na * nb) // na
    T = ta[a[:, None], a[None, :]] + na * tb[b[:, None], b[None, :]]
    return build_group_from_table(T, name=f"{A.name}x{B.name}")


# --------------------------------------------------------------------------
# registry

_BASE: dict[str, Callable[[], Group]] = {
    "S3": lambda: symmetric(3),
    "S4": lambda: symmetric(4),
    "A4": lambda: alternating(4),
    "Q8": quaternion,
    "Z3:Z4": z3_semidirect_z4,
}

_CYCLIC = re.compile(r"Z(\d+)$")
_POWER = re.compile(r"Z(\d+)\^(\d+)$")
_DIHEDRAL = re.compile(r"D(\d+)$")

MAX_PRODUCT_ORDER = 256

#: Direct products listed by ``catalog()``; any ``AxB`` name under 256 resolves.
LISTED_PRODUCTS = (
    "Z2xZ3", "Z2xS3", "Z3xS3", "Z2xD4", "Z2xQ8", "Z2xA4", "S3xS3", "Z2xS4",
    "Z4xS3", "Z3xD4", "Z2xZ3:Z4", "Q8xS3", "D4xS3", "A4xS3", "Z3xA4",
)


def _base_group(name: str) -> Group:
    if name in _BASE:
        return _BASE[name]()
    m = _POWER.match(name)
    if m:
        p, k = int(m.group(1)), int(m.group(2))
        if not sympy.isprime(p) or p**k > 256:
            raise UnknownGroupError(f"Z_p^k needs prime p and p^k <= 256: {name}")
        return elementary_abelian(p, k)
    m = _CYCLIC.match(name)
    if m:
        n = int(m.group(1))
        if not 1 <= n <= 64:
            raise UnknownGroupError(f"cyclic groups are built in for n <= 64: {name}")
        return cyclic(n)
    m = _DIHEDRAL.match(name)
    if m:
        n = int(m.group(1))
        if not 3 <= n <= 16:
            raise UnknownGroupError(f"dihedral groups are built in for 3 <= n <= 16: {name}")
        G = dihedral(n)
        return G
    raise UnknownGroupError(f"unknown group {name!r}")


@lru_cache(maxsize=None)
def get_group(name: str) -> Group:
    """Resolve a built-in name such as ``Z6``, ``Z2^4``, ``D4``, ``S3``, ``Z2xS3``."""
    factors = name.split("x")
    if len(factors) == 1:
        return _base_group(name)
    parts = [_base_group(f) for f in factors]
    if math.prod(p.order for p in parts) > MAX_PRODUCT_ORDER:
        raise UnknownGroupError(f"direct products are built in up to order {MAX_PRODUCT_ORDER}: {name}")
    G = parts[0]
    for P in parts[1:]:
        G = direct_product(G, P)
    G.name = name
    return G


def builtin_names() -> list[str]:
    names = [f"Z{n}" for n in range(1, 65)]
    for p in sympy.primerange(2, 257):
        k = 2
        while p**k <= 256:
            names.append(f"Z{p}^{k}")
            k += 1
    names += [f"D{n}" for n in range(3, 17)]
    names += list(_BASE)
    names += list(LISTED_PRODUCTS)
    return names


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    order: int
    flags: Classification
    isomorphic_to: str | None = None


def _invariant(G: Group) -> tuple:
    orders = np.bincount(G.element_orders, minlength=G.order + 1)
    return (G.order, G.is_abelian(), tuple(orders.tolist()))


def catalog(names: Iterable[str] | None = None, max_order: int = 256) -> list[CatalogEntry]:
    """Names, orders and classification flags; isomorphic duplicates are flagged.

    Abelian groups are identified exactly by their element-order counts. For
    nonabelian groups with matching invariants an explicit isomorphism is
    searched for when the order is at most 64.
    """
    from .homs import find_isomorphism

    entries = []
    seen: dict[tuple, list[tuple[str, Group]]] = {}
    for name in names if names is not None else builtin_names():
        G = get_group(name)
        if G.order > max_order:
            continue
        inv = _invariant(G)
        dup = None
        for other_name, other in seen.get(inv, []):
            if G.is_abelian() or (G.order <= 64 and find_isomorphism(G, other) is not None):
                dup = other_name
                break
        seen.setdefault(inv, []).append((name, G))
        entries.append(CatalogEntry(name, G.order, classify(G), dup))
    return entries


# --------------------------------------------------------------------------
# catalog file format

_HEADER = re.compile(r"group\s+(\S+)\s+order\s+(\d+)\s+repr\s+(table|pc)$")
_POW_LINE = re.compile(r"pow\s+(\d+)\s*:\s*(.*)$")
_CONJ_LINE = re.compile(r"conj\s+(\d+)\s+(\d+)\s*:\s*(.*)$")


def parse_catalog(text: str) -> dict[str, Group]:
    lines = [(no, ln.split("#", 1)[0].strip()) for no, ln in enumerate(text.splitlines(), 1)]
    lines = [(no, ln) for no, ln in lines if ln]
    out: dict[str, Group] = {}
    pos = 0
    while pos < len(lines):
        no, ln = lines[pos]
        m = _HEADER.match(ln)
        if not m:
            raise CatalogError(f"expected 'group <name> order <n> repr table|pc', got {ln!r}", no)
        name, n, kind = m.group(1), int(m.group(2)), m.group(3)
        if name in out:
            raise CatalogError(f"duplicate group name {name!r}", no)
        pos += 1
        if kind == "table":
            rows = []
            for _ in range(n):
                if pos >= len(lines):
                    raise CatalogError(f"table for {name} ended after {len(rows)} rows", no)
                rno, row = lines[pos]
                try:
                    vals = [int(v) for v in row.split()]
                except ValueError:
                    raise CatalogError(f"non-integer entry in table row {row!r}", rno) from None
                if len(vals) != n:
                    raise CatalogError(f"table row has {len(vals)} entries, expected {n}", rno)
                rows.append(vals)
                pos += 1
            try:
                out[name] = build_group_from_table(np.array(rows), name=name)
            except GroupError as e:
                raise CatalogError(f"invalid table for {name}: {e}", no) from e
        else:
            orders = None
            pows: dict[int, object] = {}
            conjs: dict[tuple[int, int], object] = {}
            while pos < len(lines) and not lines[pos][1].startswith("group"):
                rno, row = lines[pos]
                try:
                    if row.startswith("orders"):
                        orders = [int(v) for v in row.split()[1:]]
                    elif (pm := _POW_LINE.match(row)):
                        pows[int(pm.group(1))] = parse_word(pm.group(2))
                    elif (cm := _CONJ_LINE.match(row)):
                        conjs[(int(cm.group(1)), int(cm.group(2)))] = parse_word(cm.group(3))
                    else:
                        raise CatalogError(f"unrecognized pc line {row!r}", rno)
                except ValueError as e:
                    if isinstance(e, CatalogError):
                        raise
                    raise CatalogError(str(e), rno) from None
                pos += 1
            if orders is None:
                raise CatalogError(f"pc group {name} has no 'orders' line", no)
            try:
                G = build_group_from_polycyclic(orders, pows, conjs, name=name)
            except GroupError as e:
                raise CatalogError(f"invalid presentation for {name}: {e}", no) from e
            if G.order != n:
                raise CatalogError(f"header says order {n} but presentation has order {G.order}", no)
            out[name] = G
    return out


def dump_group(G: Group, name: str | None = None) -> str:
    """Serialize as a table entry (pc groups are written as tables too)."""
    name = name or G.name or "G"
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in G.table)
    return f"group {name} order {G.order} repr table\n{rows}\n"


def dump_presentation(name: str, orders: Sequence[int], pows: dict, conjs: dict) -> str:
    lines = [f"group {name} order {math.prod(orders)} repr pc", "orders " + " ".join(map(str, orders))]
    for i, w in sorted(pows.items()):
        lines.append(f"pow {i}: {format_word(parse_word(w) if isinstance(w, str) else w)}")
    for (j, i), w in sorted(conjs.items()):
        lines.append(f"conj {j} {i}: {format_word(parse_word(w) if isinstance(w, str) else w)}")
    return "\n".join(lines) + "\n"
