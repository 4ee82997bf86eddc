"""The chain ``H = H_0 > H_1 > ... > H_m = {1}`` of a supersolvable target and
the maps it induces on words: projections ``f^(k)``, residuals ``f^(-k)``
and reconstruction from the pair.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .groups import (
    CyclicSeries,
    Group,
    GroupError,
    Subgroup,
    classify,
    normal_cyclic_series,
    quotient,
)
from .homs import AffineHom, GroupWord, Hom, as_table

REP_POLICIES = ("lowest-index", "seeded-random")
ORDERINGS = ("largest-first", "smallest-first")


class ChainError(GroupError):
    pass


@dataclass(frozen=True, eq=False)
class QuotientChain:
    H: Group
    series: CyclicSeries  # bottom-up, as produced by group-core
    levels: tuple[Subgroup, ...]  # top-down: levels[i] = H_i
    primes: tuple[int, ...]  # primes[i-1] = |H_{i-1} : H_i|
    reps: tuple[int, ...]  # reps[i] in H_i \ H_{i+1}
    quotients: tuple[Group, ...]  # quotients[k] = H / H_k
    projections: tuple[np.ndarray, ...]  # H -> quotients[k]
    coset_tuples: tuple[np.ndarray, ...]  # quotients[k] element -> (a_0..a_{k-1})
    coset_reps: tuple[np.ndarray, ...]  # quotients[k] element -> y_0^a_0 ... y_{k-1}^a_{k-1}

    @property
    def length(self) -> int:
        return len(self.primes)

    def quotient(self, k: int) -> Group:
        return self.quotients[k]

    def level_map(self, j: int, i: int) -> np.ndarray:
        """Natural map ``H/H_j -> H/H_i`` for ``i <= j``."""
        if not 0 <= i <= j <= self.length:
            raise ChainError(f"need 0 <= i <= j <= {self.length}, got i={i}, j={j}")
        return self.projections[i][self.coset_reps[j]]


def build_chain(
    H: Group,
    rep_policy: str = "lowest-index",
    seed: int | None = None,
    ordering: str = "largest-first",
) -> QuotientChain:
    """Build the chain from a normal cyclic series of ``H``.

    ``ordering="largest-first"`` takes the sorted series (largest primes at
    the bottom, so the top-down indices are nondecreasing); this is the
    order used by the list-size argument. ``smallest-first`` is kept for
    comparison experiments.
    """
    if rep_policy not in REP_POLICIES:
        raise ValueError(f"rep_policy must be one of {REP_POLICIES}")
    if ordering not in ORDERINGS:
        raise ValueError(f"ordering must be one of {ORDERINGS}")
    if not classify(H).supersolvable:
        raise ChainError(f"{H.name or 'H'} is not supersolvable")
    series = normal_cyclic_series(H, largest_first=(ordering == "largest-first"))
    m = series.length
    levels = tuple(reversed(series.groups))
    primes = tuple(reversed(series.primes))
    rng = np.random.default_rng(seed)
    reps = []
    for i in range(m):
        choices = sorted(levels[i].members - levels[i + 1].members)
        reps.append(choices[0] if rep_policy == "lowest-index" else int(rng.choice(choices)))

    quotients, projections, tuples_, crep = [], [], [], []
    T = H.table
    for k in range(m + 1):
        Q, proj = quotient(H, levels[k])
        Q.name = f"{H.name}/H{k}"
        nq = Q.order
        tup = np.full((nq, k), -1, dtype=np.intp)
        rep_of = np.full(nq, -1, dtype=np.intp)
        for a in itertools.product(*(range(p) for p in primes[:k])):
            t = 0
            for y, e in zip(reps, a):
                for _ in range(e):
                    t = int(T[t, y])
            c = int(proj[t])
            if rep_of[c] >= 0:
                raise ChainError(f"coset tuples collide at level {k}")
            rep_of[c] = t
            tup[c] = a
        if (rep_of < 0).any():
            raise ChainError(f"coset tuples do not cover H/H_{k}")
        quotients.append(Q)
        projections.append(proj)
        tuples_.append(tup)
        crep.append(rep_of)
    return QuotientChain(
        H, series, levels, primes, tuple(reps), tuple(quotients),
        tuple(projections), tuple(tuples_), tuple(crep),
    )


def project(chain: QuotientChain, f, k: int, source_level: int | None = None):
    """``f^(k)``: compose ``f`` with ``H -> H/H_k``.

    ``f`` may be a word, hom, affine hom or bare table. With ``source_level=j``
    the values of ``f`` are taken to lie in ``H/H_j`` already.
    """
    if not 0 <= k <= chain.length:
        raise ChainError(f"k must be in [0, {chain.length}]")
    j = chain.length if source_level is None else source_level
    mapping = chain.projections[k] if j == chain.length else chain.level_map(j, k)
    values = mapping[as_table(f)]
    Q = chain.quotients[k]
    if isinstance(f, AffineHom):
        return AffineHom.from_table(f.source, Q, values)
    if isinstance(f, Hom):
        return Hom(f.source, Q, values)
    if isinstance(f, GroupWord):
        return GroupWord(f.source, Q, values, name=f"{f.name}^({k})")
    return values


def residual(chain: QuotientChain, f, k: int):
    """``f^(-k)(x) = (y_0^a_0 ... y_{k-1}^a_{k-1})^-1 f(x)``, with values in ``H_k``."""
    if not 0 <= k <= chain.length:
        raise ChainError(f"k must be in [0, {chain.length}]")
    H = chain.H
    values = as_table(f)
    t = chain.coset_reps[k][chain.projections[k][values]]
    res = H.table[H.inverses[t], values].astype(np.intp)
    if isinstance(f, (GroupWord, Hom, AffineHom)):
        return GroupWord(f.source, H, res, name=f"{getattr(f, 'name', 'f')}^(-{k})")
    return res


def reconstruct(chain: QuotientChain, fk, fmk, k: int):
    """Inverse of ``(project, residual)``: ``f(x) = y_0^a_0 ... y_{k-1}^a_{k-1} f^(-k)(x)``."""
    H = chain.H
    top, bottom = as_table(fk), as_table(fmk)
    if top.shape != bottom.shape:
        raise ChainError("projection and residual have different domains")
    inside = chain.levels[k].mask[bottom]
    if not inside.all():
        x = int(np.flatnonzero(~inside)[0])
        raise ChainError(f"residual value at {x} is not in H_{k}")
    values = H.table[chain.coset_reps[k][top], bottom].astype(np.intp)
    source = getattr(fmk, "source", None) or getattr(fk, "source", None)
    if source is not None:
        return GroupWord(source, H, values, name="reconstructed")
    return values


def extends(chain: QuotientChain, psi, j: int, phi, i: int) -> bool:
    """Whether ``psi: G -> H/H_j`` projects onto ``phi: G -> H/H_i``."""
    if not i < j:
        raise ChainError(f"extends needs i < j, got i={i}, j={j}")
    mapped = chain.level_map(j, i)[as_table(psi)]
    return bool(np.array_equal(mapped, as_table(phi)))
