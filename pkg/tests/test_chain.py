import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homcode.catalog import get_group
from homcode.chain import ChainError, build_chain, extends, project, reconstruct, residual
from homcode.homs import GroupWord, enumerate_affine_homs, enumerate_homs, is_affine_table, is_homomorphism_table

TARGETS = ["Z2", "Z4", "Z6", "Z2^2", "S3", "D4", "Q8", "Z3:Z4", "Z12"]


def test_chain_of_z4():
    chain = build_chain(get_group("Z4"))
    assert chain.primes == (2, 2)
    assert chain.reps == (1, 2)
    assert [sorted(L.members) for L in chain.levels] == [[0, 1, 2, 3], [0, 2], [0]]


def test_chain_of_s3_puts_the_larger_prime_at_the_bottom():
    chain = build_chain(get_group("S3"))
    assert chain.primes == (2, 3)
    assert chain.levels[1].order == 3


def test_smallest_first_ordering_is_available():
    chain = build_chain(get_group("Z6"), ordering="smallest-first")
    assert chain.primes == (3, 2)


def test_non_supersolvable_target_rejected():
    with pytest.raises(ChainError):
        build_chain(get_group("A4"))


def test_unknown_policy_rejected():
    with pytest.raises(ValueError):
        build_chain(get_group("Z4"), rep_policy="median")


@pytest.mark.parametrize("name", TARGETS)
@pytest.mark.parametrize("policy, seed", [("lowest-index", None), ("seeded-random", 3)])
def test_coset_tuples_are_bijective(name, policy, seed):
    chain = build_chain(get_group(name), rep_policy=policy, seed=seed)
    for k in range(chain.length + 1):
        tuples = {tuple(t) for t in chain.coset_tuples[k].tolist()}
        assert len(tuples) == chain.quotients[k].order == int(np.prod(chain.primes[:k]))
        assert chain.quotients[0].order == 1
    for i, y in enumerate(chain.reps):
        assert y in chain.levels[i].members and y not in chain.levels[i + 1].members


def test_seeded_random_reps_are_reproducible():
    H = get_group("Z3:Z4")
    a = build_chain(H, rep_policy="seeded-random", seed=11)
    b = build_chain(H, rep_policy="seeded-random", seed=11)
    assert a.reps == b.reps


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(TARGETS), st.sampled_from(["Z2^2", "S3", "Z4"]), st.data())
def test_projection_and_residual_reconstruct_the_word(target, source, data):
    G, H = get_group(source), get_group(target)
    chain = build_chain(H)
    values = data.draw(st.lists(st.integers(0, H.order - 1), min_size=G.order, max_size=G.order))
    f = GroupWord(G, H, values)
    k = data.draw(st.integers(0, chain.length))
    top, bottom = project(chain, f, k), residual(chain, f, k)
    assert chain.levels[k].mask[bottom.table].all()
    assert reconstruct(chain, top, bottom, k).table.tolist() == values


def test_reconstruct_rejects_residual_outside_level():
    G, H = get_group("Z2"), get_group("Z4")
    chain = build_chain(H)
    with pytest.raises(ChainError):
        reconstruct(chain, np.array([0, 0]), np.array([0, 1]), 1)


@pytest.mark.parametrize("source, target", [("Z2^2", "Z4"), ("S3", "Z6"), ("Z4", "D4"), ("S3", "S3")])
def test_projection_preserves_homs_and_affine_homs(source, target):
    G, H = get_group(source), get_group(target)
    chain = build_chain(H)
    for k in range(chain.length + 1):
        Q = chain.quotients[k]
        for phi in enumerate_homs(G, H):
            assert is_homomorphism_table(G, Q, project(chain, phi, k).table)
        for phi in enumerate_affine_homs(G, H)[:40]:
            assert is_affine_table(G, Q, project(chain, phi, k).table)


@pytest.mark.parametrize("source, target", [("S3", "Z6"), ("Z4", "D4")])
def test_extends_matches_projection(source, target):
    G, H = get_group(source), get_group(target)
    chain = build_chain(H)
    m = chain.length
    full = enumerate_affine_homs(G, H)
    for j in range(1, m + 1):
        for i in range(j):
            for phi in full[:20]:
                psi = project(chain, phi, j)
                lower = project(chain, phi, i)
                assert extends(chain, psi.table, j, lower.table, i)
                assert project(chain, psi.table, i, source_level=j).tolist() == lower.table.tolist()


def test_extends_requires_increasing_levels():
    chain = build_chain(get_group("Z4"))
    with pytest.raises(ChainError):
        extends(chain, np.zeros(2, dtype=int), 1, np.zeros(2, dtype=int), 1)


def test_level_map_composes():
    chain = build_chain(get_group("Z3:Z4"))
    m = chain.length
    for j in range(m + 1):
        for i in range(j + 1):
            for k in range(i + 1):
                assert (chain.level_map(i, k)[chain.level_map(j, i)] == chain.level_map(j, k)).all()
