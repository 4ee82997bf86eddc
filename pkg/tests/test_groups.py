import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homcode.catalog import (
    CatalogError,
    UnknownGroupError,
    catalog,
    cyclic,
    dihedral,
    dump_group,
    dump_presentation,
    elementary_abelian,
    get_group,
    parse_catalog,
    symmetric,
)
from homcode.groups import (
    GroupValidationError,
    MissingPolycyclicError,
    NotSupersolvableError,
    PresentationError,
    build_group_from_polycyclic,
    build_group_from_table,
    classify,
    format_word,
    is_normal,
    normal_cyclic_series,
    normal_cyclic_series_sorted,
    parse_word,
    polycyclic_from_series,
    quotient,
    sample_coset,
    sample_uniform,
    semidirect_decompose,
    subgroup_generated,
    subnormal_cyclic_series,
)
from homcode.homs import find_isomorphism, polycyclic

SMALL_NAMES = ["Z1", "Z2", "Z6", "Z12", "Z2^3", "Z3^2", "S3", "D4", "D5", "Q8", "A4", "Z3:Z4", "Z2xS3", "S4"]
SUPERSOLVABLE_NAMES = [n for n in SMALL_NAMES if n not in ("A4", "S4")]


def _perm_sign(p):
    inversions = sum(1 for i in range(len(p)) for j in range(i + 1, len(p)) if p[i] > p[j])
    return -1 if inversions % 2 else 1


# ---------------------------------------------------------------- tables


def test_table_with_repeated_row_entry_reports_latin_witness():
    bad = np.array([[0, 1, 2], [1, 1, 0], [2, 0, 1]])
    with pytest.raises(GroupValidationError) as exc:
        build_group_from_table(bad)
    assert exc.value.witness


def test_identity_is_relabelled_to_index_zero():
    shifted = np.array([[1, 0], [0, 1]])
    G = build_group_from_table(shifted)
    assert G.table.tolist() == [[0, 1], [1, 0]]


def test_table_without_identity_is_rejected():
    with pytest.raises(GroupValidationError) as exc:
        build_group_from_table(np.array([[0, 0], [0, 0]]))
    assert exc.value.axiom in ("identity", "associativity")


def test_nonassociative_latin_square_reports_triple():
    # a loop of order 5 that is not a group
    loop = np.array([
        [0, 1, 2, 3, 4],
        [1, 0, 3, 4, 2],
        [2, 4, 0, 1, 3],
        [3, 2, 4, 0, 1],
        [4, 3, 1, 2, 0],
    ])
    with pytest.raises(GroupValidationError) as exc:
        build_group_from_table(loop)
    assert exc.value.axiom.startswith("assoc")
    x, y, z = exc.value.witness
    T = loop
    assert T[T[x, y], z] != T[x, T[y, z]]


@pytest.mark.parametrize("name", SMALL_NAMES)
def test_catalog_groups_satisfy_axioms(name):
    G = get_group(name)
    T = G.table.astype(int)
    n = G.order
    assert (T[0] == np.arange(n)).all() and (T[:, 0] == np.arange(n)).all()
    assert (T[np.arange(n), G.inverses] == 0).all()
    assert (T[T[:, :, None], np.arange(n)[None, None, :]] == T[np.arange(n)[:, None, None], T[None, :, :]]).all()


# ---------------------------------------------------------------- presentations


def test_pc_s3_is_isomorphic_to_permutation_s3():
    G = build_group_from_polycyclic((3, 2), conjugation_relations={(2, 1): "g1^2"}, name="S3pc")
    assert G.order == 6 and not G.is_abelian()
    assert find_isomorphism(G, symmetric(3)) is not None
    assert G.pc.orders == (3, 2)


def test_pc_d4_is_isomorphic_to_dihedral():
    G = build_group_from_polycyclic((2, 2, 2), conjugation_relations={(3, 2): "g1 g2"})
    assert find_isomorphism(G, dihedral(4)) is not None


def test_pc_power_relation_gives_cyclic_group():
    G = build_group_from_polycyclic((2, 2), power_relations={2: "g1"})
    assert find_isomorphism(G, cyclic(4)) is not None


def test_inconsistent_presentation_reports_realized_order():
    with pytest.raises(PresentationError) as exc:
        build_group_from_polycyclic((3, 2), power_relations={2: "g1"}, conjugation_relations={(2, 1): "g1^2"})
    assert exc.value.realized_order == 2


def test_non_prime_relative_order_rejected():
    with pytest.raises(PresentationError):
        build_group_from_polycyclic((4,))


@given(st.lists(st.tuples(st.integers(1, 9), st.integers(-5, 5)), max_size=6))
def test_word_format_parse_roundtrip(word):
    assert parse_word(format_word(word)) == tuple(word)


def test_parse_word_accepts_bare_generators_and_identity():
    assert parse_word("g1 g2^-1") == ((1, 1), (2, -1))
    assert parse_word("1") == ()


# ---------------------------------------------------------------- classification


@pytest.mark.parametrize(
    "name, flags",
    [
        ("Z12", (True, True, True, True)),
        ("S3", (False, False, True, True)),
        ("Q8", (False, True, True, True)),
        ("D4", (False, True, True, True)),
        ("A4", (False, False, False, True)),
        ("S4", (False, False, False, True)),
        ("Z3:Z4", (False, False, True, True)),
    ],
)
def test_classify_examples(name, flags):
    c = classify(get_group(name))
    assert (c.abelian, c.nilpotent, c.supersolvable, c.solvable) == flags


def test_a5_is_not_solvable():
    from homcode.catalog import alternating

    c = classify(alternating(5))
    assert not c.solvable and not c.supersolvable


@pytest.mark.parametrize("name", SUPERSOLVABLE_NAMES)
def test_normal_series_invariants(name):
    G = get_group(name)
    s = normal_cyclic_series_sorted(G)
    assert s.groups[0].order == 1 and s.groups[-1].order == G.order
    assert list(s.primes) == sorted(s.primes, reverse=True)
    for lower, upper, p in zip(s.groups, s.groups[1:], s.primes):
        assert upper.order == lower.order * p
        assert lower.members <= upper.members
        assert is_normal(G, upper)


@pytest.mark.parametrize("name", SMALL_NAMES)
def test_smallest_first_series_is_also_normal(name):
    G = get_group(name)
    if not classify(G).supersolvable:
        with pytest.raises(NotSupersolvableError):
            normal_cyclic_series(G, largest_first=False)
        return
    s = normal_cyclic_series(G, largest_first=False)
    assert all(is_normal(G, S) for S in s.groups)


def test_subnormal_series_for_s4_is_unsorted():
    s = subnormal_cyclic_series(get_group("S4"))
    assert s.primes == (2, 2, 3, 2)
    assert s.unsorted


def test_subnormal_series_links_are_normal_in_next():
    G = get_group("A4")
    s = subnormal_cyclic_series(G)
    for lower, upper in zip(s.groups, s.groups[1:]):
        T = G.table
        for g in upper.members:
            assert {int(T[T[g, x], G.inverses[g]]) for x in lower.members} == set(lower.members)


@pytest.mark.parametrize("name", SUPERSOLVABLE_NAMES)
def test_polycyclic_normal_form_is_bijective(name):
    G = polycyclic(get_group(name))
    pc = G.pc
    assert sorted(pc.code_to_elem.tolist()) == list(range(G.order))
    assert (pc.elem_to_code[pc.code_to_elem] == np.arange(G.order)).all()
    for x in G.elements():
        assert pc.element(pc.exponents(x)) == x


def test_polycyclic_levels_are_subgroups():
    G = polycyclic(get_group("D4"))
    for i in range(G.pc.length + 1):
        members = set(G.pc.level_members(i).tolist())
        assert subgroup_generated(G, members).members == frozenset(members)


# ---------------------------------------------------------------- semidirect, quotients


@pytest.mark.parametrize("name, k, orders", [("Z6", 1, (3, 2)), ("S3", 1, (3, 2)), ("Z12", 1, (3, 4)), ("S3xS3", 1, (9, 4))])
def test_semidirect_decompose(name, k, orders):
    G = get_group(name)
    N, K = semidirect_decompose(G, k)
    assert (N.order, K.order) == orders
    assert is_normal(G, N)
    assert N.members & K.members == {0}
    products = {int(G.table[n, c]) for n in N.members for c in K.members}
    assert len(products) == G.order


def test_quotient_s3_by_a3_is_z2():
    G = symmetric(3)
    A3 = subgroup_generated(G, [next(x for x in G.elements() if G.element_order(x) == 3)])
    Q, proj = quotient(G, A3)
    assert Q.order == 2
    assert find_isomorphism(Q, cyclic(2)) is not None
    T = G.table
    assert all(proj[T[x, y]] == Q.table[proj[x], proj[y]] for x in G.elements() for y in G.elements())


def test_quotient_by_non_normal_subgroup_raises():
    G = symmetric(3)
    transposition = next(x for x in G.elements() if G.element_order(x) == 2)
    N = subgroup_generated(G, [transposition])
    assert not is_normal(G, N)
    with pytest.raises(ValueError):
        quotient(G, N)


# ---------------------------------------------------------------- sampling


def test_sampling_requires_polycyclic_data():
    G = build_group_from_table(cyclic(4).table)
    with pytest.raises(MissingPolycyclicError):
        sample_uniform(G, np.random.default_rng(0))


def test_sample_uniform_is_uniform_on_klein_group():
    G = polycyclic(elementary_abelian(2, 2))
    rng = np.random.default_rng(1)
    counts = np.bincount([sample_uniform(G, rng) for _ in range(20000)], minlength=4) / 20000
    assert np.allclose(counts, 0.25, atol=0.02)


def test_sample_coset_of_s3_with_top_exponent_one_gives_odd_permutations():
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    G = polycyclic(symmetric(3))
    assert G.pc.orders == (3, 2)
    from homcode.catalog import from_permutations
    # symmetric(3) enumerates permutations lexicographically
    assert find_isomorphism(G, from_permutations(perms)) is not None
    rng = np.random.default_rng(2)
    seen = {sample_coset(G, 1, [1], rng) for _ in range(200)}
    assert len(seen) == 3
    assert all(_perm_sign(perms[x]) == -1 for x in seen)


def test_pc_from_series_matches_series_primes():
    G = get_group("Z3:Z4")
    s = normal_cyclic_series_sorted(G)
    pc = polycyclic_from_series(G, s)
    assert pc.orders == s.primes
    assert pc.is_sorted


# ---------------------------------------------------------------- catalog


def test_catalog_lists_builtins_with_duplicates_flagged():
    entries = {e.name: e for e in catalog(["Z6", "Z2xZ3", "S3", "D3"])}
    assert entries["Z2xZ3"].isomorphic_to == "Z6"
    assert entries["D3"].isomorphic_to == "S3"
    assert entries["S3"].flags.supersolvable


def test_unknown_group_name():
    with pytest.raises(UnknownGroupError):
        get_group("Q17")


def test_catalog_file_roundtrip_table_and_pc():
    text = dump_group(get_group("S3"), "MyS3") + dump_presentation("MyD4", (2, 2, 2), {}, {(3, 2): "g1 g2"})
    groups = parse_catalog(text)
    assert find_isomorphism(groups["MyS3"], get_group("S3")) is not None
    assert find_isomorphism(groups["MyD4"], get_group("D4")) is not None


@pytest.mark.parametrize(
    "text, line",
    [
        ("group A order 2 repr table\n0 1\n1 1\n", 1),
        ("group A order 2 repr table\n0 1\n1 x\n", 3),
        ("group A order 2 repr table\n0 1 0\n", 2),
        ("# comment\nhello\n", 2),
        ("group P order 4 repr pc\norders 2 2\nbogus line\n", 3),
        ("group P order 8 repr pc\norders 2 2\n", 1),
    ],
)
def test_catalog_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(CatalogError) as exc:
        parse_catalog(text)
    assert exc.value.line == line


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SUPERSOLVABLE_NAMES), st.integers(0, 2**32 - 1))
def test_sample_uniform_stays_in_group_and_hits_level_cosets(name, seed):
    G = polycyclic(get_group(name))
    rng = np.random.default_rng(seed)
    x = sample_uniform(G, rng)
    assert 0 <= x < G.order
    pc = G.pc
    if pc.length:
        i = pc.length - 1
        top = [int(rng.integers(pc.orders[-1]))]
        y = sample_coset(G, i, top, rng)
        assert pc.exponents(y)[-1] == top[0]
