import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homcode.catalog import get_group
from homcode.groups import classify
from homcode.homs import (
    AffineHom,
    DomainMismatchError,
    GroupWord,
    Hom,
    HypothesisError,
    agreement,
    affine_tables,
    brute_force_list_decode,
    enumerate_affine_homs,
    enumerate_homs,
    equalizer,
    format_affine,
    format_group_word,
    hom_from_generator_images,
    hom_tables,
    is_affine_table,
    is_homomorphism_by_generators,
    is_homomorphism_table,
    lambda_bruteforce,
    lambda_formula,
    parse_affine,
    parse_group_word,
)

PAIRS = [
    ("Z2", "Z2"), ("Z3", "Z2"), ("Z4", "Z2"), ("Z2^2", "Z2"), ("S3", "Z2"), ("S3", "Z3"),
    ("Z6", "S3"), ("S3", "S3"), ("Z4", "Z4"), ("Z2^2", "S3"), ("D4", "Z2"), ("Q8", "Z4"),
]


def all_function_homs(G, H):
    """Oracle: scan every map G -> H (only for tiny orders)."""
    out = []
    for values in itertools.product(range(H.order), repeat=G.order):
        t = np.array(values)
        if is_homomorphism_table(G, H, t):
            out.append(tuple(values))
    return sorted(out)


def pairs(name_pairs):
    return [pytest.param(get_group(g), get_group(h), id=f"{g}->{h}") for g, h in name_pairs]


@pytest.mark.parametrize("G, H", pairs([p for p in PAIRS if get_group(p[1]).order ** get_group(p[0]).order <= 50000]))
def test_hom_enumeration_matches_exhaustive_scan(G, H):
    assert sorted(map(tuple, hom_tables(G, H).tolist())) == all_function_homs(G, H)


@pytest.mark.parametrize(
    "g, h, homs, ahoms",
    [("Z2", "Z2", 2, 4), ("S3", "Z2", 2, 4), ("Z3", "Z2", 1, 2), ("S3", "Z3", 1, 3), ("Z6", "S3", 6, 36), ("A4", "Z3", 3, 9)],
)
def test_hom_counts(g, h, homs, ahoms):
    G, H = get_group(g), get_group(h)
    assert len(enumerate_homs(G, H)) == homs
    assert len(enumerate_affine_homs(G, H)) == ahoms
    assert len({a.table.tobytes() for a in enumerate_affine_homs(G, H)}) == ahoms


def test_non_solvable_source_uses_table_fallback():
    from homcode.catalog import alternating

    A5 = alternating(5)
    assert not classify(A5).solvable
    assert len(enumerate_homs(A5, get_group("Z2"))) == 1


@pytest.mark.parametrize("G, H", pairs(PAIRS))
def test_every_enumerated_hom_is_valid_by_both_checks(G, H):
    for t in hom_tables(G, H):
        assert is_homomorphism_table(G, H, t)
        assert is_homomorphism_by_generators(G, H, t)


@pytest.mark.parametrize("G, H", pairs(PAIRS))
def test_left_and_right_affine_sets_coincide(G, H):
    base = hom_tables(G, H)
    left = {tuple(H.table[h, t]) for h in range(H.order) for t in base}
    right = {tuple(H.table[t, h]) for h in range(H.order) for t in base}
    assert left == right
    assert left == {tuple(t) for t in affine_tables(G, H)}


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(PAIRS), st.data())
def test_left_shift_of_affine_hom_is_enumerated(pair, data):
    G, H = get_group(pair[0]), get_group(pair[1])
    tables = affine_tables(G, H)
    members = {t.tobytes() for t in tables}
    t = tables[data.draw(st.integers(0, len(tables) - 1))]
    h = data.draw(st.integers(0, H.order - 1))
    assert H.table[h, t].astype(np.intp).tobytes() in members


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([p for p in PAIRS if get_group(p[1]).is_abelian()]), st.data())
def test_three_term_combination_is_affine_for_abelian_targets(pair, data):
    G, H = get_group(pair[0]), get_group(pair[1])
    tables = affine_tables(G, H)
    a, b, c = (tables[data.draw(st.integers(0, len(tables) - 1))] for _ in range(3))
    assert is_affine_table(G, H, H.table[H.table[a, H.inverses[b]], c])


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(PAIRS), st.data())
def test_generator_check_agrees_with_full_check(pair, data):
    G, H = get_group(pair[0]), get_group(pair[1])
    t = np.array(data.draw(st.lists(st.integers(0, H.order - 1), min_size=G.order, max_size=G.order)))
    t[0] = 0
    assert is_homomorphism_by_generators(G, H, t) == is_homomorphism_table(G, H, t)


def test_product_of_commuting_homs_into_coprime_factors():
    """A hom into Z2 x Z3 is a pair of homs into the factors."""
    G, H = get_group("Z6"), get_group("Z2xZ3")
    assert len(enumerate_homs(G, H)) == len(enumerate_homs(G, get_group("Z2"))) * len(enumerate_homs(G, get_group("Z3")))


def test_agreement_of_trivial_and_sign_on_s3():
    G, H = get_group("S3"), get_group("Z2")
    trivial, sign = sorted(enumerate_homs(G, H), key=lambda h: h.table.sum())
    assert agreement(trivial, sign) == Fraction(1, 2)
    eq = equalizer([trivial, sign])
    assert len(eq) == 3 and 0 in eq


def test_agreement_rejects_mismatched_domains():
    with pytest.raises(DomainMismatchError):
        agreement(np.zeros(4, dtype=int), np.zeros(6, dtype=int))


@pytest.mark.parametrize(
    "g, h, value",
    [
        ("Z2", "Z2", Fraction(1, 2)), ("Z2^3", "Z2", Fraction(1, 2)), ("Z3^2", "Z3", Fraction(1, 3)),
        ("S3", "Z2", Fraction(1, 2)), ("S3", "Z3", Fraction(0)), ("A4", "Z6", Fraction(1, 3)),
        ("Z5", "Z2", Fraction(0)), ("Z6", "S3", Fraction(1, 2)), ("Q8", "Z4", Fraction(1, 2)),
    ],
)
def test_lambda_examples_from_both_routes(g, h, value):
    G, H = get_group(g), get_group(h)
    assert lambda_formula(G, H) == value
    assert lambda_bruteforce(G, H) == value


def test_lambda_formula_hypothesis_check():
    from homcode.catalog import alternating

    with pytest.raises(HypothesisError):
        lambda_formula(alternating(5), get_group("S3"))


def test_brute_force_list_decode_examples():
    G, H = get_group("Z2^2"), get_group("Z2")
    phi = enumerate_affine_homs(G, H)[3]
    w = GroupWord(G, H, phi.table.copy())
    assert brute_force_list_decode(G, H, w, 1) == [phi]
    # every affine map of Z2^2 -> Z2 agrees with a fixed one on 0, 1/2 or all of G
    assert len(brute_force_list_decode(G, H, w, Fraction(1, 2))) == 7
    assert len(brute_force_list_decode(G, H, w, 0)) == 8


def test_brute_force_list_is_sorted_and_monotone():
    G, H = get_group("S3"), get_group("Z6")
    rng = np.random.default_rng(5)
    w = rng.integers(0, H.order, G.order)
    lists = [brute_force_list_decode(G, H, w, Fraction(k, 6)) for k in range(7)]
    for a, b in zip(lists, lists[1:]):
        assert set(b) <= set(a)
    assert lists[0] == sorted(lists[0], key=AffineHom.sort_key)


def test_group_word_counts_queries():
    G, H = get_group("Z4"), get_group("Z2")
    w = GroupWord(G, H, [0, 1, 0, 1])
    w.query(1)
    w(2)
    w.query_many([0, 1, 2])
    assert w.queries == 5
    _ = w.table
    assert w.queries == 5
    w.reset_queries()
    assert w.queries == 0


def test_group_word_validates_values():
    G, H = get_group("Z4"), get_group("Z2")
    with pytest.raises(DomainMismatchError):
        GroupWord(G, H, [0, 1])
    with pytest.raises(ValueError):
        GroupWord(G, H, [0, 1, 2, 0])


def test_word_serialization_roundtrip():
    G, H = get_group("S3"), get_group("Z3")
    w = GroupWord(G, H, [0, 2, 1, 1, 0, 2], name="received")
    back = parse_group_word(format_group_word(w), {"S3": G, "Z3": H})
    assert back.name == "received" and back.table.tolist() == w.table.tolist()


def test_word_parse_errors_name_lines():
    with pytest.raises(ValueError, match="line 1"):
        parse_group_word("word w source S3 target Q\n0 0 0 0 0 0\n", {"S3": get_group("S3")})
    with pytest.raises(ValueError, match="line 2"):
        parse_group_word("word w source Z2 target Z2\n0 a\n", {"Z2": get_group("Z2")})


@pytest.mark.parametrize("G, H", pairs([("S3", "Z6"), ("Z2^2", "S3"), ("D4", "Z4")]))
def test_affine_serialization_roundtrip(G, H):
    for phi in enumerate_affine_homs(G, H):
        assert parse_affine(format_affine(phi), G, H) == phi


def test_hom_from_generator_images_rejects_bad_images():
    G, H = get_group("Z2"), get_group("Z3")
    with pytest.raises(ValueError):
        hom_from_generator_images(G, H, [1])
    assert isinstance(hom_from_generator_images(G, H, [0]), Hom)


def test_affine_from_table_canonical_shift():
    G, H = get_group("S3"), get_group("Z2")
    for phi in enumerate_affine_homs(G, H):
        again = AffineHom.from_table(G, H, phi.table)
        assert again == phi and again.shift == phi.table[0]
