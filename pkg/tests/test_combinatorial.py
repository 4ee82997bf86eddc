import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homcode.catalog import get_group
from homcode.chain import build_chain
from homcode.combinatorial import (
    LIST_BOUND_COLUMNS,
    NotSpecialError,
    SetFamily,
    ahom_strings,
    check_johnson,
    check_special_family,
    count_homs_at_agreement,
    equalizer_families,
    equalizer_ratio_divides,
    family_inequality,
    repetition_transfer_check,
    special_intersecting_constant,
    trial_seed,
    verify_list_bound,
    worst_case_instance,
)
from homcode.decoder import corrupt
from homcode.homs import affine_tables, enumerate_affine_homs, enumerate_homs


# ---------------------------------------------------------------- seeds


def test_trial_seed_is_stable_and_distinct():
    assert trial_seed(0, 0) == trial_seed(0, 0)
    assert len({trial_seed(7, i) for i in range(1000)}) == 1000
    assert trial_seed(0, 1) != trial_seed(1, 0)
    assert 0 <= trial_seed(123, 4) < 2**32


# ---------------------------------------------------------------- special families


def test_constant_values():
    # 2c(c+1)(4 + (c+1) log2 3), evaluated by hand
    assert float(special_intersecting_constant(2)) == pytest.approx(105.058650026, rel=1e-10)
    assert float(special_intersecting_constant(1)) == pytest.approx(28.6797000058, rel=1e-10)


@given(st.floats(1, 20), st.floats(1, 20))
def test_constant_is_monotone(a, b):
    lo, hi = sorted((a, b))
    assert special_intersecting_constant(lo) <= special_intersecting_constant(hi)


def test_constant_rejects_small_c():
    with pytest.raises(ValueError):
        special_intersecting_constant(0.5)


def test_disjoint_halves_satisfy_all_conditions():
    fam = SetFamily.of(8, [{0, 1, 2, 3}, {4, 5, 6, 7}])
    rep = check_special_family(fam, Fraction(1, 4), Fraction(1, 16), 2)
    assert rep.holds and rep.exhaustive
    assert rep.alpha_values == (Fraction(1, 4), Fraction(1, 4))


def test_small_set_fails_condition_one_with_witness():
    fam = SetFamily.of(8, [{0}, {1, 2, 3, 4}])
    rep = check_special_family(fam, Fraction(1, 4), Fraction(1, 16), 2)
    assert rep.conditions[0] is False and rep.witnesses[0] == 0


def test_overlapping_sets_fail_condition_two():
    fam = SetFamily.of(8, [{0, 1, 2, 3}, {0, 1, 2, 4}])
    rep = check_special_family(fam, Fraction(1, 4), Fraction(1, 16), 2)
    assert rep.conditions[1] is False and rep.witnesses[1] == (0, 1)


def test_sum_of_powers_fails_condition_three():
    sets = [range(6), range(6, 12), range(3, 9)]
    rep = check_special_family(SetFamily.of(12, sets), Fraction(0), Fraction(0), 1)
    assert rep.witnesses[2] == Fraction(3, 2)
    assert rep.conditions[2] is False


def test_condition_four_detects_unequal_intersections():
    # S0 & S1 = {0,1} but S0 & S1 & S2 = {0}
    fam = SetFamily.of(4, [{0, 1, 2}, {0, 1, 3}, {0, 2, 3}])
    rep = check_special_family(fam, Fraction(1, 2), Fraction(0), 2)
    assert rep.conditions[3] is False


def test_condition_four_samples_large_families_with_seed():
    fam = SetFamily.of(40, [{i, i + 20} for i in range(14)])
    rep = check_special_family(fam, Fraction(1, 20), Fraction(1, 400), 2, seed=9, samples=500)
    assert not rep.exhaustive and rep.sampling_seed == 9
    assert rep.holds


def test_set_family_rejects_out_of_range():
    with pytest.raises(ValueError):
        SetFamily.of(3, [{5}])


def test_inequality_on_disjoint_family():
    fam = SetFamily.of(8, [{0, 1, 2, 3}, {4, 5, 6, 7}])
    res = family_inequality(fam, Fraction(1, 4))
    assert res.holds
    assert res.alpha == Fraction(3, 4)


def test_inequality_refuses_non_special_family():
    with pytest.raises(NotSpecialError):
        family_inequality(SetFamily.of(8, [{0}, {1}]), Fraction(1, 4))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(1, 5), st.data())
def test_inequality_holds_for_disjoint_random_families(parts, rho_den, data):
    """Disjoint blocks that each exceed rho form a special family."""
    n = 24
    rho = Fraction(1, rho_den * 4)
    sizes = data.draw(st.lists(st.integers(math.ceil(rho * n), n), min_size=1, max_size=parts))
    if sum(sizes) > n:
        return
    sets, start = [], 0
    for s in sizes:
        sets.append(range(start, start + s))
        start += s
    fam = SetFamily.of(n, sets)
    rep = check_special_family(fam, rho, rho * rho, 2)
    if rep.holds:
        assert family_inequality(fam, rho).holds


# ---------------------------------------------------------------- equalizer families


def test_equalizer_families_are_special_and_divide():
    G, H = get_group("Z2^4"), get_group("Z4")
    chain = build_chain(H)
    rng = np.random.default_rng(3)
    phi = enumerate_affine_homs(G, H)[17]
    f = corrupt(phi, Fraction(3, 4), "uniform-random-values", rng)
    fams = equalizer_families(G, chain, f, 2, Fraction(1, 10))
    assert fams
    for fam in fams:
        rho = Fraction(1, 2)
        rep = check_special_family(fam.family, rho, rho * rho, 2)
        assert rep.holds
        assert family_inequality(fam.family, rho).holds
        ok, witness = equalizer_ratio_divides(G, fam, rho * rho)
        assert ok, witness


# ---------------------------------------------------------------- Johnson


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([("Z2^3", "Z2"), ("Z3^2", "Z3"), ("S3", "Z2"), ("Z2^2", "Z4")]), st.integers(0, 2**32 - 1))
def test_johnson_holds_on_random_words(pair, seed):
    G, H = get_group(pair[0]), get_group(pair[1])
    rng = np.random.default_rng(seed)
    w = rng.integers(H.order, size=G.order)
    cert = check_johnson(w, list(affine_tables(G, H)), q=H.order)
    assert cert.holds
    assert set(cert.used) | set(cert.dropped_low_agreement) | set(cert.dropped_pairwise) == set(range(len(affine_tables(G, H))))


def test_johnson_drops_inputs_violating_hypotheses():
    G, H = get_group("Z2^2"), get_group("Z2")
    tables = affine_tables(G, H)
    cert = check_johnson(tables[0], [tables[0], tables[0]], q=2)
    assert cert.used == (0,) and cert.dropped_pairwise == (1,)
    assert cert.sum_of_squares == Fraction(1, 4)


def test_johnson_needs_q_for_bare_tables():
    with pytest.raises(ValueError):
        check_johnson(np.zeros(4, dtype=int), [])


# ---------------------------------------------------------------- repetition


@pytest.mark.parametrize("r, s", [(1, 2), (2, 3), (2, 5)])
@pytest.mark.parametrize("a", [Fraction(0), Fraction(1, 2), Fraction(3, 4), Fraction(1)])
def test_repetition_transfer_on_affine_code(r, s, a):
    code = ahom_strings(get_group("Z2"), get_group("Z2"))
    rep = repetition_transfer_check(code, r, s, a, alphabet=2)
    assert rep.holds, rep.violation
    assert rep.a_transferred == Fraction(s // r) * Fraction(r, s) * a


def test_repetition_transfer_on_random_code():
    rng = np.random.default_rng(0)
    code = rng.integers(3, size=(5, 3))
    rep = repetition_transfer_check(code, 1, 3, Fraction(2, 3), alphabet=3, exact_s_limit=9)
    assert rep.holds and rep.exhaustive and rep.list_s_exact


def test_repetition_requires_s_above_r():
    with pytest.raises(ValueError):
        repetition_transfer_check([(0, 1)], 2, 2, Fraction(1, 2))


# ---------------------------------------------------------------- worst case


@pytest.mark.parametrize("p, n, m, count", [(2, 2, 1, 3), (2, 2, 2, 9), (2, 3, 2, 21), (3, 1, 1, 2), (3, 2, 1, 8)])
def test_worst_case_counts(p, n, m, count):
    wc = worst_case_instance(p, n, m)
    assert wc.expected_count == count
    assert len(wc.family) == count
    assert count_homs_at_agreement(wc.G, wc.H, wc.word, Fraction(1, p)) == count
    for phi in wc.family:
        assert phi.is_homomorphism()


def test_worst_case_rejects_composite():
    with pytest.raises(ValueError):
        worst_case_instance(4, 1, 1)


# ---------------------------------------------------------------- list-size sweeps


def test_list_bound_report_shapes():
    rep = verify_list_bound(get_group("Z2^3"), get_group("Z2"), 0.2, 12, master_seed=4)
    assert rep.bound_ok and rep.sanity_ok
    assert len(rep.rows) == 12
    lines = rep.to_csv().splitlines()
    assert tuple(lines[0].split(",")) == LIST_BOUND_COLUMNS
    assert len(lines) == 13
    assert '"schema": "homcode.list-bound/1"' in rep.to_json()
    assert rep.lam == "1/2"


def test_list_bound_is_reproducible():
    a = verify_list_bound(get_group("S3"), get_group("Z6"), 0.1, 8, master_seed=2)
    b = verify_list_bound(get_group("S3"), get_group("Z6"), 0.1, 8, master_seed=2)
    assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()


def test_list_bound_finite_q_reported_on_repetition_route():
    rep = verify_list_bound(get_group("Z3"), get_group("Z6"), 0.2, 4)
    assert rep.finite_q_bound_log10 is None  # p equals the smallest prime of |G|
    rep = verify_list_bound(get_group("S3"), get_group("Z3"), 0.2, 4)
    assert rep.lam == "0"


def test_list_size_decreases_with_agreement():
    G, H = get_group("Z2^3"), get_group("Z4")
    tables = affine_tables(G, H)
    rng = np.random.default_rng(1)
    w = rng.integers(H.order, size=G.order)
    counts = (tables == w[None, :]).sum(axis=1)
    sizes = [int((counts >= k).sum()) for k in range(G.order + 1)]
    assert sizes == sorted(sizes, reverse=True)


def test_mpmath_precision_is_restored():
    before = mpmath.mp.dps
    family_inequality(SetFamily.of(8, [{0, 1, 2, 3}]), Fraction(1, 4))
    assert mpmath.mp.dps == before
