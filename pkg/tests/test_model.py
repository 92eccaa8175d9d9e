from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from malle_random.category import moment_closed_form
from malle_random.errors import CapExceededError, ValidationError
from malle_random.groups import parse_group
from malle_random.local import LocalConditions, Place
from malle_random.model import (abelian_to_generic, build_profile, count_surjections,
                                count_surjections_multi, enumerated_survival,
                                exact_expected_count, exact_survival, gap_report,
                                grunwald_diagnostic, moment_experiment, rng_for, sample_group,
                                select_places, surjective_target)


def test_select_places():
    assert [v.label for v in select_places("norm<=7")] == ["inf", "2", "3", "5", "7"]
    assert [v.label for v in select_places("5,inf,3")] == ["inf", "3", "5"]
    assert [v.label for v in select_places([3, 3])] == ["inf", "3"]


def test_seed_required():
    with pytest.raises(ValidationError):
        rng_for(None)


def test_streams_are_deterministic_and_distinct():
    a = rng_for(5, 1).integers(0, 10**9, 4)
    assert np.array_equal(a, rng_for(5, 1).integers(0, 10**9, 4))
    assert not np.array_equal(a, rng_for(5, 2).integers(0, 10**9, 4))


def test_frame_cap():
    with pytest.raises(CapExceededError):
        build_profile(parse_group("S4"), "inf,5,7,11", engine="generic", frame_cap=100)


@pytest.mark.parametrize("spec,S", [("C2", "inf,3,5"), ("C3", "inf,2,3,5,7"), ("V4", "inf,3,5")])
def test_engines_agree_on_expectations(spec, S):
    G = parse_group(spec)
    gen = build_profile(G, S, engine="generic", w="ramified-primes")
    ab = build_profile(G, S, engine="abelian", w="ramified-primes")
    for X in (1, 3, 15, 10**9):
        for mode in ("no-torsion", "structural"):
            assert exact_expected_count(gen, X, mode) == exact_expected_count(ab, X, mode)


@pytest.mark.parametrize("spec,S", [("C2", "inf,3,5"), ("C3", "inf,2,3,5"), ("V4", "inf,3,5")])
def test_engines_agree_per_sample(spec, S):
    G = parse_group(spec)
    gen = build_profile(G, S, engine="generic", w="ramified-primes")
    ab = build_profile(G, S, engine="abelian", w="ramified-primes")
    for i in range(30):
        b = sample_group(ab, "structural", 11, i)
        g = abelian_to_generic(b, ab, gen)
        Xs = [1, 5, 10**6]
        assert count_surjections_multi(b, ab, Xs, False) == count_surjections_multi(g, gen, Xs, False)


def test_exact_vs_enumerated_survival():
    P = build_profile(parse_group("C2"), "inf,3,5", engine="generic")
    sv, en = exact_survival(P), enumerated_survival(P)
    assert en is not None
    assert np.array_equal(sv.plain_size, en.plain_size)
    assert np.array_equal(sv.torsion_size, en.torsion_size)


def test_structural_equals_no_torsion_for_c3():
    P = build_profile(parse_group("C3"), "inf,2,3,5", engine="generic")
    for X in (10, 10**6):
        assert exact_expected_count(P, X, "structural") == exact_expected_count(P, X, "no-torsion")


def test_stable_part_is_s_independent():
    G = parse_group("C3")
    small = build_profile(G, "norm<=30", engine="abelian")
    big = build_profile(G, "norm<=60", engine="abelian")
    for X in (10, 30):
        a, b = exact_expected_count(small, X), exact_expected_count(big, X)
        assert a.stable == b.stable
        # the remainder is a Moebius sum over the free places, of size 3^-(#free places)
        assert abs(a.total - b.total) <= Fraction(1, 3 ** 10)


def test_sample_determinism():
    P = build_profile(parse_group("C3"), "inf,2,3,5", engine="generic")
    a = sample_group(P, "structural", 3, 7)
    b = sample_group(P, "structural", 3, 7)
    assert np.array_equal(a.plain, b.plain) and np.array_equal(a.r0, b.r0)
    assert count_surjections(a, P, 6) == count_surjections(b, P, 6)


def test_moment_experiment_c3():
    P = build_profile(parse_group("C3"), "inf,2,3,5", engine="generic")
    target = surjective_target(P)
    rep = moment_experiment(P, target, 20000, seed=5)
    s = rep.summary
    assert s["exact"] == "1/27" and s["closed_form"] == "1/27"
    assert abs(s["z_closed"]) < 4
    again = moment_experiment(P, target, 20000, seed=5, workers=3)
    assert again.summary == s


def test_target_on_smaller_s_keeps_moment():
    G = parse_group("C3")
    big = build_profile(G, "inf,2,3,5,7", engine="generic")
    small = build_profile(G, "inf,2,3,5", engine="generic")
    target = surjective_target(small)
    rep = moment_experiment(big, target, 10, seed=1)
    assert Fraction(rep.summary["exact"]) == moment_closed_form(target) == Fraction(1, 27)


def test_gap_report_c2_and_s3():
    rep = gap_report(build_profile(parse_group("C2"), "inf,3", engine="generic"))
    assert rep.summary["consistent"] and rep.summary["enumerated"]
    s3 = build_profile(parse_group("S3"), "inf,7", engine="generic", enum_cap=10**5)
    rep = gap_report(s3)
    assert rep.summary["consistent"] and rep.summary["enumerated"]
    for r in rep.rows:
        assert 0 <= Fraction(r["structural"]) <= 1


def test_grunwald():
    P = build_profile(parse_group("C2"), "inf,3,5", engine="generic")
    rep = grunwald_diagnostic(P, 50, seed=2, sub_places=[3, 5])
    assert rep.summary["tuples"] == 16
    assert all(0 <= r["frequency"] <= 1 for r in rep.rows)
    # the trivial tuple always survives
    triv = [r for r in rep.rows if all(g == "()" for gs in r["tuple"].values() for g in gs)]
    assert triv[0]["frequency"] == 1.0


def test_conditions_must_be_supported():
    G = parse_group("C2")
    P = build_profile(G, "inf,3", LocalConditions(overrides={5: "ramified"}), engine="generic")
    b = sample_group(P, "no-torsion", 1, 0)
    with pytest.raises(ValidationError, match="enlarge S"):
        count_surjections(b, P, 100)


def test_place_objects_accepted():
    P = build_profile(parse_group("C2"), (Place.real(), Place.finite(3)), engine="generic")
    assert P.nphi == 8
