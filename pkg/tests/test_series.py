from __future__ import annotations

import math
from fractions import Fraction

import pytest

from malle_random.errors import MissingDataError, ValidationError
from malle_random.groups import parse_group
from malle_random.local import LocalConditions, Place
from malle_random.oracles import odd_squarefree_count
from malle_random.series import (RATIONALS, BaseField, build_profile, decay_probe,
                                 dirichlet_coeffs, fraction_sieve, oracle_coeffs, partial_sum,
                                 prediction, tauberian_table)

UNRAM_2 = LocalConditions(overrides={2: "unramified"})


@pytest.mark.parametrize("spec,w", [("C2", "ind"), ("C2", "ramified-primes"), ("C3", "ind"),
                                    ("C3", "ramified-primes")])
def test_sieve_matches_oracle_small(spec, w):
    G = parse_group(spec)
    assert dirichlet_coeffs(G, w, 400).fractions() == oracle_coeffs(G, w, 400)


def test_sieve_matches_oracle_with_override():
    G = parse_group("C2")
    sigma = LocalConditions(overrides={3: "ramified", 5: (0, 2)})
    assert dirichlet_coeffs(G, "ind", 300, sigma).fractions() == oracle_coeffs(G, "ind", 300, sigma)


def test_known_coefficients():
    C3 = dirichlet_coeffs(parse_group("C3"), "ind", 100)
    # 7 is 1 mod 3: all 9 pairs are homs, 6 ramified with exponent 2 -> a_49 = 6/3
    assert C3[49] == 2
    assert C3[2] == 0 and C3[1] == 1
    C2 = dirichlet_coeffs(parse_group("C2"), "ind", 100)
    assert C2[3] == 1 and C2[15] == 1 and C2[9] == 0


def test_c2_unramified_at_2_is_odd_squarefree():
    G = parse_group("C2")
    prof = build_profile(G, "ind", 5000, UNRAM_2)
    for X in (10, 100, 1234, 5000):
        assert partial_sum(prof, X) == odd_squarefree_count(X)


@pytest.mark.parametrize("w,sigma,expected", [
    ("ind", LocalConditions(), 6 / math.pi ** 2),
    ("ramified-primes", LocalConditions(), 10 / math.pi ** 2),
    ("ind", UNRAM_2, 4 / math.pi ** 2),
])
def test_c2_constants(w, sigma, expected):
    pred = prediction(parse_group("C2"), w, sigma, pmax=10**6)
    assert pred.tail_rigorous
    assert abs(pred.c / expected - 1) <= pred.tail_bound + 1e-12
    assert (pred.a, pred.b) == (1, 1)


def test_unit_rank_divides_by_order():
    G = parse_group("C2")
    base = BaseField(unit_rank=1)
    c0 = prediction(G, "ind", pmax=10**5).c
    c1 = prediction(G, "ind", base=base, pmax=10**5).c
    assert c1 == pytest.approx(c0 / G.order, rel=1e-12)


def test_archimedean_forms_reported():
    pred = prediction(parse_group("C2"), "ind", LocalConditions(archimedean="split"), pmax=10**4)
    assert pred.arch_product == 1 and pred.arch_hom_product == 2
    assert not pred.forms_agree


def test_tauberian_trend():
    G = parse_group("C2")
    prof = build_profile(G, "ind", 10**5, UNRAM_2)
    rows = tauberian_table(prof, [10**3, 10**4, 10**5], prediction(G, "ind", UNRAM_2))
    errs = [abs(r.ratio - 1) for r in rows]
    assert errs == sorted(errs, reverse=True)


def test_decay_probe_property():
    rows = decay_probe(parse_group("C2"), "ind", LocalConditions(default="split"), [100, 1000])
    for r in rows:
        assert r.normalized < 1 / r.X


def test_decay_probe_rejects_admissible():
    with pytest.raises(ValidationError):
        decay_probe(parse_group("C2"), "ind", LocalConditions(), [100])


def test_non_admissible_series_rejected():
    with pytest.raises(ValidationError):
        dirichlet_coeffs(parse_group("C2"), "ind", 100, LocalConditions(default="split"))


def test_s3_needs_wild_tables():
    with pytest.raises(MissingDataError):
        dirichlet_coeffs(parse_group("S3"), "ind", 50)


def test_fraction_sieve_against_brute():
    # two places with factors 1 + t/2 at p=3 and 1 + t^2/3 at p=5
    facs = [(3, {0: Fraction(1), 1: Fraction(1, 2)}), (5, {0: Fraction(1), 2: Fraction(1, 3)})]
    out = fraction_sieve(facs, 200)
    expect = [Fraction(0)] * 201
    for e3 in range(2):
        for e5 in (0, 2):
            n = 3 ** e3 * 5 ** e5
            if n <= 200:
                expect[n] = facs[0][1][e3] * facs[1][1][e5]
    assert out == expect


def test_place_stream_base_field():
    # a base field given by an explicit place stream equal to the rational primes
    places = tuple(Place.finite(p) for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31))
    base = BaseField(name="Q-stream", places=places)
    G = parse_group("C3")
    X = 31 ** 2
    assert dirichlet_coeffs(G, "ind", X, base=base).fractions() == \
        dirichlet_coeffs(G, "ind", X, base=RATIONALS).fractions()
