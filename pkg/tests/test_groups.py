from __future__ import annotations

import pytest

from malle_random.errors import GroupTooLargeError, ValidationError
from malle_random.groups import (NO_QUALIFYING_SUBGROUP, CyclotomicAction, ab_torsion_order,
                                 beta_invariant, direct_product, homomorphisms, index_weight,
                                 k_classes, make_weight, malle_ab, min_weight_gen_check,
                                 parse_group, quotient, ramified_primes_weight, validate_weight)
from malle_random.oracles import malle_ab_oracle


@pytest.mark.parametrize("spec,order", [
    ("S3", 6), ("S4", 24), ("A4", 12), ("C5", 5), ("D4", 8), ("Q8", 8), ("V4", 4),
    ("C2xC2", 4), ("C2xC3", 6), ("C2wrC2", 8), ("S3@6", 6), ("gens(4): (1 2 3 4), (1 3)", 8),
])
def test_parse_orders(spec, order):
    assert parse_group(spec).order == order


@pytest.mark.parametrize("bad", ["Z9", "S3@5", "D2", "gens(3): (1 4)", "", "C0"])
def test_parse_rejects(bad):
    with pytest.raises(ValidationError):
        parse_group(bad)


def test_order_bound():
    from malle_random.groups import FiniteGroup
    S7 = parse_group("S7")
    with pytest.raises(GroupTooLargeError):
        FiniteGroup(7, S7.gens, max_order=1000)


def test_identity_first_and_table():
    G = parse_group("S3")
    assert G.elements[0] == (0, 1, 2)
    for a in range(G.order):
        assert G.mul(a, G.inverse[a]) == 0


def test_conjugacy_classes_s4():
    sizes = sorted(len(c) for c in parse_group("S4").conjugacy_classes)
    assert sizes == [1, 3, 6, 6, 8]


def test_k_classes_rational_vs_trivial_action():
    C5 = parse_group("C5")
    assert len(k_classes(C5)) == 2
    assert len(k_classes(C5, CyclotomicAction.trivial(5))) == 5


@pytest.mark.parametrize("spec,weight,a,b", [
    ("S3", "ind", 1, 1), ("C3", "ind", 2, 1), ("S4", "ind", 1, 1), ("S5", "ind", 1, 1),
    ("C5", "ind", 4, 1), ("V4", "ramified-primes", 1, 3), ("D4", "ind", 1, 1),
])
def test_malle_ab_matches_oracle(spec, weight, a, b):
    G = parse_group(spec)
    inv = malle_ab(G, None, make_weight(G, weight))
    assert (inv.a, inv.b) == (a, b)
    assert malle_ab_oracle(G, "ind" if weight == "ind" else "one") == (a, b)


def test_weight_validation():
    G = parse_group("C3")
    w = ramified_primes_weight(G)
    assert validate_weight(G, None, w).ok
    from malle_random.groups import WeightFunction
    bad = WeightFunction("bad", (0, 1, 2))
    rep = validate_weight(G, None, bad)
    assert not rep.ok and rep.pair is not None
    with pytest.raises(ValidationError):
        malle_ab(G, None, bad)


def test_index_weight_needs_transitive():
    G = parse_group("gens(4): (1 2)")
    with pytest.raises(ValidationError):
        index_weight(G)


def test_min_weight_generation():
    assert min_weight_gen_check(parse_group("S3"), index_weight(parse_group("S3")))
    # in C2 x C2 (regular action) every nonidentity element has index 2
    G = parse_group("V4")
    assert min_weight_gen_check(G, index_weight(G))


def test_beta():
    S3 = parse_group("S3")
    assert beta_invariant(S3, None, index_weight(S3)) is NO_QUALIFYING_SUBGROUP
    V4 = parse_group("V4")
    assert beta_invariant(V4, None, ramified_primes_weight(V4)) == 2


def test_abelian_torsion():
    assert ab_torsion_order(parse_group("S3"), 2) == 2
    assert ab_torsion_order(parse_group("C3"), 2) == 1
    assert ab_torsion_order(parse_group("V4"), 2) == 4
    assert ab_torsion_order(parse_group("A4"), 2) == 1


def test_homomorphisms_counts():
    S3, C2 = parse_group("S3"), parse_group("C2")
    assert len(homomorphisms(S3, C2)) == 2
    assert len(homomorphisms(C2, S3)) == 4
    assert len(homomorphisms(S3, C2, surjective=True)) == 1


def test_quotient_and_product():
    D4 = parse_group("D4")
    Z = [g for g in range(D4.order) if all(D4.mul(g, h) == D4.mul(h, g) for h in range(D4.order))]
    Q, proj = quotient(D4, Z)
    assert Q.order == 4 and Q.is_abelian
    assert all(proj[D4.mul(a, b)] == Q.mul(proj[a], proj[b]) for a in range(8) for b in range(8))
    P = direct_product(parse_group("C2"), parse_group("C3"))
    assert P.order == 6 and P.is_abelian
