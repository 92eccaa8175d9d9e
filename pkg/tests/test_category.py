from __future__ import annotations

from fractions import Fraction

import pytest

from malle_random.category import (FiniteLocalObject, LocalDatum, e2m_membership,
                                   epi_count_finite, epi_product_exists, epi_product_oracle,
                                   moment_closed_form, morphism_product)
from malle_random.errors import GroupTooLargeError, ValidationError
from malle_random.groups import parse_group


def obj(spec, data):
    G = parse_group(spec)
    d = {k: LocalDatum(tuple(G.idx(x) for x in g), tuple(G.idx(x) for x in i))
         for k, (g, i) in data.items()}
    return FiniteLocalObject(G, tuple(d), d)


def test_closed_form_values():
    C3 = obj("C3", {2: (["(1 2 3)", "()"], ["()"]), 3: (["()", "()"], ["()"]),
                    5: (["()", "()"], ["()"])})
    # |G^ab[2]| = 1 for C3 and |S u P_inf| = 4
    assert moment_closed_form(C3) == Fraction(1, 27)
    C2 = obj("C2", {3: (["(1 2)", "()"], ["()"])})
    assert moment_closed_form(C2) == Fraction(1, 2) * Fraction(1, 2)


def test_epi_count_identity_object():
    A = obj("C2", {3: (["(1 2)", "()"], ["()"])})
    assert epi_count_finite(A, A) == 1
    S3 = obj("S3", {7: (["(1 2)", "(1 2 3)"], ["(1 2 3)"])})
    C2 = obj("C2", {7: (["(1 2)", "()"], ["()"])})
    assert epi_count_finite(S3, C2) == 1
    # the sign map sends (1 2) to the nontrivial element, so this target is unmatched
    C2b = obj("C2", {7: (["()", "()"], ["()"])})
    assert epi_count_finite(S3, C2b) == 0


def test_epi_count_bound():
    A = obj("S5", {7: (["(1 2 3 4 5)", "(1 2)"], ["(1 2)"])})
    with pytest.raises(GroupTooLargeError):
        epi_count_finite(A, A)


def test_trivial_factor_has_product():
    A = obj("C2", {3: (["(1 2)"], ["()"])})
    T = obj("C1", {3: (["()"], ["()"])})
    rep = epi_product_exists(A, T)
    assert rep.exists and epi_product_oracle(A, T)


def test_diagonal_blocks_product():
    A = obj("C2", {3: (["(1 2)"], ["()"])})
    rep = epi_product_exists(A, A)
    assert not rep.exists and not rep.generated and rep.d_order == 2
    assert not epi_product_oracle(A, A)
    e = e2m_membership(A, A)
    assert not e.member and e.inclusion_failure and not e.projection_failure
    assert "neither factor inclusion" in e.diagnosis()


def test_generated_product():
    A = obj("C2", {3: (["(1 2)", "()"], ["()"])})
    B = obj("C3", {3: (["()", "(1 2 3)"], ["(1 2 3)"])})
    rep = epi_product_exists(A, B)
    assert rep.exists and rep.generated and rep.product_order == 6
    assert e2m_membership(A, B).member


def test_product_without_generation():
    # D is the graph of inversion in C3 x C3: a proper subdirect subgroup
    A = obj("C3", {3: (["(1 2 3)"], ["()"])})
    B = obj("C3", {3: (["(1 3 2)"], ["()"])})
    assert not epi_product_exists(A, B).exists
    assert not epi_product_oracle(A, B)


def test_morphism_product_shapes():
    A = obj("C2", {3: (["(1 2)"], ["()"])})
    B = obj("C2", {3: (["(1 2)", "()"], ["()"])})
    with pytest.raises(ValidationError):
        morphism_product(A, B)
    C = obj("C2", {5: (["(1 2)"], ["()"])})
    with pytest.raises(ValidationError):
        epi_product_exists(A, C)


def test_json_round_trip():
    A = obj("S3", {7: (["(1 2)", "(1 2 3)"], ["(1 2 3)"])})
    B = FiniteLocalObject.from_json(A.to_json())
    assert B.to_json() == A.to_json()


def test_object_validation():
    G = parse_group("C2")
    with pytest.raises(ValidationError):
        FiniteLocalObject(G, (3,), {5: LocalDatum((1,), (0,))})
    with pytest.raises(ValidationError):
        FiniteLocalObject(G, (3,), {3: LocalDatum((7,), (0,))})
