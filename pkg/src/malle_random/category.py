"""Finite groups with finite local data: morphisms, epimorphism counts,
closed-form moments, epi-products and E(2, M) membership."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import GroupTooLargeError, ValidationError
from .groups import (FiniteGroup, ab_torsion_order, direct_product, homomorphisms,
                     parse_group, product_element, quotient)
from .local import LocalHomSet, WildTable, local_hom_set, place_of
from .series import RATIONALS, BaseField

EPI_BRUTE_BOUND = 64


@dataclass(frozen=True)
class LocalDatum:
    """Images of one place's decomposition-group generators, and of its inertia."""

    gens: tuple[int, ...]
    inertia: tuple[int, ...]


def datum_from_row(hs: LocalHomSet, row: int) -> LocalDatum:
    h = hs[row]
    if hs.place.is_archimedean:
        # the decomposition group at a real place is its own inertia
        return LocalDatum(h.gens, h.gens)
    if h.source == "wild" and hs.frobenius_generator is not None:
        inert = tuple(g for i, g in enumerate(h.gens) if i != hs.frobenius_generator)
        return LocalDatum(h.gens, inert)
    return LocalDatum(h.gens, (h.inertia,))


@dataclass(frozen=True)
class FiniteLocalObject:
    """(G, S, phi): a group, a finite set of places and local data at each."""

    group: FiniteGroup
    places: tuple[int | str, ...]
    data: Mapping[int | str, LocalDatum]

    def __post_init__(self):
        if len(set(self.places)) != len(self.places):
            raise ValidationError("place set S has duplicates")
        if set(self.data) != set(self.places):
            raise ValidationError("local data must be given at exactly the places of S")
        for d in self.data.values():
            if any(not 0 <= g < self.group.order for g in d.gens + d.inertia):
                raise ValidationError("local datum does not target the group")

    @classmethod
    def from_rows(cls, G: FiniteGroup, rows: Mapping[int | str, int], m: int = 2,
                  wild_tables: Iterable[WildTable] = ()) -> "FiniteLocalObject":
        data = {}
        for k, r in rows.items():
            v = place_of(k)
            hs = local_hom_set(G, v, m=m, wild_tables=wild_tables)
            if not 0 <= r < len(hs):
                raise ValidationError(f"row {r} outside Hom(G_{v.label}, {G.name})")
            data[v.key] = datum_from_row(hs, r)
        return cls(G, tuple(data), data)

    @classmethod
    def from_images(cls, G: FiniteGroup, images: Mapping[int | str, tuple]) -> "FiniteLocalObject":
        """``images[p] = (gens, inertia)`` given as element indices or cycle strings."""
        def conv(x):
            return x if isinstance(x, int) else G.idx(x)

        data = {}
        for k, (gens, inert) in images.items():
            data[place_of(k).key] = LocalDatum(tuple(conv(g) for g in gens),
                                               tuple(conv(g) for g in inert))
        return cls(G, tuple(data), data)

    def image_generators(self) -> list[int]:
        return [g for k in self.places for g in self.data[k].gens]

    def to_json(self) -> dict:
        G = self.group
        return {"group": G.name, "places": [str(k) for k in self.places],
                "data": {str(k): {"gens": [G.label(g) for g in d.gens],
                                  "inertia": [G.label(g) for g in d.inertia]}
                         for k, d in self.data.items()}}

    @classmethod
    def from_json(cls, obj: Mapping) -> "FiniteLocalObject":
        G = parse_group(obj["group"])
        return cls.from_images(G, {k: (d["gens"], d["inertia"]) for k, d in obj["data"].items()})


def moment_closed_form(obj: FiniteLocalObject, base: BaseField = RATIONALS) -> Fraction:
    """|G^ab[m]|^-1 |G|^(-|S u P_inf| + 1)."""
    G = obj.group
    finite = [k for k in obj.places if not isinstance(k, str)]
    n = len(finite) + len(base.archimedean)
    return Fraction(1, ab_torsion_order(G, base.m)) * Fraction(G.order) ** (1 - n)


def _maps_ok(pi, src: FiniteLocalObject, tgt: FiniteLocalObject) -> bool:
    for k in src.places:
        d = src.data[k]
        if k in tgt.data:
            if tuple(pi[g] for g in d.gens) != tgt.data[k].gens:
                return False
        elif any(pi[g] != 0 for g in d.inertia):
            return False
    return True


def epi_count_finite(source: FiniteLocalObject, target: FiniteLocalObject,
                     bound: int = EPI_BRUTE_BOUND) -> int:
    """Surjections pi with S' in S, pi phi_p = psi_p on S', and pi phi_p(I_p) = 1 off S'."""
    if source.group.order > bound:
        raise GroupTooLargeError(f"source order {source.group.order} exceeds {bound}")
    if not set(target.places) <= set(source.places):
        return 0
    homs = homomorphisms(source.group, target.group, surjective=True)
    return sum(1 for pi in homs if _maps_ok(pi, source, target))


def morphism_product(A: FiniteLocalObject, B: FiniteLocalObject
                     ) -> tuple[FiniteGroup, FiniteLocalObject]:
    """(G1 x G2, S, phi1 x phi2) for objects with a shared S."""
    if set(A.places) != set(B.places):
        raise ValidationError("objects must share the place set S")
    P = direct_product(A.group, B.group)
    data = {}
    for k in A.places:
        da, db = A.data[k], B.data[k]
        if len(da.gens) != len(db.gens):
            raise ValidationError(f"local data at {k} have different shapes")
        gens = tuple(product_element(A.group, B.group, P, x, y) for x, y in zip(da.gens, db.gens))
        inert = tuple(product_element(A.group, B.group, P, x, y)
                      for x, y in zip(da.inertia, db.inertia))
        data[k] = LocalDatum(gens, inert)
    return P, FiniteLocalObject(P, tuple(A.places), data)


@dataclass(frozen=True)
class EpiProductReport:
    exists: bool
    generated: bool  # D is all of G1 x G2
    d_order: int
    product_order: int
    obstruction: str = ""

    def to_json(self) -> dict:
        return {"exists": self.exists, "generated": self.generated, "D_order": self.d_order,
                "product_order": self.product_order, "obstruction": self.obstruction}


def _pairs(A: FiniteLocalObject, B: FiniteLocalObject) -> list[tuple[int, int]]:
    if set(A.places) != set(B.places):
        raise ValidationError("objects must share the place set S")
    out = []
    for k in A.places:
        out.extend(zip(A.data[k].gens, B.data[k].gens))
    return out


def generated_subgroup(A: FiniteLocalObject, B: FiniteLocalObject) -> tuple[FiniteGroup, frozenset[int]]:
    P, obj = morphism_product(A, B)
    return P, P.generate(obj.image_generators())


def epi_product_exists(A: FiniteLocalObject, B: FiniteLocalObject) -> EpiProductReport:
    """Decide whether A and B have an epi-product.

    A test object mapping onto both factors has image a subdirect subgroup of
    G1 x G2 containing D.  So the product exists exactly when no proper
    subdirect subgroup contains D.  By Goursat such a subgroup projects onto a
    common nontrivial quotient, which can be taken simple: we look for a
    maximal normal N1 of G1 and a surjection beta: G2 -> G1/N1 with
    d1 N1 = beta(d2) for every generating pair (d1, d2).
    """
    G1, G2 = A.group, B.group
    pairs = _pairs(A, B)
    P, D = generated_subgroup(A, B)
    generated = len(D) == P.order
    if generated or G1.order == 1 or G2.order == 1:
        return EpiProductReport(True, generated, len(D), P.order)
    normals = G1.normal_subgroups()
    maximal = [N for N in normals if len(N) < G1.order
               and not any(N < M and len(M) < G1.order for M in normals)]
    for N in maximal:
        Q, proj = quotient(G1, N)
        fixed = {}
        for d1, d2 in pairs:
            if fixed.get(d2, proj[d1]) != proj[d1]:
                break
            fixed[d2] = proj[d1]
        else:
            if homomorphisms(G2, Q, fixed=fixed, surjective=True):
                return EpiProductReport(False, generated, len(D), P.order,
                                        f"common quotient of order {Q.order} through which D factors")
    return EpiProductReport(True, generated, len(D), P.order)


def epi_product_oracle(A: FiniteLocalObject, B: FiniteLocalObject,
                       memo: dict | None = None) -> bool:
    """Brute force over the overgroups of D: is there a proper subdirect one?

    Having a proper subdirect overgroup is inherited downwards, so once a
    proper overgroup <J, x> is known to have none, every element of it can be
    skipped at J.  ``memo`` may be shared between calls on the same two groups.
    """
    P, D = generated_subgroup(A, B)
    G1, G2 = A.group, B.group
    n1 = G1.degree
    memo = {} if memo is None else memo

    def subdirect(J):
        p1 = {G1.index[P.elements[x][:n1]] for x in J}
        p2 = {G2.index[tuple(y - n1 for y in P.elements[x][n1:])] for x in J}
        return len(p1) == G1.order and len(p2) == G2.order

    def below_proper_subdirect(J) -> bool:
        if J in memo:
            return memo[J]
        if len(J) == P.order:
            res = False
        elif subdirect(J):
            res = True
        else:
            res = False
            covered = set(J)
            for x in range(P.order):
                if x in covered:
                    continue
                K = P.generate(set(J) | {x})
                if len(K) == P.order:
                    continue
                if below_proper_subdirect(K):
                    res = True
                    break
                covered |= K
        memo[J] = res
        return res

    return not below_proper_subdirect(D)


@dataclass(frozen=True)
class E2MReport:
    member: bool
    epi_product: EpiProductReport
    moment_product: Fraction
    moment_factors: tuple[Fraction, Fraction]
    multiplicative: bool
    projection_failure: bool  # some projection of D is not onto
    inclusion_failure: bool  # neither G1 x 1 nor 1 x G2 lies in D

    def diagnosis(self) -> str:
        if self.member:
            return "in E(2,M)"
        parts = []
        if self.projection_failure:
            parts.append("(a) a projection of D is not surjective")
        if self.inclusion_failure:
            parts.append("(b) neither factor inclusion lands in D")
        if not self.multiplicative:
            parts.append("moments are not multiplicative")
        return "; ".join(parts) or "no epi-product"

    def to_json(self) -> dict:
        return {"member": self.member, "epi_product": self.epi_product.to_json(),
                "moment_product": str(self.moment_product),
                "moment_factors": [str(x) for x in self.moment_factors],
                "multiplicative": self.multiplicative,
                "projection_failure": self.projection_failure,
                "inclusion_failure": self.inclusion_failure, "diagnosis": self.diagnosis()}


def e2m_membership(A: FiniteLocalObject, B: FiniteLocalObject,
                   base: BaseField = RATIONALS) -> E2MReport:
    epi = epi_product_exists(A, B)
    P, prod = morphism_product(A, B)
    D = P.generate(prod.image_generators())
    mp = moment_closed_form(prod, base)
    ma, mb = moment_closed_form(A, base), moment_closed_form(B, base)
    mult = mp == ma * mb
    G1, G2 = A.group, B.group
    n1 = G1.degree
    p1 = {G1.index[P.elements[x][:n1]] for x in D}
    p2 = {G2.index[tuple(y - n1 for y in P.elements[x][n1:])] for x in D}
    proj_fail = len(p1) < G1.order or len(p2) < G2.order
    inc1 = all(product_element(G1, G2, P, g, 0) in D for g in G1.gen_idx)
    inc2 = all(product_element(G1, G2, P, 0, g) in D for g in G2.gen_idx)
    return E2MReport(epi.exists and mult, epi, mp, (ma, mb), mult, proj_fail,
                     not inc1 and not inc2)
