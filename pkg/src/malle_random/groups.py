"""Finite permutation groups and the weight data attached to them.

Elements are stored as tuples ``p`` with ``p[i]`` the image of point ``i``
(0-based).  Products compose right to left: ``mul(a, b)`` applies ``b`` first.
Most methods work with element *indices* into ``FiniteGroup.elements``; the
identity always has index 0.
"""

from __future__ import annotations

import itertools
import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import GroupTooLargeError, ValidationError

log = logging.getLogger(__name__)

Perm = tuple[int, ...]

DEFAULT_ORDER_BOUND = 10**5
TABLE_BOUND = 4096
NORMAL_BOUND = 2000
SUBGROUP_BOUND = 512


# permutation helpers

def perm_mul(a: Perm, b: Perm) -> Perm:
    return tuple(a[i] for i in b)


def perm_inv(a: Perm) -> Perm:
    out = [0] * len(a)
    for i, j in enumerate(a):
        out[j] = i
    return tuple(out)


def perm_cycles(p: Perm) -> list[tuple[int, ...]]:
    seen = [False] * len(p)
    cycles = []
    for start in range(len(p)):
        if seen[start]:
            continue
        cyc = []
        i = start
        while not seen[i]:
            seen[i] = True
            cyc.append(i)
            i = p[i]
        cycles.append(tuple(cyc))
    return cycles


def perm_order(p: Perm) -> int:
    return reduce(math.lcm, (len(c) for c in perm_cycles(p)), 1)


def parse_cycles(text: str, degree: int) -> Perm:
    """Parse 1-based cycle notation such as ``(1 2 3)(4 5)``; ``()`` is the identity."""
    text = text.strip()
    if not re.fullmatch(r"(\(\s*[\d\s,]*\))+", text):
        raise ValidationError(f"bad cycle notation: {text!r}")
    img = list(range(degree))
    for body in re.findall(r"\(([^)]*)\)", text):
        pts = [int(t) - 1 for t in re.split(r"[\s,]+", body.strip()) if t]
        if len(set(pts)) != len(pts):
            raise ValidationError(f"repeated point in cycle ({body})")
        if any(not 0 <= x < degree for x in pts):
            raise ValidationError(f"cycle ({body}) leaves degree {degree}")
        cur = tuple(img)
        step = list(range(degree))
        for k, x in enumerate(pts):
            step[x] = pts[(k + 1) % len(pts)]
        img = list(perm_mul(tuple(step), cur))
    return tuple(img)


def format_perm(p: Perm) -> str:
    cyc = [c for c in perm_cycles(p) if len(c) > 1]
    if not cyc:
        return "()"
    return "".join("(" + " ".join(str(i + 1) for i in c) + ")" for c in cyc)


def index_of(g: Perm, n: int | None = None) -> int:
    """n minus the number of cycles of g, fixed points included."""
    if n is None:
        n = len(g)
    if n != len(g):
        raise ValidationError(f"permutation has degree {len(g)}, expected {n}")
    return n - len(perm_cycles(g))


# groups

@dataclass(frozen=True)
class ElementClass:
    rep: int
    members: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.members)


class FiniteGroup:
    """A permutation group given by generators, closed out to its element list."""

    def __init__(self, degree: int, gens: Iterable[Perm], name: str | None = None,
                 max_order: int = DEFAULT_ORDER_BOUND):
        self.degree = degree
        ident = tuple(range(degree))
        gens = [tuple(g) for g in gens]
        for g in gens:
            if len(g) != degree or sorted(g) != list(ident):
                raise ValidationError(f"not a permutation of {degree} points: {g}")
        self.gens = [g for g in gens if g != ident]
        self.name = name or "gens(%d): %s" % (degree, ", ".join(format_perm(g) for g in self.gens) or "()")
        elements = [ident]
        index = {ident: 0}
        frontier = [ident]
        while frontier:
            nxt = []
            for x in frontier:
                for g in self.gens:
                    y = perm_mul(g, x)
                    if y not in index:
                        index[y] = len(elements)
                        elements.append(y)
                        nxt.append(y)
                        if len(elements) > max_order:
                            raise GroupTooLargeError(
                                f"group {self.name} exceeds order bound {max_order}")
            frontier = nxt
        self.elements: list[Perm] = elements
        self.index: dict[Perm, int] = index
        self.gen_idx = [index[g] for g in self.gens]

    def __repr__(self) -> str:
        return f"FiniteGroup({self.name!r}, order={self.order})"

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def order(self) -> int:
        return len(self.elements)

    def idx(self, p: Perm | str) -> int:
        if isinstance(p, str):
            p = parse_cycles(p, self.degree)
        try:
            return self.index[tuple(p)]
        except KeyError:
            raise ValidationError(f"{format_perm(tuple(p))} is not in {self.name}") from None

    def perm(self, i: int) -> Perm:
        return self.elements[i]

    def label(self, i: int) -> str:
        return format_perm(self.elements[i])

    # arithmetic on indices

    @cached_property
    def table(self) -> np.ndarray:
        """Multiplication table: ``table[a, b]`` is the index of a*b."""
        n = self.order
        if n > TABLE_BOUND:
            raise GroupTooLargeError(f"multiplication table needs order <= {TABLE_BOUND}, got {n}")
        arr = np.array(self.elements, dtype=np.int64)
        # row a: compose a with every b, i.e. a[b[i]]
        tab = np.empty((n, n), dtype=np.int32)
        codes = self._codes(arr)
        lookup = {c: k for k, c in enumerate(codes)}
        for a in range(n):
            prod = arr[a][arr]
            tab[a] = [lookup[c] for c in self._codes(prod)]
        return tab

    def _codes(self, arr: np.ndarray) -> list[bytes]:
        return [row.tobytes() for row in np.ascontiguousarray(arr)]

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.array([self.index[perm_inv(p)] for p in self.elements], dtype=np.int32)

    def mul(self, a: int, b: int) -> int:
        if self.order <= TABLE_BOUND:
            return int(self.table[a, b])
        return self.index[perm_mul(self.elements[a], self.elements[b])]

    def conj(self, x: int, y: int) -> int:
        """x y x^-1."""
        return self.mul(self.mul(x, y), int(self.inverse[x]))

    def power(self, a: int, k: int) -> int:
        p = self.elements[a]
        k %= self.element_order(a)
        out = tuple(range(self.degree))
        base = p
        while k:
            if k & 1:
                out = perm_mul(base, out)
            base = perm_mul(base, base)
            k >>= 1
        return self.index[out]

    def commutator(self, a: int, b: int) -> int:
        inv = self.inverse
        return self.mul(self.mul(a, b), self.mul(int(inv[a]), int(inv[b])))

    @cached_property
    def orders(self) -> np.ndarray:
        return np.array([perm_order(p) for p in self.elements], dtype=np.int64)

    def element_order(self, a: int) -> int:
        return int(self.orders[a])

    @cached_property
    def exponent(self) -> int:
        return reduce(math.lcm, (int(o) for o in self.orders), 1)

    @cached_property
    def is_abelian(self) -> bool:
        return all(perm_mul(a, b) == perm_mul(b, a)
                   for a, b in itertools.combinations(self.gens, 2))

    def is_transitive(self) -> bool:
        if self.degree <= 1:
            return True
        reached = {0}
        frontier = [0]
        while frontier:
            i = frontier.pop()
            for g in self.gens:
                j = g[i]
                if j not in reached:
                    reached.add(j)
                    frontier.append(j)
        return len(reached) == self.degree

    # subgroups

    def generate(self, idxs: Iterable[int]) -> frozenset[int]:
        """Subgroup generated by the given element indices."""
        gens = sorted({int(i) for i in idxs} - {0})
        members = {0}
        frontier = [0]
        while frontier:
            nxt = []
            for x in frontier:
                for g in gens:
                    y = self.mul(g, x)
                    if y not in members:
                        members.add(y)
                        nxt.append(y)
            frontier = nxt
        return frozenset(members)

    def generates(self, idxs: Iterable[int]) -> bool:
        return len(self.generate(idxs)) == self.order

    def normal_closure(self, idxs: Iterable[int]) -> frozenset[int]:
        gens = set(idxs)
        while True:
            sub = self.generate(gens)
            extra = {self.conj(g, n) for g in self.gen_idx for n in gens} - sub
            if not extra:
                return sub
            gens |= extra

    @cached_property
    def derived_subgroup(self) -> frozenset[int]:
        comms = {self.commutator(a, b) for a, b in itertools.combinations(self.gen_idx, 2)}
        return self.normal_closure(comms)

    @cached_property
    def conjugacy_classes(self) -> list[ElementClass]:
        return conjugacy_classes(self)

    @cached_property
    def class_of(self) -> np.ndarray:
        out = np.empty(self.order, dtype=np.int32)
        for k, c in enumerate(self.conjugacy_classes):
            out[list(c.members)] = k
        return out

    @cached_property
    def abelian_invariants(self) -> tuple[int, ...]:
        """Invariant factors d_1 | d_2 | ... of G/[G,G] (empty for perfect groups)."""
        der = self.derived_subgroup
        coset = np.full(self.order, -1, dtype=np.int64)
        reps = []
        der_list = sorted(der)
        for x in range(self.order):
            if coset[x] >= 0:
                continue
            c = len(reps)
            reps.append(x)
            for d in der_list:
                coset[self.mul(x, d)] = c
        qorders = []
        for x in reps:
            k, y = 1, x
            while y not in der:
                y = self.mul(x, y)
                k += 1
            qorders.append(k)
        return _invariants_from_orders(qorders)

    def normal_subgroups(self, bound: int = NORMAL_BOUND) -> list[frozenset[int]]:
        """All normal subgroups, as joins of class-generated subgroups."""
        if self.order > bound:
            raise GroupTooLargeError(f"normal subgroup enumeration bound {bound} < |G| = {self.order}")
        found = {frozenset([0])}
        for c in self.conjugacy_classes:
            found.add(self.generate(c.members))
        basic = list(found)
        frontier = list(found)
        while frontier:
            nxt = []
            for n in frontier:
                for b in basic:
                    if b <= n:
                        continue
                    j = self.generate(n | b)
                    if j not in found:
                        found.add(j)
                        nxt.append(j)
            frontier = nxt
        return sorted(found, key=lambda s: (len(s), sorted(s)))

    def subgroups(self, bound: int = SUBGROUP_BOUND) -> list[frozenset[int]]:
        """All subgroups, as joins of cyclic subgroups. Small groups only."""
        if self.order > bound:
            raise GroupTooLargeError(f"subgroup enumeration bound {bound} < |G| = {self.order}")
        cyclic = {self.generate([x]) for x in range(self.order)}
        found = set(cyclic)
        frontier = list(cyclic)
        while frontier:
            nxt = []
            for h in frontier:
                for c in cyclic:
                    if c <= h:
                        continue
                    j = self.generate(h | c)
                    if j not in found:
                        found.add(j)
                        nxt.append(j)
            frontier = nxt
        return sorted(found, key=lambda s: (len(s), sorted(s)))

    def regular(self) -> "FiniteGroup":
        """Left regular representation on |G| points."""
        n = self.order
        gens = [tuple(self.mul(g, x) for x in range(n)) for g in self.gen_idx]
        return FiniteGroup(n, gens, name=f"{self.name}@{n}")


def _invariants_from_orders(orders: Sequence[int]) -> tuple[int, ...]:
    n = len(orders)
    if n == 1:
        return ()
    primes = [p for p in range(2, n + 1) if n % p == 0 and all(p % q for q in range(2, math.isqrt(p) + 1))]
    # exps[p] = list of exponents of the p-primary cyclic factors, descending
    rows: list[list[int]] = []
    for p in primes:
        counts = []
        j = 0
        prev = 1
        while True:
            j += 1
            nj = sum(1 for o in orders if (p ** j) % o == 0 and _is_p_power(o, p))
            ge = round(math.log(nj // prev, p)) if nj > prev else 0
            if ge == 0:
                break
            counts.append(ge)
            prev = nj
        # counts[j-1] = number of cyclic factors of order >= p^j
        exps = []
        for j, c in enumerate(counts, start=1):
            nxt = counts[j] if j < len(counts) else 0
            exps.extend([j] * (c - nxt))
        rows.append(sorted((p ** e for e in exps), reverse=True))
    width = max(len(r) for r in rows)
    factors = []
    for k in range(width):
        d = 1
        for r in rows:
            if k < len(r):
                d *= r[k]
        factors.append(d)
    return tuple(sorted(factors))


def _is_p_power(o: int, p: int) -> bool:
    while o % p == 0:
        o //= p
    return o == 1


def conjugacy_classes(G: FiniteGroup, bound: int = DEFAULT_ORDER_BOUND) -> list[ElementClass]:
    """Conjugacy classes, identity class first, then by size and representative."""
    if G.order > bound:
        raise GroupTooLargeError(f"conjugacy classes need |G| <= {bound}, got {G.order}")
    gens = G.gens
    ginv = [perm_inv(g) for g in gens]
    seen = [False] * G.order
    classes = []
    for x in range(G.order):
        if seen[x]:
            continue
        members = [x]
        seen[x] = True
        k = 0
        while k < len(members):
            p = G.elements[members[k]]
            k += 1
            for g, gi in zip(gens, ginv):
                y = G.index[perm_mul(perm_mul(g, p), gi)]
                if not seen[y]:
                    seen[y] = True
                    members.append(y)
        classes.append(ElementClass(min(members), tuple(sorted(members))))
    classes.sort(key=lambda c: (c.rep != 0, len(c), c.rep))
    return classes


def homomorphisms(G: FiniteGroup, H: FiniteGroup, fixed: dict[int, int] | None = None,
                  surjective: bool = False) -> list[tuple[int, ...]]:
    """Every homomorphism G -> H, as a tuple of images indexed by G's elements.

    ``fixed`` pins the images of some elements of G.  Brute force over images of
    G's generators; meant for groups of order at most a few dozen.
    """
    fixed = fixed or {}
    out = []
    choices = [range(H.order)] * len(G.gen_idx)
    for imgs in itertools.product(*choices):
        f = _extend(G, H, imgs)
        if f is None:
            continue
        if any(f[k] != v for k, v in fixed.items()):
            continue
        if surjective and len(set(f)) != H.order:
            continue
        out.append(f)
    return out


def _extend(G: FiniteGroup, H: FiniteGroup, imgs: Sequence[int]) -> tuple[int, ...] | None:
    f = [-1] * G.order
    f[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for x in frontier:
            for g, h in zip(G.gen_idx, imgs):
                y = G.mul(g, x)
                v = H.mul(h, f[x])
                if f[y] < 0:
                    f[y] = v
                    nxt.append(y)
                elif f[y] != v:
                    return None
        frontier = nxt
    return tuple(f)


# cyclotomic action and weights

@dataclass(frozen=True)
class CyclotomicAction:
    """A subgroup U of (Z/e)^x acting on G by g -> g^a."""

    e: int
    generators: tuple[int, ...]
    units: frozenset[int] = field(init=False)

    def __post_init__(self):
        if self.e < 1:
            raise ValidationError("exponent must be positive")
        gens = tuple(a % self.e for a in self.generators) or (1 % self.e,)
        for a in gens:
            if math.gcd(a, self.e) != 1:
                raise ValidationError(f"{a} is not a unit mod {self.e}")
        units = {1 % self.e}
        frontier = [1 % self.e]
        while frontier:
            u = frontier.pop()
            for a in gens:
                v = u * a % self.e
                if v not in units:
                    units.add(v)
                    frontier.append(v)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "units", frozenset(units))

    @classmethod
    def full(cls, e: int) -> "CyclotomicAction":
        """The whole unit group, i.e. the action over the rationals."""
        return cls(e, tuple(a for a in range(1, e + 1) if math.gcd(a, e) == 1))

    @classmethod
    def trivial(cls, e: int) -> "CyclotomicAction":
        return cls(e, (1,))


def rational_action(G: FiniteGroup) -> CyclotomicAction:
    return CyclotomicAction.full(G.exponent)


def k_classes(G: FiniteGroup, act: CyclotomicAction | None = None) -> list[ElementClass]:
    """Orbits on G of conjugation together with g -> g^a for a in U."""
    act = act or rational_action(G)
    if act.e != G.exponent:
        raise ValidationError(f"action exponent {act.e} != exp(G) = {G.exponent}")
    classes = G.conjugacy_classes
    cls_of = G.class_of
    parent = list(range(len(classes)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k, c in enumerate(classes):
        for a in act.generators:
            j = int(cls_of[G.power(c.rep, a)])
            ri, rj = find(k), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for k, c in enumerate(classes):
        groups.setdefault(find(k), []).extend(c.members)
    out = [ElementClass(min(m), tuple(sorted(m))) for m in groups.values()]
    out.sort(key=lambda c: (c.rep != 0, len(c), c.rep))
    return out


@dataclass(frozen=True)
class WeightFunction:
    """Nonnegative integer weight per element index of a fixed group."""

    name: str
    values: tuple[int, ...]

    def __call__(self, i: int) -> int:
        return self.values[i]


def index_weight(G: FiniteGroup) -> WeightFunction:
    if not G.is_transitive():
        raise ValidationError(f"index weight needs a transitive group; {G.name} is not")
    return WeightFunction("ind", tuple(index_of(p, G.degree) for p in G.elements))


def ramified_primes_weight(G: FiniteGroup) -> WeightFunction:
    return WeightFunction("ramified-primes", tuple(0 if i == 0 else 1 for i in range(G.order)))


def make_weight(G: FiniteGroup, spec: str | WeightFunction) -> WeightFunction:
    if isinstance(spec, WeightFunction):
        return spec
    if spec == "ind":
        return index_weight(G)
    if spec in ("ramified-primes", "one", "1"):
        return ramified_primes_weight(G)
    raise ValidationError(f"unknown weight {spec!r} (use 'ind' or 'ramified-primes')")


@dataclass(frozen=True)
class WeightReport:
    ok: bool
    message: str = ""
    pair: tuple[int, int] | None = None


def validate_weight(G: FiniteGroup, act: CyclotomicAction | None, w: WeightFunction) -> WeightReport:
    if len(w.values) != G.order:
        return WeightReport(False, f"weight has {len(w.values)} entries for |G| = {G.order}")
    if w(0) != 0:
        return WeightReport(False, "w(1) != 0", (0, 0))
    if any(v < 0 for v in w.values):
        return WeightReport(False, "negative weight")
    for kc in k_classes(G, act):
        base = w(kc.rep)
        for m in kc.members:
            if w(m) != base:
                return WeightReport(
                    False, f"w({G.label(kc.rep)}) = {base} but w({G.label(m)}) = {w(m)} in one K-class",
                    (kc.rep, m))
    return WeightReport(True)


@dataclass(frozen=True)
class MalleInvariants:
    a: int
    b: int
    minimal_classes: tuple[ElementClass, ...]


def malle_ab(G: FiniteGroup, act: CyclotomicAction | None, w: WeightFunction) -> MalleInvariants:
    if G.order == 1:
        raise ValidationError("trivial group has no nonidentity elements")
    rep = validate_weight(G, act, w)
    if not rep.ok:
        raise ValidationError(rep.message)
    a = min(w.values[1:])
    mins = tuple(c for c in k_classes(G, act) if c.rep != 0 and w(c.rep) == a)
    return MalleInvariants(a, len(mins), mins)


def min_weight_gen_check(G: FiniteGroup, w: WeightFunction) -> bool:
    if G.order == 1:
        return True
    a = min(w.values[1:])
    return G.generates(i for i in range(1, G.order) if w(i) == a)


class _NoQualifying:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "NO_QUALIFYING_SUBGROUP"

    def __str__(self) -> str:
        return "no qualifying subgroup"


NO_QUALIFYING_SUBGROUP = _NoQualifying()


def beta_invariant(G: FiniteGroup, act: CyclotomicAction | None, w: WeightFunction,
                   bound: int = NORMAL_BOUND):
    """Fewest minimal-weight K-classes outside a proper normal subgroup that
    itself meets the minimal weight; NO_QUALIFYING_SUBGROUP if none does."""
    inv = malle_ab(G, act, w)
    best = None
    for N in G.normal_subgroups(bound):
        if len(N) == G.order:
            continue
        if not any(w(i) == inv.a for i in N if i != 0):
            continue
        outside = sum(1 for c in inv.minimal_classes if c.rep not in N)
        best = outside if best is None else min(best, outside)
    return NO_QUALIFYING_SUBGROUP if best is None else best


def ab_torsion_order(G: FiniteGroup, m: int) -> int:
    """|G^ab[m]| from the invariant factors."""
    if m <= 0:
        raise ValidationError("m must be positive")
    return math.prod(math.gcd(d, m) for d in G.abelian_invariants)


# constructions and the group-spec language

def _cyclic(n: int) -> FiniteGroup:
    if n == 1:
        return FiniteGroup(1, [], name="C1")
    return FiniteGroup(n, [tuple((i + 1) % n for i in range(n))], name=f"C{n}")


def _symmetric(n: int) -> FiniteGroup:
    gens = []
    if n >= 2:
        gens.append(tuple([1, 0] + list(range(2, n))))
    if n >= 3:
        gens.append(tuple((i + 1) % n for i in range(n)))
    return FiniteGroup(max(n, 1), gens, name=f"S{n}")


def _alternating(n: int) -> FiniteGroup:
    gens = []
    for k in range(2, n):
        g = list(range(n))
        g[0], g[1], g[k] = 1, k, 0
        gens.append(tuple(g))
    return FiniteGroup(max(n, 1), gens, name=f"A{n}")


def _dihedral(n: int) -> FiniteGroup:
    rot = tuple((i + 1) % n for i in range(n))
    ref = tuple((-i) % n for i in range(n))
    return FiniteGroup(n, [rot, ref], name=f"D{n}")


def _quaternion() -> FiniteGroup:
    # left regular action on 1, -1, i, -i, j, -j, k, -k
    i = parse_cycles("(1 3 2 4)(5 7 6 8)", 8)
    j = parse_cycles("(1 5 2 6)(3 8 4 7)", 8)
    return FiniteGroup(8, [i, j], name="Q8")


def direct_product(G1: FiniteGroup, G2: FiniteGroup) -> FiniteGroup:
    """G1 x G2 acting on disjoint copies of the two point sets."""
    n1, n2 = G1.degree, G2.degree
    gens = [tuple(g) + tuple(range(n1, n1 + n2)) for g in G1.gens]
    gens += [tuple(range(n1)) + tuple(n1 + x for x in g) for g in G2.gens]
    return FiniteGroup(n1 + n2, gens, name=f"{G1.name}x{G2.name}")


def product_element(G1: FiniteGroup, G2: FiniteGroup, P: FiniteGroup, a: int, b: int) -> int:
    return P.index[G1.elements[a] + tuple(G1.degree + x for x in G2.elements[b])]


def quotient(G: FiniteGroup, N: Iterable[int]) -> tuple[FiniteGroup, tuple[int, ...]]:
    """G/N as the permutation action of G on left cosets of N, with the projection."""
    N = frozenset(N)
    cosets: list[frozenset[int]] = []
    where: dict[int, int] = {}
    for g in range(G.order):
        if g in where:
            continue
        c = frozenset(G.mul(g, n) for n in N)
        for x in c:
            where[x] = len(cosets)
        cosets.append(c)
    if any(G.mul(G.mul(g, n), int(G.inverse[g])) not in N for g in G.gen_idx for n in N):
        raise ValidationError("quotient by a non-normal subgroup")

    def act(g: int) -> Perm:
        return tuple(where[G.mul(g, next(iter(c)))] for c in cosets)

    Q = FiniteGroup(len(cosets), [act(g) for g in G.gen_idx], name=f"{G.name}/N{len(N)}")
    proj = tuple(Q.index[act(g)] for g in range(G.order))
    return Q, proj


def wreath_product(A: FiniteGroup, B: FiniteGroup) -> FiniteGroup:
    """A wr B: k = deg(B) blocks of deg(A) points, B permuting the blocks."""
    m, k = A.degree, B.degree
    n = m * k
    gens = []
    for g in A.gens:
        gens.append(tuple(g) + tuple(range(m, n)))
    for t in B.gens:
        gens.append(tuple(t[i // m] * m + i % m for i in range(n)))
    return FiniteGroup(n, gens, name=f"{A.name}wr{B.name}")


_ATOM = re.compile(r"^(S|A|C|D)(\d+)$")


def _atom(tok: str) -> FiniteGroup:
    if tok in ("Q8",):
        return _quaternion()
    if tok in ("V4", "K4"):
        return FiniteGroup(4, [parse_cycles("(1 2)(3 4)", 4), parse_cycles("(1 3)(2 4)", 4)], name="V4")
    m = _ATOM.match(tok)
    if not m:
        raise ValidationError(f"unknown group name {tok!r}")
    kind, n = m.group(1), int(m.group(2))
    if n < 1:
        raise ValidationError(f"bad size in {tok!r}")
    if kind == "S":
        return _symmetric(n)
    if kind == "A":
        return _alternating(n)
    if kind == "C":
        return _cyclic(n)
    if n < 3:
        raise ValidationError("dihedral groups need n >= 3")
    return _dihedral(n)


def parse_group(spec: str) -> FiniteGroup:
    """Build a group from a group string (grammar in the README).

    >>> parse_group("S3").order
    6
    >>> parse_group("gens(4): (1 2 3 4), (1 3)").order
    8
    """
    spec = spec.strip()
    m = re.fullmatch(r"gens\(\s*(\d+)\s*\)\s*:\s*(.*)", spec, flags=re.S)
    if m:
        n = int(m.group(1))
        body = m.group(2).strip()
        parts = [p for p in re.split(r"\)\s*,\s*\(", body)] if body else []
        gens = []
        for k, p in enumerate(parts):
            if not p.startswith("("):
                p = "(" + p
            if not p.endswith(")"):
                p = p + ")"
            gens.append(parse_cycles(p, n))
        return FiniteGroup(n, gens, name=spec)
    degree = None
    if "@" in spec:
        spec, d = spec.rsplit("@", 1)
        try:
            degree = int(d)
        except ValueError:
            raise ValidationError(f"bad degree {d!r}") from None
    factors = []
    for term in spec.split("x"):
        parts = term.split("wr")
        g = _atom(parts[0].strip())
        for p in parts[1:]:
            g = wreath_product(g, _atom(p.strip()))
        factors.append(g)
    G = reduce(direct_product, factors)
    if len(factors) == 1:
        G.name = spec
    if degree is not None and degree != G.degree:
        if degree == G.order:
            G = G.regular()
        else:
            raise ValidationError(
                f"{spec} has natural degree {G.degree} and order {G.order}; degree {degree} is neither")
        G.name = f"{spec}@{degree}"
    return G
