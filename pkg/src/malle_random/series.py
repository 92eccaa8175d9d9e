"""Malle-Bhargava Dirichlet series: exact coefficients, partial sums, the
Euler-product leading constant, Tauberian tables and the decay of
non-admissible counts."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .groups import (CyclotomicAction, FiniteGroup, WeightFunction, ab_torsion_order,
                     make_weight, malle_ab)
from .local import (TRIVIAL_CONDITIONS, LocalConditions, LocalHomSet, Place, WildTable,
                    admissibility_check, is_wild, local_exponent, local_hom_set, primes_upto)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaseField:
    """What the counting problem needs to know about K.

    ``m`` = |mu(K)|, ``unit_rank`` = u_K, ``residue`` = residue of zeta_K at 1.
    ``places`` optionally replaces the rational primes by an explicit
    norm-sorted stream of finite places.
    """

    name: str = "Q"
    m: int = 2
    unit_rank: int = 0
    residue: float = 1.0
    archimedean: tuple[Place, ...] = (Place.real(),)
    places: tuple[Place, ...] | None = None

    def __post_init__(self):
        if self.unit_rank < 0 or self.m < 1 or self.residue <= 0:
            raise ValidationError("need unit_rank >= 0, m >= 1 and a positive residue")

    @property
    def is_rational(self) -> bool:
        return self.places is None

    def finite_places(self, bound: int) -> list[Place]:
        if self.places is None:
            return [Place.finite(int(p)) for p in primes_upto(bound)]
        return [v for v in self.places if v.norm <= bound]

    def to_json(self) -> dict:
        return {"name": self.name, "m": self.m, "unit_rank": self.unit_rank,
                "residue": self.residue, "archimedean": [v.kind for v in self.archimedean]}


RATIONALS = BaseField()


class _LocalCache:
    """Memoised local hom sets; tame sets are reused across a residue class."""

    def __init__(self, G: FiniteGroup, base: BaseField, wild_tables: Iterable[WildTable] = ()):
        self.G = G
        self.base = base
        self.wild_tables = tuple(wild_tables)
        self._sets: dict = {}
        self._counts: dict = {}

    def get(self, v: Place) -> LocalHomSet:
        if v.is_archimedean or is_wild(self.G, v):
            key = (v.kind, v.p, v.q, v.label)
        else:
            # the torsion column depends on (q - 1)/m as well as on q mod exp(G)
            e = self.G.exponent
            tors = ((v.q - 1) // self.base.m) % e if (v.q - 1) % self.base.m == 0 else None
            key = ("tame", v.q % e, tors)
        hs = self._sets.get(key)
        if hs is None:
            hs = local_hom_set(self.G, v, m=self.base.m, wild_tables=self.wild_tables)
            self._sets[key] = hs
        if hs.place != v:
            hs = LocalHomSet(v, hs.group, hs.generators, hs.homs, hs.frobenius_generator)
        return hs

    def counts(self, v: Place, sigma: LocalConditions, w: WeightFunction) -> dict[int, int]:
        """Exponent histogram of Sigma_v, memoised when it depends only on the class of v."""
        rule = sigma.rule_for(v)
        tame = not v.is_archimedean and not is_wild(self.G, v)
        key = None
        if tame and isinstance(rule, str):
            key = (v.q % self.G.exponent, (v.q - 1) % self.base.m == 0, rule, w.name)
            hit = self._counts.get(key)
            if hit is not None:
                return hit
        hs = self.get(v)
        out = _counts(hs, sigma.select(hs), w)
        if key is not None:
            self._counts[key] = out
        return out


def _counts(hs: LocalHomSet, rows: Iterable[int], w: WeightFunction) -> dict[int, int]:
    out: dict[int, int] = {}
    for i in rows:
        k = local_exponent(hs[i], w)
        out[k] = out.get(k, 0) + 1
    return out


@dataclass
class Coefficients:
    """a_n = num[n] / |G|^den[n] for 1 <= n <= X (index 0 unused)."""

    X: int
    order: int
    num: np.ndarray
    den: np.ndarray

    def __getitem__(self, n: int) -> Fraction:
        if not 1 <= n <= self.X:
            raise IndexError(n)
        return Fraction(int(self.num[n]), self.order ** int(self.den[n]))

    def fractions(self, upto: int | None = None) -> list[Fraction]:
        upto = self.X if upto is None else upto
        return [self[n] for n in range(1, upto + 1)]

    def partial_sums(self, checkpoints: Sequence[int]) -> list[Fraction]:
        out = []
        for X in checkpoints:
            if X > self.X:
                raise ValidationError(f"checkpoint {X} beyond sieve bound {self.X}")
            num = self.num[1:X + 1]
            den = self.den[1:X + 1]
            total = Fraction(0)
            for d in np.unique(den[num != 0]) if np.any(num != 0) else []:
                s = num[den == d]
                total += Fraction(int(s.sum(dtype=object)), self.order ** int(d))
            out.append(total)
        return out


@dataclass
class DirichletProfile:
    group: FiniteGroup
    weight: WeightFunction
    conditions: LocalConditions
    base: BaseField
    X: int
    coeffs: Coefficients
    arch_multiplier: Fraction
    prefactor: Fraction
    prediction: "Prediction | None" = None


def _check_admissible(G: FiniteGroup, sigma: LocalConditions) -> None:
    rep = admissibility_check(sigma, G)
    if not rep.admissible:
        raise ValidationError(f"non-admissible local conditions ({rep.reason}); use decay_probe")


def arch_multiplier(G: FiniteGroup, sigma: LocalConditions, base: BaseField = RATIONALS,
                    cache: _LocalCache | None = None) -> Fraction:
    """prod over infinite places of |Sigma_v| / |G|."""
    cache = cache or _LocalCache(G, base)
    out = Fraction(1)
    for v in base.archimedean:
        out *= Fraction(len(sigma.select(cache.get(v))), G.order)
    return out


def dirichlet_coeffs(G: FiniteGroup, w: WeightFunction | str, X: int,
                     sigma: LocalConditions = TRIVIAL_CONDITIONS, base: BaseField = RATIONALS,
                     wild_tables: Iterable[WildTable] = ()) -> Coefficients:
    """Exact coefficients a_1..a_X of the finite part of the local series."""
    w = make_weight(G, w)
    if X < 1:
        raise ValidationError("X must be at least 1")
    _check_admissible(G, sigma)
    cache = _LocalCache(G, base, wild_tables)
    if not base.is_rational:
        return _general_coeffs(G, w, X, sigma, base, cache)
    overridden = {int(k) for k in sigma.overrides if not isinstance(k, str)}
    # every count is at most |Hom| <= |G|^2, and at most ~8 distinct primes divide n <= X
    depth = 8 + len(overridden)
    safe = (G.order ** 2) ** depth < 2 ** 62
    dtype = np.int64 if safe else object
    num = np.ones(X + 1, dtype=dtype)
    den = np.zeros(X + 1, dtype=np.int64)
    idx = np.arange(X + 1)
    for p in primes_upto(X):
        p = int(p)
        _apply_prime(num, den, idx, X, p, cache.counts(Place.finite(p), sigma, w))
    # constant terms: only overridden places can keep fewer than |G| unramified homs
    for p in sorted(overridden):
        c0 = cache.counts(Place.finite(p), sigma, w).get(0, 0)
        if c0 != G.order:
            mask = np.ones(X + 1, dtype=bool)
            if p <= X:
                mask[p::p] = False
            num[mask] *= c0
            den[mask] += 1
    num[0] = 0
    return Coefficients(X, G.order, num, den)


def _apply_prime(num, den, idx, X, p, counts):
    # multiply a_n by count_k for every n with p^k exactly dividing n
    pk = p
    k = 1
    while pk <= X:
        sel = idx[pk::pk]
        exact = sel[(sel // pk) % p != 0]
        c = counts.get(k, 0)
        num[exact] *= c
        den[exact] += 1
        pk *= p
        k += 1


def _general_coeffs(G, w, X, sigma, base, cache) -> Coefficients:
    # explicit place streams may repeat norms; multiply Euler factors one by one
    factors = []
    for v in base.finite_places(max(X, *(v.norm for v in base.places))):
        if v.norm > X and sigma.is_trivial_at(v):
            continue
        counts = cache.counts(v, sigma, w)
        factors.append((v.norm, {k: Fraction(c, G.order) for k, c in counts.items()}))
    vals = fraction_sieve(factors, X)
    # store as num / |G|^den with a common denominator exponent
    den_exp = 0
    for a in vals[1:]:
        d = a.denominator
        e = 0
        while d % G.order == 0 and d > 1:
            d //= G.order
            e += 1
        den_exp = max(den_exp, e)
    scale = G.order ** den_exp
    num = np.array([0] + [int(a * scale) for a in vals[1:]], dtype=object)
    den = np.full(X + 1, den_exp, dtype=np.int64)
    return Coefficients(X, G.order, num, den)


def fraction_sieve(factors: Sequence[tuple[int, dict[int, Fraction]]], X: int,
                   const: Fraction = Fraction(1)) -> list[Fraction]:
    """Coefficients up to X of const * prod_v (sum_k c_k N_v^{-ks}), exactly."""
    a = [Fraction(0)] * (X + 1)
    scale = Fraction(const)
    if X >= 1:
        a[1] = Fraction(1)
    for N, coeffs in factors:
        c0 = coeffs.get(0, Fraction(0))
        if c0 != 0:
            # factor c0 out so only multiples of N change
            scale *= c0
            rel = {k: c / c0 for k, c in coeffs.items() if k > 0 and c != 0}
            if N > X or not rel:
                continue
            # descending n keeps a[n / N^k] at its old value while a[n] is rewritten
            for n in range(X - X % N, 0, -N):
                q, k, acc = n, 0, a[n]
                while q % N == 0:
                    q //= N
                    k += 1
                    c = rel.get(k)
                    if c and a[q]:
                        acc += c * a[q]
                a[n] = acc
        else:
            new = [Fraction(0)] * (X + 1)
            if N <= X:
                for n in range(N, X + 1, N):
                    q, k, acc = n, 0, Fraction(0)
                    while q % N == 0:
                        q //= N
                        k += 1
                        c = coeffs.get(k)
                        if c and a[q]:
                            acc += c * a[q]
                    new[n] = acc
            a = new
    return [x * scale for x in a]


def partial_sum(profile: DirichletProfile, X: int | None = None) -> Fraction:
    """(|G|/|G^ab[m]|) * arch multiplier * sum_{n<=X} a_n, exactly."""
    X = profile.X if X is None else X
    (s,) = profile.coeffs.partial_sums([X])
    return profile.prefactor * profile.arch_multiplier * s


def build_profile(G: FiniteGroup, w: WeightFunction | str, X: int,
                  sigma: LocalConditions = TRIVIAL_CONDITIONS, base: BaseField = RATIONALS,
                  wild_tables: Iterable[WildTable] = ()) -> DirichletProfile:
    w = make_weight(G, w)
    coeffs = dirichlet_coeffs(G, w, X, sigma, base, wild_tables)
    cache = _LocalCache(G, base, wild_tables)
    arch = arch_multiplier(G, sigma, base, cache)
    pref = Fraction(G.order, ab_torsion_order(G, base.m))
    return DirichletProfile(G, w, sigma, base, X, coeffs, arch, pref)


# the oracle: direct enumeration of ramification patterns

def oracle_coeffs(G: FiniteGroup, w: WeightFunction | str, X: int,
                  sigma: LocalConditions = TRIVIAL_CONDITIONS, base: BaseField = RATIONALS,
                  wild_tables: Iterable[WildTable] = ()) -> list[Fraction]:
    """a_1..a_X by choosing, place by place, an individual ramified hom.

    Each chosen hom contributes 1/|G|; places left unramified contribute
    (#unramified rows kept)/|G|, which is 1 away from restricted places.
    """
    w = make_weight(G, w)
    places = base.finite_places(X)
    extra = [Place.finite(int(k)) for k in sigma.overrides
             if not isinstance(k, str) and int(k) > X]
    ram: list[tuple[int, list[int]]] = []
    unram_weight: list[Fraction] = []
    for v in places + extra:
        hs = local_hom_set(G, v, m=base.m, wild_tables=wild_tables)
        rows = sigma.select(hs)
        exps = [local_exponent(hs[i], w) for i in rows if not hs[i].unramified]
        n_un = sum(1 for i in rows if hs[i].unramified)
        ram.append((v.norm, exps))
        unram_weight.append(Fraction(n_un, G.order))
    out = [Fraction(0)] * (X + 1)
    base_w = math.prod(unram_weight, start=Fraction(1))
    # depth-first over places in order; a place is either skipped or ramified via one hom
    nplaces = len(ram)

    def walk(start: int, n: int, weight: Fraction, skipped_ratio: Fraction):
        out[n] += weight * skipped_ratio
        for j in range(start, nplaces):
            N, exps = ram[j]
            if n * N > X:
                if N > X:
                    break
                continue
            uw = unram_weight[j]
            for e in exps:
                m = n * N ** e
                if m > X:
                    continue
                if uw == 0:
                    # this place must ramify; the all-unramified weight is 0
                    walk(j + 1, m, weight * Fraction(1, G.order), skipped_ratio)
                else:
                    walk(j + 1, m, weight * Fraction(1, G.order) / uw, skipped_ratio)

    if all(u != 0 for u in unram_weight):
        walk(0, 1, Fraction(1), base_w)
    else:
        # places with no unramified rows must ramify: enumerate them the slow way
        _walk_forced(ram, unram_weight, G.order, X, out)
    return out[1:]


def _walk_forced(ram, unram_weight, order, X, out):
    def rec(j, n, weight):
        if j == len(ram):
            out[n] += weight
            return
        N, exps = ram[j]
        if unram_weight[j]:
            rec(j + 1, n, weight * unram_weight[j])
        for e in exps:
            m = n * N ** e
            if m <= X:
                rec(j + 1, m, weight * Fraction(1, order))

    rec(0, 1, Fraction(1))


# the leading constant

@dataclass(frozen=True)
class Prediction:
    a: int
    b: int
    c: float
    pmax: int
    tail_bound: float
    tail_rigorous: bool
    arch_product: int
    arch_hom_product: int
    forms_agree: bool
    prefactor: float
    euler_product: float
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "pmax": self.pmax,
                "tail_bound": self.tail_bound, "tail_rigorous": self.tail_rigorous,
                "arch_product_sigma": self.arch_product,
                "arch_product_hom": self.arch_hom_product, "arch_forms_agree": self.forms_agree,
                "prefactor": self.prefactor, "euler_product": self.euler_product,
                "notes": list(self.notes)}


def prediction(G: FiniteGroup, w: WeightFunction | str, sigma: LocalConditions = TRIVIAL_CONDITIONS,
               base: BaseField = RATIONALS, pmax: int = 10**6,
               act: CyclotomicAction | None = None,
               wild_tables: Iterable[WildTable] = ()) -> Prediction:
    """a, b and the Euler-product constant c, truncated at pmax with a tail report."""
    w = make_weight(G, w)
    _check_admissible(G, sigma)
    inv = malle_ab(G, act, w)
    a, b = inv.a, inv.b
    cache = _LocalCache(G, base, wild_tables)
    arch = 1
    arch_hom = 1
    for v in base.archimedean:
        hs = cache.get(v)
        arch *= len(sigma.select(hs))
        arch_hom *= len(hs)
    pref = base.residue ** b / (a ** (b - 1) * math.factorial(b - 1)
                                * ab_torsion_order(G, base.m) * G.order ** base.unit_rank)
    notes = []
    if arch != arch_hom:
        notes.append(f"archimedean forms differ: prod |Sigma_v| = {arch}, prod |Hom| = {arch_hom}")

    def factor(q: float, counts: dict[int, int]) -> float:
        s = sum(c * q ** (-k / a) for k, c in counts.items()) / G.order
        return (1.0 - 1.0 / q) ** b * s

    special = set()
    if base.is_rational:
        special = {int(k) for k in sigma.overrides if not isinstance(k, str)}
        special |= {p for p in range(2, G.order + 1) if G.order % p == 0 and _isprime(p)}
    logs = []
    zero = False
    class_counts: dict[int, dict[int, int]] = {}
    if base.is_rational:
        primes = primes_upto(pmax)
        # tame factors depend on p only through p mod e, p mod m and the class rule
        e = math.lcm(G.exponent, base.m, sigma.class_rule[0] if sigma.class_rule else 1)
        for p in sorted(special):
            if p > pmax:
                continue
            f = factor(float(p), cache.counts(Place.finite(p), sigma, w))
            if f == 0:
                zero = True
            else:
                logs.append(math.log(f))
        rest = np.array([p for p in primes if int(p) not in special], dtype=np.float64)
        residues = (rest.astype(np.int64) % e) if len(rest) else np.zeros(0, dtype=np.int64)
        for r in np.unique(residues):
            qs = rest[residues == r]
            counts = cache.counts(Place.finite(int(qs[0])), sigma, w)
            class_counts[int(r)] = counts
            s = np.zeros_like(qs)
            for k, c in counts.items():
                s += c * qs ** (-k / a)
            f = (1.0 - 1.0 / qs) ** b * s / G.order
            if np.any(f == 0):
                zero = True
            else:
                logs.append(math.fsum(np.log(f)))
    else:
        for v in base.finite_places(pmax):
            counts = cache.counts(v, sigma, w)
            if not is_wild(G, v) and sigma.is_trivial_at(v):
                class_counts[v.q % G.exponent] = counts
            f = factor(float(v.norm), counts)
            if f == 0:
                zero = True
            else:
                logs.append(math.log(f))
    # large overridden places still act through their constant term
    for k in sigma.overrides:
        if not isinstance(k, str) and int(k) > pmax:
            f = factor(float(k), cache.counts(Place.finite(int(k)), sigma, w))
            if f == 0:
                zero = True
            else:
                logs.append(math.log(f))
    euler = 0.0 if zero else math.exp(math.fsum(logs))
    c = pref * arch * euler
    tail, rigorous = _tail(class_counts, a, b, G.order, pmax)
    if not rigorous:
        notes.append("tail estimated, not bounded: some tame residue classes have "
                     "a different count of minimal-weight homs than b (conditional convergence)")
        tail = _tail_estimate(G, w, sigma, base, pmax, a, b, cache)
    return Prediction(a, b, c, pmax, tail, rigorous, arch, arch_hom, arch == arch_hom,
                      pref, euler, tuple(notes))


def _isprime(n: int) -> bool:
    return n >= 2 and all(n % d for d in range(2, math.isqrt(n) + 1))


def _tail(class_counts, a, b, order, pmax) -> tuple[float, bool]:
    """Relative error bound on the product over p > pmax.

    For a factor (1 - 1/p)^b (1 + b/p + R) with R collecting exponents above a,
    |factor - 1| <= K p^{-1-1/a}, K = C(b,2) + b^2 + max sum_{k>a} c_k.  Summing
    2K n^{-1-1/a} over n > P is at most 2 K a P^{-1/a}.
    """
    if not class_counts:
        return 0.0, True
    for counts in class_counts.values():
        if any(0 < k < a for k in counts):
            return float("inf"), False
        if Fraction(counts.get(a, 0), order) != b:
            return float("nan"), False
    high = max(sum(c for k, c in counts.items() if k > a) / order for counts in class_counts.values())
    K = math.comb(b, 2) + b * b + high
    if K * pmax ** (-(1 + 1 / a)) > 0.5:
        return float("inf"), True
    s = 2 * K * a * pmax ** (-1 / a)
    return math.expm1(s), True


def _tail_estimate(G, w, sigma, base, pmax, a, b, cache) -> float:
    # |log c(P) - log c(P/2)| as an empirical size for the remaining tail
    lo = max(pmax // 2, 2)
    total = 0.0
    for p in primes_upto(pmax):
        if p <= lo or G.order % int(p) == 0:
            continue
        counts = cache.counts(Place.finite(int(p)), sigma, w)
        s = sum(c * float(p) ** (-k / a) for k, c in counts.items()) / G.order
        total += math.log((1 - 1 / float(p)) ** b * s)
    return abs(math.expm1(abs(total)))


# asymptotic comparison and non-admissible decay

def predicted_growth(pred: Prediction, X: float) -> float:
    return pred.c * X ** (1.0 / pred.a) * math.log(X) ** (pred.b - 1)


@dataclass(frozen=True)
class TauberianRow:
    X: int
    A: Fraction
    predicted: float
    ratio: float


def tauberian_table(profile: DirichletProfile, checkpoints: Sequence[int],
                    pred: Prediction | None = None) -> list[TauberianRow]:
    pred = pred or profile.prediction
    if pred is None:
        raise ValidationError("profile has no prediction attached")
    checkpoints = sorted(checkpoints)
    sums = profile.coeffs.partial_sums(checkpoints)
    rows = []
    for X, s in zip(checkpoints, sums):
        A = profile.prefactor * profile.arch_multiplier * s
        P = predicted_growth(pred, X)
        rows.append(TauberianRow(X, A, P, float(A) / P if P else float("nan")))
    return rows


@dataclass(frozen=True)
class DecayRow:
    X: int
    restricted: Fraction
    admissible: Fraction
    normalized: float  # restricted / admissible


def decay_probe(G: FiniteGroup, w: WeightFunction | str, sigma: LocalConditions,
                checkpoints: Sequence[int], base: BaseField = RATIONALS,
                wild_tables: Iterable[WildTable] = ()) -> list[DecayRow]:
    """Exact first moments for a non-admissible family next to the unrestricted ones.

    At bound X every place of norm <= X carries its local condition, so places
    that lose unramified homs multiply the count by |Sigma_v(1)|/|G| each.
    """
    w = make_weight(G, w)
    if admissibility_check(sigma, G).admissible:
        raise ValidationError("decay_probe expects a non-admissible family")
    cache = _LocalCache(G, base, wild_tables)
    pref = Fraction(G.order, ab_torsion_order(G, base.m))
    arch_r = arch_multiplier(G, sigma, base, cache)
    arch_a = arch_multiplier(G, TRIVIAL_CONDITIONS, base, cache)
    rows = []
    for X in sorted(checkpoints):
        fr, fa = [], []
        for v in base.finite_places(X):
            cr = cache.counts(v, sigma, w)
            ca = cache.counts(v, TRIVIAL_CONDITIONS, w)
            fr.append((v.norm, {k: Fraction(c, G.order) for k, c in cr.items()}))
            fa.append((v.norm, {k: Fraction(c, G.order) for k, c in ca.items()}))
        r = sum(fraction_sieve(fr, X)[1:], Fraction(0))
        a_ = sum(fraction_sieve(fa, X)[1:], Fraction(0))
        R = pref * arch_r * r
        A = pref * arch_a * a_
        rows.append(DecayRow(X, R, A, float(R / A) if A else float("nan")))
    return rows
