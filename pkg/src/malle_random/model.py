"""The random group model: profiles of F_{K,S}, Haar relation sampling,
survival counts of surjections, and the moment / LLN / Grunwald experiments.

Two engines share one interface.  The generic engine keeps the joint frame Phi
of all local tuples explicitly and samples relations as vectors in G^|Phi|.
The abelian engine uses that a Haar element of F_{K,S} acts on homomorphisms
to an abelian G through independent local blocks, and counts solutions of the
resulting linear systems exactly.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import ClassVar, Iterable, Sequence

import numpy as np

from . import __version__
from .category import FiniteLocalObject, datum_from_row, moment_closed_form
from .errors import CapExceededError, ValidationError
from .groups import (FiniteGroup, WeightFunction, _invariants_from_orders, make_weight,
                     min_weight_gen_check)
from .local import (TRIVIAL_CONDITIONS, LocalConditions, LocalHomSet, Place, WildTable,
                    is_wild, local_exponent, place_of, primes_upto)
from .sampling import (ENUM_CAP, ExactSampler, LazyNormalWalk, VectorGroup, WalkParams,
                       make_sampler)
from .series import RATIONALS, BaseField, _LocalCache, build_profile as series_profile
from .series import partial_sum, prediction, predicted_growth

log = logging.getLogger(__name__)

FRAME_CAP = 10**6
MODES = ("structural", "no-torsion")


def rng_for(seed: int | None, *key: int) -> np.random.Generator:
    """Independent stream for (seed, key...); every sampler draws from one of these."""
    if seed is None:
        raise ValidationError("an explicit seed is required")
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key)))


def select_places(spec: str | Sequence, base: BaseField = RATIONALS) -> tuple[Place, ...]:
    """S from ``"norm<=B"``, ``"inf,2,3,5"`` or a list of keys; always contains P_inf."""
    places: list[Place] = list(base.archimedean)
    if isinstance(spec, str):
        s = spec.replace(" ", "")
        if s.startswith("norm<="):
            places += base.finite_places(int(float(s[len("norm<="):])))
        else:
            places += [place_of(t) for t in s.split(",") if t]
    else:
        places += [place_of(t) for t in spec]
    seen, out = set(), []
    for v in places:
        key = (v.kind, v.p, v.q, v.label)
        if key not in seen:
            seen.add(key)
            out.append(v)
    out.sort(key=lambda v: (not v.is_archimedean, v.norm if not v.is_archimedean else 0, v.label))
    return tuple(out)


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")


def _subgroup_mobius(G: FiniteGroup) -> list[tuple[frozenset[int], int]]:
    """(H, mu(H, G)) over the subgroup lattice, nonzero mu only."""
    subs = sorted(G.subgroups(), key=len, reverse=True)
    mu: dict[frozenset[int], int] = {}
    for H in subs:
        if len(H) == G.order:
            mu[H] = 1
        else:
            mu[H] = -sum(m for K, m in mu.items() if H < K)
    return [(H, m) for H, m in mu.items() if m]


def _maximal_subgroups(G: FiniteGroup) -> list[frozenset[int]]:
    subs = [H for H in G.subgroups() if len(H) < G.order]
    return [H for H in subs if not any(H < K for K in subs)]


def _derived_plus(G: FiniteGroup, gens: Iterable[int], extra: Iterable[int]) -> frozenset[int]:
    """[H, H] <x> for H = <gens>; normal in H because it contains [H, H]."""
    gens = sorted(set(gens))
    seeds = {G.commutator(a, b) for a in gens for b in gens} | set(extra)
    sub = G.generate(seeds)
    while True:
        more = {G.conj(g, n) for g in gens for n in sub} - sub
        if not more:
            return sub
        sub = G.generate(sub | more)


def _check_support(G, w, sigma, base, places, X, cache) -> None:
    """Refuse X when a place outside S could ramify with norm <= X."""
    if not base.is_rational:
        return
    have = {v.key for v in places}
    a = min(w.values[1:]) if G.order > 1 else 1
    limit = int(X ** (1.0 / a)) + 1
    for p in primes_upto(limit):
        p = int(p)
        if p in have:
            continue
        v = Place.finite(p)
        counts = cache.counts(v, sigma, w)
        if any(k > 0 and p ** k <= X for k in counts):
            raise ValidationError(
                f"X = {X} allows ramification at {p}, which is outside S; "
                f"enlarge S (for example --places 'norm<={X}')")


# generic engine

@dataclass(eq=False)
class GenericProfile:
    engine: ClassVar[str] = "generic"
    group: FiniteGroup
    weight: WeightFunction
    sigma: LocalConditions
    base: BaseField
    places: tuple[Place, ...]
    hom_sets: tuple[LocalHomSet, ...]
    rows: tuple[tuple[int, ...], ...]
    frame: np.ndarray  # (|Phi|, |S|) row indices into hom_sets
    gen_vectors: np.ndarray  # (#generators, |Phi|)
    gen_owner: tuple[int, ...]  # place index of each generator vector
    torsion_vectors: np.ndarray  # (|S|, |Phi|)
    inv: np.ndarray  # |inv(phi)| as float
    surjective: np.ndarray
    enum_cap: int = ENUM_CAP
    walk: WalkParams = WalkParams()
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def nphi(self) -> int:
        return len(self.frame)

    @property
    def vg(self) -> VectorGroup:
        if "vg" not in self._cache:
            self._cache["vg"] = VectorGroup(self.group)
        return self._cache["vg"]

    def n_plain(self) -> int:
        return len(self.places) - 1

    @property
    def e_sampler(self):
        if "E" not in self._cache:
            gens = self.gen_vectors if len(self.gen_vectors) else np.zeros((1, self.nphi), dtype=np.int16)
            self._cache["E"] = make_sampler(self.vg, gens, self.enum_cap, self.walk)
        return self._cache["E"]

    @property
    def t_sampler(self):
        if "T" not in self._cache:
            E = self.e_sampler
            vg = self.vg
            gens = self.gen_vectors
            comms = [vg.commutator(a, b) for a, b in itertools.combinations(gens, 2)]
            seeds = np.array(comms + list(self.torsion_vectors), dtype=vg.dtype).reshape(-1, self.nphi)
            els = None
            if E.exact:
                if len(seeds) == 0:
                    els = np.zeros((1, self.nphi), dtype=vg.dtype)
                else:
                    els = vg.closure(seeds, conj_by=gens, cap=self.enum_cap)
            if els is not None:
                self._cache["T"] = ExactSampler(els)
            else:
                self._cache["T"] = LazyNormalWalk(vg, E, self.torsion_vectors, self.walk.r0_steps)
        return self._cache["T"]

    def describe(self, j: int) -> dict:
        out = {}
        for i, v in enumerate(self.places):
            h = self.hom_sets[i][int(self.frame[j, i])]
            out[v.label] = [self.group.label(g) for g in h.gens]
        return out

    def to_json(self) -> dict:
        return {"engine": self.engine, "group": self.group.name, "weight": self.weight.name,
                "places": [v.label for v in self.places], "frame_size": self.nphi,
                "conditions": self.sigma.to_json(), "base": self.base.to_json()}


def frame_size(G: FiniteGroup, places: Sequence[Place], sigma: LocalConditions = TRIVIAL_CONDITIONS,
               base: BaseField = RATIONALS, wild_tables: Iterable[WildTable] = ()) -> int:
    cache = _LocalCache(G, base, wild_tables)
    return math.prod(len(sigma.select(cache.get(v))) for v in places)


def build_generic(G: FiniteGroup, places: Sequence[Place], sigma: LocalConditions = TRIVIAL_CONDITIONS,
                  w: WeightFunction | str = "ind", base: BaseField = RATIONALS,
                  frame_cap: int = FRAME_CAP, enum_cap: int = ENUM_CAP,
                  walk: WalkParams = WalkParams(), wild_tables: Iterable[WildTable] = ()
                  ) -> GenericProfile:
    w = make_weight(G, w)
    cache = _LocalCache(G, base, wild_tables)
    hom_sets = tuple(cache.get(v) for v in places)
    rows = tuple(sigma.select(hs) for hs in hom_sets)
    size = math.prod(len(r) for r in rows)
    if size > frame_cap:
        raise CapExceededError(
            f"frame size prod |Sigma_p| = {size} exceeds the cap {frame_cap}; "
            "use fewer places, local conditions, or the abelian engine")
    if size == 0:
        frame = np.zeros((0, len(places)), dtype=np.int32)
    else:
        grids = np.meshgrid(*[np.array(r, dtype=np.int32) for r in rows], indexing="ij")
        frame = np.stack([g.ravel() for g in grids], axis=1) if grids else np.zeros((1, 0), np.int32)
    vecs, owner = [], []
    tors = []
    inv = np.ones(len(frame))
    for i, (v, hs) in enumerate(zip(places, hom_sets)):
        col = frame[:, i]
        gens = np.array([h.gens for h in hs.homs], dtype=np.int16).reshape(len(hs), -1)
        for j in range(gens.shape[1]):
            vecs.append(gens[col, j])
            owner.append(i)
        tors.append(np.array([h.torsion for h in hs.homs], dtype=np.int16)[col])
        if not v.is_archimedean:
            ex = np.array([local_exponent(h, w) for h in hs.homs], dtype=np.float64)
            inv *= float(v.norm) ** ex[col]
    gen_vectors = np.array(vecs, dtype=np.int16).reshape(len(vecs), len(frame))
    torsion_vectors = np.array(tors, dtype=np.int16).reshape(len(places), len(frame))
    surj = _surjective_columns(G, gen_vectors)
    return GenericProfile(G, w, sigma, base, tuple(places), hom_sets, rows, frame, gen_vectors,
                          tuple(owner), torsion_vectors, inv, surj, enum_cap, walk)


def _surjective_columns(G: FiniteGroup, vecs: np.ndarray) -> np.ndarray:
    n = vecs.shape[1]
    surj = np.ones(n, dtype=bool)
    if G.order == 1:
        return surj
    if len(vecs) == 0:
        return np.zeros(n, dtype=bool)
    for M in _maximal_subgroups(G):
        member = np.zeros(G.order, dtype=bool)
        member[list(M)] = True
        surj &= ~member[vecs].all(axis=0)
    return surj


# abelian engine

class AbelianBasis:
    """An explicit decomposition of an abelian subgroup H as a sum of cyclic groups."""

    def __init__(self, G: FiniteGroup, H: Iterable[int] | None = None):
        H = frozenset(range(G.order)) if H is None else frozenset(H)
        self.G = G
        self.H = H
        orders = [G.element_order(h) for h in sorted(H)]
        self.orders = _invariants_from_orders(orders) if len(H) > 1 else ()
        self.elements = self._search(sorted(H))
        # coordinates of every member of H
        self.coords: dict[int, tuple[int, ...]] = {}
        for z in itertools.product(*[range(n) for n in self.orders]):
            g = 0
            for b, k in zip(self.elements, z):
                g = G.mul(g, G.power(b, k))
            self.coords[g] = z
        if len(self.coords) != len(H):
            raise ValidationError("abelian basis search failed")

    def _search(self, members):
        G = self.G
        target = list(self.orders)

        def rec(i, chosen):
            if i == len(target):
                return chosen
            need = math.prod(target[: i + 1])
            for g in members:
                if G.element_order(g) != target[i]:
                    continue
                if len(G.generate(chosen + [g])) == need:
                    got = rec(i + 1, chosen + [g])
                    if got is not None:
                        return got
            return None

        out = rec(0, [])
        if out is None:
            raise ValidationError("no cyclic decomposition found")
        return out


class ModularSolver:
    """Counts solutions z of A z = w over Z/n for a fixed integer matrix A.

    For each prime power p^k || n the matrix is brought to diagonal form by
    invertible row operations (recorded) and column operations (not needed
    for counting): P A Q = diag(p^s_1, ..., p^s_r, 0, ...).
    """

    def __init__(self, A: np.ndarray, n: int):
        self.n = n
        self.rows, self.cols = A.shape
        self.parts = []
        m = n
        p = 2
        while m > 1:
            if m % p == 0:
                k = 0
                while m % p == 0:
                    m //= p
                    k += 1
                self.parts.append(self._reduce(A, p, k))
            p += 1

    @staticmethod
    def _valuation(M: np.ndarray, p: int, k: int) -> np.ndarray:
        val = np.zeros(M.shape, dtype=np.int64)
        q = 1
        for _ in range(k):
            q *= p
            val += (M % q == 0)
        return val

    def _reduce(self, A: np.ndarray, p: int, k: int):
        pk = p ** k
        M = np.asarray(A, dtype=np.int64) % pk
        r, c = M.shape
        P = np.eye(r, dtype=np.int64)
        diag = []
        row = 0
        active = np.ones(c, dtype=bool)
        while row < r:
            sub = M[row:][:, active]
            if sub.size == 0 or not sub.any():
                break
            val = self._valuation(sub, p, k)
            i, jj = np.unravel_index(np.argmin(val), val.shape)
            s = int(val[i, jj])
            if s >= k:
                break
            j = np.nonzero(active)[0][jj]
            i += row
            if i != row:
                M[[row, i]] = M[[i, row]]
                P[[row, i]] = P[[i, row]]
            unit = int(M[row, j]) // p ** s
            uinv = pow(unit, -1, pk)
            M[row] = M[row] * uinv % pk
            P[row] = P[row] * uinv % pk
            below = M[row + 1:, j] // p ** s
            if below.any():
                M[row + 1:] = (M[row + 1:] - np.outer(below, M[row])) % pk
                P[row + 1:] = (P[row + 1:] - np.outer(below, P[row])) % pk
            # column operations clear the pivot row without touching other rows
            M[row] = 0
            M[row, j] = p ** s
            active[j] = False
            diag.append(s)
            row += 1
        return (p, k, pk, P, diag)

    def count(self, W: np.ndarray) -> list[int]:
        """Solution counts for each right-hand side column of W (shape rows x m)."""
        W = np.asarray(W, dtype=np.int64).reshape(self.rows, -1)
        total = [1] * W.shape[1]
        for p, k, pk, P, diag in self.parts:
            V = (P @ (W % pk)) % pk
            rank = len(diag)
            ok = np.ones(W.shape[1], dtype=bool)
            for i, s in enumerate(diag):
                ok &= V[i] % p ** s == 0
            if rank < self.rows:
                ok &= ~V[rank:].any(axis=0)
            size = p ** (sum(diag) + k * (self.cols - rank))
            for t in range(W.shape[1]):
                total[t] = total[t] * size if ok[t] else 0
        return total


@dataclass(eq=False)
class FreePlace:
    """A tame place with unrestricted local conditions: a block Z/e + Z/g."""

    place: Place
    index: int  # position in the profile's S
    g: int
    t: int  # inertia coordinate of the local torsion element
    ys: tuple[tuple[int, int], ...]  # nonzero inertia images y with their exponents


@dataclass(eq=False)
class ExplicitPlace:
    """A place whose local data are carried by the Sigma-rows themselves."""

    place: Place
    index: int
    hs: LocalHomSet
    rows: tuple[int, ...]
    elements: np.ndarray  # joint image of the local group in G^rows
    torsion: np.ndarray  # image of the local torsion subgroup
    exps: tuple[int, ...]
    images: tuple[frozenset[int], ...]  # generator images of each row
    tors_rows: tuple[int, ...]


@dataclass(eq=False)
class AbelianProfile:
    engine: ClassVar[str] = "abelian"
    group: FiniteGroup
    weight: WeightFunction
    sigma: LocalConditions
    base: BaseField
    places: tuple[Place, ...]
    free: tuple[FreePlace, ...]
    explicit: tuple[ExplicitPlace, ...]
    mobius: tuple[tuple[frozenset[int], int], ...]
    _cache: dict = field(default_factory=dict, repr=False)

    def n_plain(self) -> int:
        return len(self.places) - 1

    @property
    def e(self) -> int:
        return self.group.exponent

    def basis(self, H: frozenset[int]) -> AbelianBasis:
        key = ("basis", H)
        if key not in self._cache:
            self._cache[key] = AbelianBasis(self.group, H)
        return self._cache[key]

    def to_json(self) -> dict:
        return {"engine": self.engine, "group": self.group.name, "weight": self.weight.name,
                "places": [v.label for v in self.places],
                "free_places": len(self.free), "explicit_places": [x.place.label for x in self.explicit],
                "conditions": self.sigma.to_json(), "base": self.base.to_json()}


def build_abelian(G: FiniteGroup, places: Sequence[Place], sigma: LocalConditions = TRIVIAL_CONDITIONS,
                  w: WeightFunction | str = "ind", base: BaseField = RATIONALS,
                  wild_tables: Iterable[WildTable] = ()) -> AbelianProfile:
    if not G.is_abelian:
        raise ValidationError(f"the abelian engine needs an abelian group; {G.name} is not")
    w = make_weight(G, w)
    e = G.exponent
    cache = _LocalCache(G, base, wild_tables)
    vg = VectorGroup(G)
    free, explicit = [], []
    for i, v in enumerate(places):
        tame = not v.is_archimedean and not is_wild(G, v)
        if tame and sigma.rule_for(v) == "all":
            g = math.gcd(v.q - 1, e)
            t = ((v.q - 1) // base.m) % g if (v.q - 1) % base.m == 0 else 0
            ys = tuple((y, w(y)) for y in range(1, G.order) if G.power(y, g) == 0)
            free.append(FreePlace(v, i, g, t, ys))
            continue
        hs = cache.get(v)
        rows = sigma.select(hs)
        gens = np.array([[hs[r].gens[j] for r in rows] for j in range(len(hs.generators))],
                        dtype=np.int16).reshape(len(hs.generators), len(rows))
        if len(rows) == 0:
            els = np.zeros((1, 0), dtype=np.int16)
            tel = els
        else:
            seeds = gens if len(gens) else np.zeros((1, len(rows)), dtype=np.int16)
            els = vg.closure(seeds, cap=10**6)
            tv = np.array([hs[r].torsion for r in rows], dtype=np.int16).reshape(1, -1)
            tel = vg.closure(tv, cap=10**6)
        exps = tuple(0 if v.is_archimedean else local_exponent(hs[r], w) for r in rows)
        images = tuple(frozenset(hs[r].gens) for r in rows)
        explicit.append(ExplicitPlace(v, i, hs, tuple(rows), els, tel, exps, images,
                                      tuple(hs[r].torsion for r in rows)))
    return AbelianProfile(G, w, sigma, base, tuple(places), tuple(free), tuple(explicit),
                          tuple(_subgroup_mobius(G)))


def build_profile(G: FiniteGroup, places: Sequence[Place] | str,
                  sigma: LocalConditions = TRIVIAL_CONDITIONS, w: WeightFunction | str = "ind",
                  base: BaseField = RATIONALS, engine: str = "auto", frame_cap: int = FRAME_CAP,
                  enum_cap: int = ENUM_CAP, walk: WalkParams = WalkParams(),
                  wild_tables: Iterable[WildTable] = ()):
    """Profile of F_{K,S} for the chosen engine ("generic", "abelian" or "auto")."""
    if isinstance(places, str) or not all(isinstance(v, Place) for v in places):
        places = select_places(places, base)
    places = tuple(places)
    if not all(a in places for a in base.archimedean):
        raise ValidationError("S must contain every archimedean place")
    if engine == "auto":
        size = frame_size(G, places, sigma, base, wild_tables)
        engine = "generic" if size <= frame_cap or not G.is_abelian else "abelian"
    if engine == "generic":
        return build_generic(G, places, sigma, w, base, frame_cap, enum_cap, walk, wild_tables)
    if engine == "abelian":
        return build_abelian(G, places, sigma, w, base, wild_tables)
    raise ValidationError(f"unknown engine {engine!r}")


# relation bundles

@dataclass(frozen=True, eq=False)
class RelationBundle:
    """Sampled relations. ``plain`` and ``r0`` hold engine-specific evaluation data."""

    engine: str
    mode: str
    seed: int
    index: int
    plain: object
    r0: object | None


@dataclass(frozen=True, eq=False)
class AbelianRelations:
    alpha: np.ndarray  # (rels, free) Frobenius coefficients mod e
    beta: np.ndarray  # (rels, free) inertia coefficients mod g_p
    expl: tuple[np.ndarray, ...]  # per explicit place: (rels, rows) joint values


def sample_group(profile, mode: str = "no-torsion", seed: int | None = None,
                 index: int = 0) -> RelationBundle:
    """Draw r_1..r_{|S|-1} (and r_0 in structural mode) from the stream (seed, index)."""
    _check_mode(mode)
    rng = rng_for(seed, index)
    if profile.engine == "generic":
        k = profile.n_plain()
        plain = profile.e_sampler.draw(rng, k) if k else np.zeros((0, profile.nphi), np.int16)
        r0 = profile.t_sampler.draw(rng, 1)[0] if mode == "structural" else None
        return RelationBundle("generic", mode, seed, index, plain, r0)
    return RelationBundle("abelian", mode, seed, index, *_sample_abelian(profile, mode, rng))


def _sample_abelian(profile: AbelianProfile, mode: str, rng: np.random.Generator):
    k = profile.n_plain()
    e = profile.e
    gs = np.array([f.g for f in profile.free], dtype=np.int64)
    ts = np.array([f.t for f in profile.free], dtype=np.int64)
    alpha = rng.integers(0, e, size=(k, len(gs)))
    beta = (rng.random((k, len(gs))) * gs).astype(np.int64) if len(gs) else np.zeros((k, 0), np.int64)
    expl = tuple(x.elements[rng.integers(0, len(x.elements), size=k)] for x in profile.explicit)
    plain = AbelianRelations(alpha, beta, expl)
    r0 = None
    if mode == "structural":
        u = (rng.random(len(gs)) * gs).astype(np.int64)
        r0 = AbelianRelations(np.zeros((1, len(gs)), np.int64),
                              (u * ts % np.maximum(gs, 1)).reshape(1, -1),
                              tuple(x.torsion[rng.integers(0, len(x.torsion), size=1)]
                                    for x in profile.explicit))
    return plain, r0


def _stack(bundle: RelationBundle) -> AbelianRelations:
    if bundle.r0 is None:
        return bundle.plain
    a, b = bundle.plain, bundle.r0
    return AbelianRelations(np.vstack([b.alpha, a.alpha]), np.vstack([b.beta, a.beta]),
                            tuple(np.vstack([y, x]) for x, y in zip(a.expl, b.expl)))


# counting

def count_surjections(bundle: RelationBundle, profile, X: float, check_support: bool = True) -> int:
    """N: surjective homs from the sampled group with |inv| <= X (and local data in Sigma)."""
    return count_surjections_multi(bundle, profile, [X], check_support)[0]


def count_surjections_multi(bundle: RelationBundle, profile, Xs: Sequence[float],
                            check_support: bool = True) -> list[int]:
    if bundle.engine != profile.engine:
        raise ValidationError("bundle and profile come from different engines")
    if check_support:
        cache = _LocalCache(profile.group, profile.base)
        _check_support(profile.group, profile.weight, profile.sigma, profile.base,
                       profile.places, max(Xs), cache)
    if profile.engine == "generic":
        alive = profile.surjective.copy()
        if len(bundle.plain):
            alive &= ~np.asarray(bundle.plain).any(axis=0)
        if bundle.r0 is not None:
            alive &= np.asarray(bundle.r0) == 0
        return [int(np.count_nonzero(alive & (profile.inv <= X))) for X in Xs]
    return _abelian_counts(profile, _stack(bundle), Xs)


@dataclass(frozen=True)
class Pattern:
    """Ramification data: a row at each explicit place and nonzero inertia at some free places."""

    rows: tuple[int, ...]  # position within each explicit place's rows
    ram: tuple[tuple[int, int], ...]  # (free index, y)
    inv: int
    elements: frozenset[int]


def patterns(profile: AbelianProfile, X: float) -> list[Pattern]:
    key = ("patterns", X)
    if key in profile._cache:
        return profile._cache[key]
    ex_choices = []
    for xp in profile.explicit:
        opts = []
        for pos, r in enumerate(xp.rows):
            norm = 1 if xp.place.is_archimedean else xp.place.norm ** xp.exps[pos]
            if norm <= X:
                opts.append((pos, norm, xp.images[pos]))
        ex_choices.append(opts)
    ramifiable = []
    for fi, f in enumerate(profile.free):
        opts = [(y, f.place.norm ** k) for y, k in f.ys if f.place.norm ** k <= X]
        if opts:
            ramifiable.append((fi, opts))
    out = []
    for combo in itertools.product(*ex_choices):
        inv0 = math.prod(c[1] for c in combo)
        if inv0 > X:
            continue
        elems0 = frozenset().union(*[c[2] for c in combo]) if combo else frozenset()
        rows = tuple(c[0] for c in combo)

        def rec(start, inv, ram, elems):
            out.append(Pattern(rows, tuple(ram), inv, elems))
            for t in range(start, len(ramifiable)):
                fi, opts = ramifiable[t]
                for y, nm in opts:
                    if inv * nm <= X:
                        rec(t + 1, inv * nm, ram + [(fi, y)], elems | {y})

        rec(0, inv0, [], elems0)
    profile._cache[key] = out
    return out


def _additive(G: FiniteGroup):
    basis = AbelianBasis(G)
    coords = np.array([basis.coords[g] for g in range(G.order)], dtype=np.int64).reshape(G.order, -1)
    radix = np.array(basis.orders, dtype=np.int64)
    lookup = {tuple(c): g for g, c in enumerate(coords.tolist())}
    return basis, coords, radix, lookup


def _abelian_counts(profile: AbelianProfile, rel: AbelianRelations, Xs: Sequence[float]) -> list[int]:
    G = profile.group
    pats = patterns(profile, max(Xs))
    nrel = rel.alpha.shape[0]
    if "additive" not in profile._cache:
        profile._cache["additive"] = _additive(G)
    basis, coords, radix, lookup = profile._cache["additive"]
    r = len(radix)
    # constants c_i(pattern) in G-coordinates, shape (patterns, rels, r)
    C = np.zeros((len(pats), nrel, r), dtype=np.int64)
    for n, pat in enumerate(pats):
        acc = np.zeros((nrel, r), dtype=np.int64)
        for fi, y in pat.ram:
            acc += rel.beta[:, fi][:, None] * coords[y][None, :]
        for xp_i, pos in enumerate(pat.rows):
            acc += coords[rel.expl[xp_i][:, pos]]
        C[n] = acc % radix if r else acc
    # element index of -c for each (pattern, relation)
    if r:
        negc = (-C) % radix
        flat = negc.reshape(-1, r)
        elems = np.array([lookup[tuple(t)] for t in flat.tolist()], dtype=np.int64).reshape(len(pats), nrel)
    else:
        elems = np.zeros((len(pats), nrel), dtype=np.int64)
    total = np.zeros(len(pats), dtype=object)
    solvers: dict[int, ModularSolver] = {}
    for H, mu in profile.mobius:
        inH = np.zeros(G.order, dtype=bool)
        inH[list(H)] = True
        ok = np.array([pat.elements <= H for pat in pats], dtype=bool)
        ok &= inH[elems].all(axis=1) if nrel else True
        if not ok.any():
            continue
        hb = profile.basis(H)
        counts = np.ones(len(pats), dtype=object)
        idx = np.nonzero(ok)[0]
        hcoord = np.zeros((G.order, max(len(hb.orders), 1)), dtype=np.int64)
        for g, z in hb.coords.items():
            if z:
                hcoord[g, :len(z)] = z
        for j, n in enumerate(hb.orders):
            if nrel == 0:
                got = [n ** len(profile.free)] * len(idx)
            else:
                if n not in solvers:
                    solvers[n] = ModularSolver(rel.alpha % n, n)
                got = solvers[n].count(hcoord[elems[idx], j].T)
            for t, cnt in zip(idx, got):
                counts[t] *= cnt
        counts[~ok] = 0
        total += mu * counts
    invs = np.array([p.inv for p in pats], dtype=np.float64)
    return [int(sum(total[invs <= X])) for X in Xs]


# exact survival and expectations

@dataclass(frozen=True)
class Survival:
    """Per-column exact kill data of the generic engine.

    ``plain_size[j]`` = |proj_j E| and ``torsion_size[j]`` = |proj_j T|, so a
    plain relation kills column j with probability 1/plain_size[j] and r_0 with
    probability 1/torsion_size[j].
    """

    plain_size: np.ndarray
    torsion_size: np.ndarray

    def probability(self, j: int, n_plain: int, mode: str) -> Fraction:
        p = Fraction(1, int(self.plain_size[j])) ** n_plain
        if mode == "structural":
            p /= int(self.torsion_size[j])
        return p


def exact_survival(profile: GenericProfile) -> Survival:
    """Projection sizes from local data alone (no enumeration of E)."""
    if "survival" in profile._cache:
        return profile._cache["survival"]
    G = profile.group
    plain = np.zeros(profile.nphi, dtype=np.int64)
    tors = np.zeros(profile.nphi, dtype=np.int64)
    memo: dict = {}
    for j in range(profile.nphi):
        gens = tuple(sorted(set(profile.gen_vectors[:, j].tolist())))
        ts = tuple(sorted(set(profile.torsion_vectors[:, j].tolist())))
        key = (gens, ts)
        if key not in memo:
            memo[key] = (len(G.generate(gens)), len(_derived_plus(G, gens, ts)))
        plain[j], tors[j] = memo[key]
    out = Survival(plain, tors)
    profile._cache["survival"] = out
    return out


def enumerated_survival(profile: GenericProfile) -> Survival | None:
    """The same projection sizes read off the enumerated E and T, when they fit."""
    E, T = profile.e_sampler, profile.t_sampler
    if not (E.exact and T.exact):
        return None
    plain = np.array([len(np.unique(E.elements[:, j])) for j in range(profile.nphi)], dtype=np.int64)
    tors = np.array([len(np.unique(T.elements[:, j])) for j in range(profile.nphi)], dtype=np.int64)
    return Survival(plain, tors)


@dataclass(frozen=True)
class ExpectedCount:
    """E[N] split into the part surjective on a fixed base set and the remainder.

    ``stable`` counts homs already surjective on the base places (the places of
    norm <= X together with the archimedean, wild and Sigma-restricted places);
    adding more places to S leaves it unchanged.  ``total`` is E[N] itself.
    """

    total: Fraction
    stable: Fraction

    @property
    def correction(self) -> Fraction:
        return self.total - self.stable


def _base_places(profile, X: float) -> set[int]:
    # archimedean, wild and restricted places are part of the base in both engines
    G, sigma = profile.group, profile.sigma
    return {i for i, v in enumerate(profile.places)
            if v.is_archimedean or v.norm <= X or is_wild(G, v) or sigma.rule_for(v) != "all"}


def exact_expected_count(profile, X: float, mode: str = "no-torsion") -> ExpectedCount:
    _check_mode(mode)
    k = profile.n_plain()
    base = _base_places(profile, X)
    if profile.engine == "generic":
        sv = exact_survival(profile)
        owner = np.array(profile.gen_owner, dtype=np.int64)
        sel = np.isin(owner, sorted(base))
        base_surj = _surjective_columns(profile.group, profile.gen_vectors[sel])
        total = Fraction(0)
        stable = Fraction(0)
        for j in np.nonzero(profile.surjective & (profile.inv <= X))[0]:
            p = sv.probability(int(j), k, mode)
            total += p
            if base_surj[j]:
                stable += p
        return ExpectedCount(total, stable)
    G = profile.group
    pats = patterns(profile, X)
    n_free = len(profile.free)
    n_base = sum(1 for f in profile.free if f.index in base)
    total = Fraction(0)
    stable = Fraction(0)
    for pat in pats:
        w = Fraction(1, G.order ** k)
        if mode == "structural":
            w /= _pattern_torsion_size(profile, pat)
        for H, mu in profile.mobius:
            if pat.elements <= H:
                total += w * mu * len(H) ** n_free
                stable += w * mu * len(H) ** n_base * G.order ** (n_free - n_base)
    return ExpectedCount(total, stable)


def _pattern_torsion_size(profile: AbelianProfile, pat: Pattern) -> int:
    G = profile.group
    ts = [G.power(y, profile.free[fi].t) for fi, y in pat.ram]
    ts += [xp.tors_rows[pos] for xp, pos in zip(profile.explicit, pat.rows)]
    return len(G.generate(ts))


def abelian_survival(profile: AbelianProfile, phi: dict[int, int], mode: str) -> Fraction:
    """Exact survival of one local tuple, given as place index -> row of its hom set."""
    G = profile.group
    cache = _LocalCache(G, profile.base)
    images, tors = set(), set()
    for i, v in enumerate(profile.places):
        h = cache.get(v)[phi[i]]
        images |= set(h.gens)
        tors.add(h.torsion)
    p = Fraction(1, len(G.generate(images))) ** profile.n_plain()
    if mode == "structural":
        p /= len(G.generate(tors))
    return p


def abelian_to_generic(bundle: RelationBundle, ab: AbelianProfile, gen: GenericProfile) -> RelationBundle:
    """Evaluate abelian-engine relations on every column of a generic frame.

    For a column phi the value is the sum over places of phi_p(r_p): a * x + b * y
    at free tame places (phi_p = (x, y)), and the sampled joint value at the
    chosen row at explicit places.
    """
    if [v.label for v in ab.places] != [v.label for v in gen.places]:
        raise ValidationError("profiles must share S")
    G = gen.group
    vg = VectorGroup(G)
    pos_of = {x.index: (n, {r: c for c, r in enumerate(x.rows)}) for n, x in enumerate(ab.explicit)}
    free_of = {f.index: n for n, f in enumerate(ab.free)}

    def evaluate(rel: AbelianRelations) -> np.ndarray:
        out = np.zeros((rel.alpha.shape[0], gen.nphi), dtype=vg.dtype)
        for i in range(len(gen.places)):
            rows = gen.frame[:, i]
            hs = gen.hom_sets[i]
            if i in free_of:
                fi = free_of[i]
                xs = np.array([hs[r].gens[0] for r in range(len(hs))])[rows]
                ys = np.array([hs[r].gens[1] for r in range(len(hs))])[rows]
                for t in range(rel.alpha.shape[0]):
                    a, b = int(rel.alpha[t, fi]), int(rel.beta[t, fi])
                    px = np.array([G.power(g, a) for g in range(G.order)])[xs]
                    py = np.array([G.power(g, b) for g in range(G.order)])[ys]
                    out[t] = vg.mul(out[t], vg.mul(px, py))
            else:
                n, col_of = pos_of[i]
                cols = np.array([col_of[int(r)] for r in rows], dtype=np.int64)
                out = vg.mul(out, rel.expl[n][:, cols])
        return out

    plain = evaluate(bundle.plain)
    r0 = evaluate(bundle.r0)[0] if bundle.r0 is not None else None
    return RelationBundle("generic", bundle.mode, bundle.seed, bundle.index, plain, r0)


# experiments

@dataclass
class SimReport:
    kind: str
    config: dict
    engine: str
    mode: str
    rows: list[dict]
    summary: dict
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"kind": self.kind, "version": __version__, "engine": self.engine,
                "mode": self.mode, "config": self.config, "summary": self.summary,
                "rows": self.rows, "notes": self.notes}


def _matching_columns(profile: GenericProfile, target: FiniteLocalObject) -> np.ndarray:
    """Columns psi of Phi with Epi(G_psi, target) != 0: surjective, equal to the
    target's data on its places and unramified at the other places of S."""
    if target.group is not profile.group and target.group.name != profile.group.name:
        raise ValidationError("target group differs from the profile's group")
    keys = [v.key for v in profile.places]
    if not set(target.places) <= set(keys):
        raise ValidationError("target places must lie in the profile's S")
    ok = profile.surjective.copy()
    for i, v in enumerate(profile.places):
        hs = profile.hom_sets[i]
        rows = profile.frame[:, i]
        if v.key in target.data:
            want = target.data[v.key].gens
            good = np.array([hs[r].gens == want for r in range(len(hs))], dtype=bool)
        else:
            good = np.array([hs[r].unramified and not (v.is_archimedean and hs[r].gens[0] != 0)
                             for r in range(len(hs))], dtype=bool)
        ok &= good[rows]
    return np.nonzero(ok)[0]


def surjective_target(profile: GenericProfile, which: int = 0) -> FiniteLocalObject:
    """The ``which``-th surjective column of Phi as a target object over all of S."""
    cols = np.nonzero(profile.surjective)[0]
    if len(cols) <= which:
        raise ValidationError("no surjective local tuple in this frame")
    j = int(cols[which])
    data = {}
    for i, v in enumerate(profile.places):
        data[v.key] = datum_from_row(profile.hom_sets[i], int(profile.frame[j, i]))
    return FiniteLocalObject(profile.group, tuple(data), data)


def _map(fn, items, workers: int = 1) -> list:
    """Ordered map, threaded when workers > 1; every item owns its own RNG stream."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def moment_experiment(profile: GenericProfile, target: FiniteLocalObject, samples: int,
                      seed: int, mode: str = "no-torsion", block: int = 4096,
                      workers: int = 1) -> SimReport:
    """Empirical mean of #Epi(G_sample, target) against the closed form and the exact law.

    Samples are drawn in blocks; block b uses the stream (seed, b), so results
    are reproducible and blocks could run in parallel.
    """
    _check_mode(mode)
    if profile.engine != "generic":
        raise ValidationError("moment experiments use the generic engine")
    cols = _matching_columns(profile, target)
    k = profile.n_plain()
    sizes = [min(block, samples - start) for start in range(0, samples, block)]

    def run_block(b: int) -> np.ndarray:
        n = sizes[b]
        rng = rng_for(seed, b)
        alive = np.ones((n, len(cols)), dtype=bool)
        if k and len(cols):
            draws = profile.e_sampler.draw(rng, n * k, cols).reshape(n, k, len(cols))
            alive &= ~draws.any(axis=1)
        if mode == "structural" and len(cols):
            alive &= profile.t_sampler.draw(rng, n, cols) == 0
        return alive.sum(axis=1)

    counts = np.concatenate(_map(run_block, range(len(sizes)), workers)).astype(np.int64)
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("nan")
    sv = exact_survival(profile)
    exact = sum((sv.probability(int(j), k, mode) for j in cols), Fraction(0))
    closed = moment_closed_form(target, profile.base)
    rows = [{"column": int(j), "local_data": profile.describe(int(j)),
             "exact_survival": str(sv.probability(int(j), k, mode))} for j in cols]
    summary = {"samples": samples, "mean": mean, "std_error": se,
               "closed_form": str(closed), "closed_form_float": float(closed),
               "exact": str(exact), "exact_float": float(exact),
               "z_closed": (mean - float(closed)) / se if se and se > 0 else None,
               "sampler": "enumeration" if profile.e_sampler.exact else "product-replacement"}
    notes = []
    if exact != closed:
        notes.append("exact survival under the literal relation law differs from the closed form")
    return SimReport("moments", {"target": target.to_json(), "seed": seed, "samples": samples,
                                 "block": block, "profile": profile.to_json()},
                     profile.engine, mode, rows, summary, notes)


def lln_experiment(G: FiniteGroup, w: WeightFunction | str, Xs: Sequence[int], samples: int,
                   seed: int, sigma: LocalConditions = TRIVIAL_CONDITIONS, base: BaseField = RATIONALS,
                   mode: str = "structural", engine: str = "abelian", places=None,
                   pmax: int = 10**6, workers: int = 1) -> SimReport:
    """Ratios N/A(X) and N/(c X^{1/a} (log X)^{b-1}) along a schedule of X.

    The same sampled groups are counted at every X (S covers the largest X), so
    each sample traces one realisation of the counting function.
    """
    _check_mode(mode)
    w = make_weight(G, w)
    Xs = sorted(int(x) for x in Xs)
    notes = []
    if not min_weight_gen_check(G, w):
        notes.append("minimal-weight elements do not generate G: no asymptotic is predicted; "
                     "exploratory run")
    places = places or f"norm<={Xs[-1]}"
    profile = build_profile(G, places, sigma, w, base, engine=engine)
    sp = series_profile(G, w, Xs[-1], sigma, base)
    A = [partial_sum(sp, X) for X in Xs]
    try:
        pred = prediction(G, w, sigma, base, pmax=pmax)
        P = [predicted_growth(pred, X) for X in Xs]
    except ValidationError as exc:
        pred, P = None, [float("nan")] * len(Xs)
        notes.append(f"no prediction: {exc}")
    def one(s: int) -> list[int]:
        return count_surjections_multi(sample_group(profile, mode, seed, s), profile, Xs)

    N = np.array(_map(one, range(samples), workers), dtype=np.float64).reshape(samples, len(Xs))
    rows = []
    for i, X in enumerate(Xs):
        ex = exact_expected_count(profile, X, mode)
        rA = N[:, i] / float(A[i])
        rP = N[:, i] / P[i]
        rows.append({"X": X, "A": str(A[i]), "A_float": float(A[i]), "predicted": P[i],
                     "expected_N": float(ex.total), "mean_N": float(N[:, i].mean()),
                     "mean_ratio_A": float(rA.mean()),
                     "var_ratio_A": float(rA.var(ddof=1)) if samples > 1 else float("nan"),
                     "mean_ratio_pred": float(rP.mean()),
                     "var_ratio_pred": float(rP.var(ddof=1)) if samples > 1 else float("nan"),
                     "counts": [int(x) for x in N[:, i]]})
    var = [r["var_ratio_A"] for r in rows]
    summary = {"samples": samples, "places": len(profile.places),
               "variance_strictly_decreasing": all(a > b for a, b in zip(var, var[1:]))
               if len(var) > 1 else None,
               "final_mean_ratio_A": rows[-1]["mean_ratio_A"],
               "final_mean_ratio_pred": rows[-1]["mean_ratio_pred"]}
    if len(Xs) == 1:
        notes.append("single X: point estimate only")
    notes.append("mu_K is approximated at S = S(X_max)")
    cfg = {"group": G.name, "weight": w.name, "X": Xs, "samples": samples, "seed": seed,
           "conditions": sigma.to_json(), "base": base.to_json(), "places": str(places)}
    return SimReport("lln", cfg, profile.engine, mode, rows, summary, notes)


def grunwald_diagnostic(profile: GenericProfile, samples: int, seed: int,
                        sub_places: Sequence | None = None, mode: str = "no-torsion") -> SimReport:
    """How often each local tuple on a sub-S is realised by a surviving hom."""
    _check_mode(mode)
    if profile.engine != "generic":
        raise ValidationError("the Grunwald diagnostic needs the generic engine")
    keys = [v.key for v in profile.places]
    subs = [place_of(k).key for k in (sub_places or keys)]
    idx = [keys.index(k) for k in subs]
    candidates = list(itertools.product(*[profile.rows[i] for i in idx]))
    cand_index = {c: n for n, c in enumerate(candidates)}
    hits = np.zeros(len(candidates), dtype=np.int64)
    sub_frame = profile.frame[:, idx]
    for s in range(samples):
        b = sample_group(profile, mode, seed, s)
        alive = np.ones(profile.nphi, dtype=bool)
        if len(b.plain):
            alive &= ~np.asarray(b.plain).any(axis=0)
        if b.r0 is not None:
            alive &= np.asarray(b.r0) == 0
        seen = {tuple(r) for r in sub_frame[alive].tolist()}
        for c in seen:
            hits[cand_index[c]] += 1
    G = profile.group
    rows = []
    for c, h in zip(candidates, hits):
        data = {profile.places[i].label: [G.label(g) for g in profile.hom_sets[i][r].gens]
                for i, r in zip(idx, c)}
        rows.append({"tuple": data, "frequency": h / samples if samples else 0.0})
    rows.sort(key=lambda r: -r["frequency"])
    freqs = [r["frequency"] for r in rows]
    summary = {"samples": samples, "tuples": len(rows),
               "mean_frequency": float(np.mean(freqs)) if freqs else 0.0,
               "always_realised": sum(1 for f in freqs if f == 1.0)}
    return SimReport("grunwald", {"seed": seed, "samples": samples, "sub_places": [str(k) for k in subs],
                                  "profile": profile.to_json()}, "generic", mode, rows, summary)


def gap_report(profile: GenericProfile) -> SimReport:
    """Per-tuple exact survival under the literal r_0 law next to the closed form."""
    sv = exact_survival(profile)
    en = enumerated_survival(profile)
    k = profile.n_plain()
    rows = []
    consistent = True
    for j in np.nonzero(profile.surjective)[0]:
        j = int(j)
        target = {}
        for i, v in enumerate(profile.places):
            target[v.key] = datum_from_row(profile.hom_sets[i], int(profile.frame[j, i]))
        obj = FiniteLocalObject(profile.group, tuple(target), target)
        closed = moment_closed_form(obj, profile.base)
        ps = sv.probability(j, k, "structural")
        pn = sv.probability(j, k, "no-torsion")
        row = {"column": j, "local_data": profile.describe(j), "structural": str(ps),
               "no_torsion": str(pn), "closed_form": str(closed), "gap": str(ps - closed),
               "torsion_image_order": int(sv.torsion_size[j])}
        if en is not None:
            # direct coordinate counts in the enumerated E and T
            E, T = profile.e_sampler.elements, profile.t_sampler.elements
            pe = Fraction(int(np.count_nonzero(E[:, j] == 0)), len(E))
            pt = Fraction(int(np.count_nonzero(T[:, j] == 0)), len(T))
            row["enumerated_structural"] = str(pe ** k * pt)
            consistent &= pe ** k * pt == ps
        consistent &= Fraction(0) <= ps <= 1
        rows.append(row)
    total_s = sum((Fraction(r["structural"]) for r in rows), Fraction(0))
    total_c = sum((Fraction(r["closed_form"]) for r in rows), Fraction(0))
    summary = {"tuples": len(rows), "sum_structural": str(total_s), "sum_closed_form": str(total_c),
               "enumerated": en is not None, "consistent": bool(consistent),
               "tuples_with_gap": sum(1 for r in rows if Fraction(r["gap"]) != 0)}
    return SimReport("gap", {"profile": profile.to_json()}, "generic", "structural", rows, summary)
