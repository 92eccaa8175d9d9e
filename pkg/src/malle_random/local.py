"""Local homomorphism sets Hom(G_{K_v}, G) at archimedean, tame and wild places.

Finite places carry two abstract generators, a Frobenius lift ``sigma`` and a
tame inertia generator ``tau`` with ``sigma tau sigma^-1 = tau^q``.  When p
divides |G| the homomorphisms come from a wild table instead (JSON, see
``load_wild_table``); two such tables ship with the package.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import MissingDataError, ValidationError
from .groups import FiniteGroup, WeightFunction, parse_cycles, parse_group

log = logging.getLogger(__name__)

WILD_FORMAT = "malle-random/wild-table"
WILD_VERSIONS = (1,)


@dataclass(frozen=True)
class Place:
    kind: str  # "real" | "complex" | "finite"
    p: int = 0
    q: int = 0
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("real", "complex", "finite"):
            raise ValidationError(f"unknown place kind {self.kind!r}")
        if self.kind == "finite":
            if self.p < 2 or self.q < 2:
                raise ValidationError("finite place needs p, q >= 2")
            k = self.q
            while k % self.p == 0:
                k //= self.p
            if k != 1:
                raise ValidationError(f"q = {self.q} is not a power of p = {self.p}")
        elif self.q:
            raise ValidationError("archimedean places have no residue field")
        if not self.label:
            object.__setattr__(self, "label", self.kind if self.is_archimedean else str(self.q))

    @property
    def is_archimedean(self) -> bool:
        return self.kind != "finite"

    @property
    def norm(self) -> int:
        return 1 if self.is_archimedean else self.q

    @property
    def key(self) -> int | str:
        return self.label if self.is_archimedean else self.p if self.q == self.p else self.label

    @classmethod
    def real(cls) -> "Place":
        return cls("real", label="inf")

    @classmethod
    def complex(cls, label: str = "C") -> "Place":
        return cls("complex", label=label)

    @classmethod
    def finite(cls, p: int, q: int | None = None, label: str = "") -> "Place":
        return cls("finite", p, q or p, label)


def primes_upto(n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for i in range(2, math.isqrt(n) + 1):
        if sieve[i]:
            sieve[i * i::i] = False
    return np.nonzero(sieve)[0].astype(np.int64)


def rational_places(bound: int, real: bool = True) -> list[Place]:
    """The real place followed by the rational primes up to ``bound``."""
    out = [Place.real()] if real else []
    out.extend(Place.finite(int(p)) for p in primes_upto(bound))
    return out


def place_of(key: int | str | Place) -> Place:
    if isinstance(key, Place):
        return key
    if isinstance(key, str) and key.lower() in ("inf", "real", "infinity", "oo"):
        return Place.real()
    return Place.finite(int(key))


@dataclass(frozen=True)
class LocalHom:
    gens: tuple[int, ...]  # images of the place's abstract generators (element indices)
    inertia: int  # generator of the inertia image
    torsion: int  # image of the local root of unity of order m
    source: str  # "real" | "complex" | "tame" | "wild"
    disc_exponent: int | None = None  # wild rows only
    label: str = ""

    @property
    def unramified(self) -> bool:
        return self.inertia == 0


@dataclass(frozen=True)
class LocalHomSet:
    place: Place
    group: FiniteGroup
    generators: tuple[str, ...]
    homs: tuple[LocalHom, ...]
    frobenius_generator: int | None = None

    def __len__(self) -> int:
        return len(self.homs)

    def __iter__(self):
        return iter(self.homs)

    def __getitem__(self, i: int) -> LocalHom:
        return self.homs[i]

    def unramified(self) -> tuple[int, ...]:
        return tuple(i for i, h in enumerate(self.homs) if h.unramified)

    def exponents(self, w: WeightFunction) -> list[int]:
        return [local_exponent(h, w) for h in self.homs]


# wild tables

@dataclass(frozen=True)
class WildTable:
    p: int
    q: int
    group_spec: str
    generators: tuple[str, ...]
    frobenius_generator: int | None
    rows: tuple[dict, ...]
    path: str = ""

    def matches(self, G: FiniteGroup) -> bool:
        H = parse_group(self.group_spec)
        return H.degree == G.degree and set(H.elements) == set(G.elements)


def load_wild_table(src: str | Path | Mapping) -> WildTable:
    """Read a wild table and check its structural invariants."""
    if isinstance(src, Mapping):
        data, path = dict(src), "<dict>"
    else:
        path = str(src)
        with open(src) as fh:
            data = json.load(fh)
    if data.get("format") != WILD_FORMAT or data.get("version") not in WILD_VERSIONS:
        raise ValidationError(f"{path}: not a versioned wild table (format/version missing)")
    gens = tuple(data["generators"])
    rows = tuple(data["rows"])
    if not data.get("torsion_column", False):
        raise ValidationError(f"{path}: torsion column is mandatory")
    G = parse_group(data["group"])
    table = WildTable(int(data["p"]), int(data["q"]), data["group"], gens,
                      data.get("frobenius_generator"), rows, path)
    _check_rows(table, G)
    return table


def _check_rows(table: WildTable, G: FiniteGroup) -> None:
    seen = set()
    unram = 0
    for k, row in enumerate(table.rows):
        imgs = tuple(G.idx(parse_cycles(s, G.degree)) for s in row["images"])
        if len(imgs) != len(table.generators):
            raise ValidationError(f"row {k}: expected {len(table.generators)} generator images")
        if imgs in seen:
            raise ValidationError(f"row {k}: duplicate homomorphism")
        seen.add(imgs)
        inertia = G.idx(parse_cycles(row["inertia"], G.degree))
        G.idx(parse_cycles(row["torsion"], G.degree))
        nu = int(row["exponent"])
        if nu < 0:
            raise ValidationError(f"row {k}: negative exponent")
        if (nu == 0) != (inertia == 0):
            raise ValidationError(f"row {k}: exponent 0 must coincide with trivial inertia")
        unram += inertia == 0
    if unram != G.order:
        raise ValidationError(
            f"{table.path}: {unram} unramified rows, expected |G| = {G.order}")


@lru_cache(maxsize=None)
def bundled_wild_tables() -> tuple[WildTable, ...]:
    out = []
    pkg = resources.files("malle_random") / "data"
    for entry in sorted(pkg.iterdir(), key=lambda e: e.name):
        if entry.name.startswith("wild_") and entry.name.endswith(".json"):
            with resources.as_file(entry) as path:
                out.append(load_wild_table(path))
    return tuple(out)


def find_wild_table(G: FiniteGroup, v: Place,
                    extra: Iterable[WildTable] = ()) -> WildTable | None:
    for t in list(extra) + list(bundled_wild_tables()):
        if t.p == v.p and t.q == v.q and t.matches(G):
            return t
    return None


# enumeration

def is_wild(G: FiniteGroup, v: Place) -> bool:
    return not v.is_archimedean and G.order % v.p == 0


def _torsion_exp(q: int, m: int) -> int | None:
    if m == 1:
        return 0
    if (q - 1) % m == 0:
        return (q - 1) // m
    return None


def local_hom_set(G: FiniteGroup, v: Place, wild_table: WildTable | None = None,
                  m: int = 2, wild_tables: Iterable[WildTable] = ()) -> LocalHomSet:
    """Enumerate Hom(G_{K_v}, G) together with inertia, exponent and torsion data."""
    if v.kind == "complex":
        return LocalHomSet(v, G, (), (LocalHom((), 0, 0, "complex", label="trivial"),))
    if v.kind == "real":
        homs = tuple(LocalHom((x,), 0, x, "real", label=G.label(x))
                     for x in range(G.order) if G.element_order(x) <= 2)
        return LocalHomSet(v, G, ("c",), homs)
    if is_wild(G, v):
        table = wild_table or find_wild_table(G, v, wild_tables)
        if table is None:
            raise MissingDataError(
                f"wild data required: p = {v.p} divides |G| = {G.order} for {G.name}")
        return _wild_homs(G, v, table)
    return _tame_homs(G, v, m)


@lru_cache(maxsize=4096)
def _tame_pairs(G: FiniteGroup, r: int) -> tuple[tuple[int, int], ...]:
    # x y x^-1 = y^q depends only on q modulo exp(G)
    tab = G.table
    inv = G.inverse
    powq = np.array([G.power(y, r) for y in range(G.order)], dtype=np.int32)
    xs = np.arange(G.order)
    pairs = []
    for y in range(G.order):
        lhs = tab[tab[xs, y], inv[xs]]
        for x in np.nonzero(lhs == powq[y])[0]:
            pairs.append((int(x), y))
    pairs.sort(key=lambda t: (t[1] != 0, t[1], t[0]))
    return tuple(pairs)


def _tame_homs(G: FiniteGroup, v: Place, m: int) -> LocalHomSet:
    r = v.q % G.exponent
    texp = _torsion_exp(v.q, m)
    homs = []
    for x, y in _tame_pairs(G, r):
        if texp is None:
            # no m-th roots of unity mod p; only sensible when the image is trivial
            t = 0
        else:
            t = G.power(y, texp)
        homs.append(LocalHom((x, y), y, t, "tame", label=f"{G.label(x)} | {G.label(y)}"))
    return LocalHomSet(v, G, ("sigma", "tau"), tuple(homs), frobenius_generator=0)


def _wild_homs(G: FiniteGroup, v: Place, table: WildTable) -> LocalHomSet:
    homs = []
    for row in table.rows:
        imgs = tuple(G.idx(parse_cycles(s, G.degree)) for s in row["images"])
        homs.append(LocalHom(imgs, G.idx(parse_cycles(row["inertia"], G.degree)),
                             G.idx(parse_cycles(row["torsion"], G.degree)), "wild",
                             int(row["exponent"]), row.get("label", "")))
    return LocalHomSet(v, G, table.generators, tuple(homs), table.frobenius_generator)


def local_exponent(h: LocalHom, w: WeightFunction) -> int:
    """Exponent of the local invariant: w of the inertia generator.

    Wild rows store the discriminant exponent, which replaces w when w is the
    index weight; other weights see only the inertia generator.
    """
    if h.unramified:
        return 0
    if h.source == "wild" and w.name == "ind" and h.disc_exponent is not None:
        return h.disc_exponent
    return w(h.inertia)


# local conditions

RULES = ("all", "unramified", "split", "nonsplit", "ramified", "none")


def _apply_rule(rule: str | tuple[int, ...], hs: LocalHomSet) -> tuple[int, ...]:
    if isinstance(rule, tuple):
        if any(not 0 <= i < len(hs) for i in rule):
            raise ValidationError(f"override at {hs.place.label} names a row outside the hom set")
        return tuple(sorted(set(rule)))
    homs = hs.homs
    if rule == "all":
        return tuple(range(len(homs)))
    if rule == "unramified":
        return tuple(i for i, h in enumerate(homs) if h.unramified)
    if rule == "split":
        return tuple(i for i, h in enumerate(homs) if all(g == 0 for g in h.gens))
    if rule == "nonsplit":
        return tuple(i for i, h in enumerate(homs) if any(g != 0 for g in h.gens))
    if rule == "ramified":
        return tuple(i for i, h in enumerate(homs) if not h.unramified)
    if rule == "none":
        return ()
    raise ValidationError(f"unknown local rule {rule!r}; expected one of {RULES}")


@dataclass(frozen=True)
class LocalConditions:
    """A family Sigma: a default rule, optional residue-class rule, and overrides.

    ``overrides`` maps a place key (prime or ``"inf"``) to a rule name or an
    explicit tuple of row indices.  ``class_rule = (modulus, residues, rule)``
    applies ``rule`` to every finite place whose norm lies in the residues.
    """

    default: str = "all"
    archimedean: str = "all"
    overrides: Mapping[int | str, str | tuple[int, ...]] = field(default_factory=dict)
    class_rule: tuple[int, tuple[int, ...], str] | None = None

    def __post_init__(self):
        for r in (self.default, self.archimedean):
            if r not in RULES:
                raise ValidationError(f"unknown local rule {r!r}")
        norm = {}
        for k, r in dict(self.overrides).items():
            if isinstance(r, list):
                r = tuple(r)
            if isinstance(r, str) and r not in RULES:
                raise ValidationError(f"unknown local rule {r!r}")
            norm[place_of(k).key] = r
        object.__setattr__(self, "overrides", norm)
        if self.class_rule is not None:
            mod, res, rule = self.class_rule
            if rule not in RULES or mod < 1:
                raise ValidationError("bad class rule")
            object.__setattr__(self, "class_rule", (int(mod), tuple(int(x) % mod for x in res), rule))

    def rule_for(self, v: Place) -> str | tuple[int, ...]:
        if v.key in self.overrides:
            return self.overrides[v.key]
        if v.is_archimedean:
            return self.archimedean
        if self.class_rule is not None:
            mod, res, rule = self.class_rule
            if v.norm % mod in res:
                return rule
        return self.default

    def select(self, hs: LocalHomSet) -> tuple[int, ...]:
        return _apply_rule(self.rule_for(hs.place), hs)

    def is_trivial_at(self, v: Place) -> bool:
        return self.rule_for(v) == "all"

    def overridden_places(self) -> list[int | str]:
        return list(self.overrides)

    def to_json(self) -> dict:
        return {"default": self.default, "archimedean": self.archimedean,
                "overrides": {str(k): (list(v) if isinstance(v, tuple) else v)
                              for k, v in self.overrides.items()},
                "class_rule": list(self.class_rule) if self.class_rule else None}


TRIVIAL_CONDITIONS = LocalConditions()


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    exceptional: tuple = ()
    reason: str = ""


_KEEPS_UNRAMIFIED = {"all": True, "unramified": True, "split": False, "nonsplit": False,
                     "ramified": False, "none": False}


def admissibility_check(sigma: LocalConditions, G: FiniteGroup | None = None) -> AdmissibilityReport:
    """Admissible iff only finitely many places lose unramified homomorphisms.

    For the trivial group every rule except "ramified"/"none" keeps the single
    (unramified) homomorphism, which the check accounts for when G is given.
    """
    trivial_group = G is not None and G.order == 1

    def keeps(rule: str) -> bool:
        if trivial_group and rule in ("split", "nonsplit"):
            return rule == "split"
        return _KEEPS_UNRAMIFIED[rule]

    if not keeps(sigma.default):
        return AdmissibilityReport(False, (), f"default rule {sigma.default!r} drops unramified homs everywhere")
    if sigma.class_rule is not None and not keeps(sigma.class_rule[2]):
        mod, res, rule = sigma.class_rule
        return AdmissibilityReport(
            False, (), f"rule {rule!r} drops unramified homs at all places = {res} mod {mod}")
    return AdmissibilityReport(True, tuple(sigma.overridden_places()))


# Euler factors

def euler_factor(G: FiniteGroup, v: Place, subset: Iterable[int] | None, w: WeightFunction,
                 hs: LocalHomSet | None = None) -> list[Fraction]:
    """Coefficients c_k of t^k: #{f in Sigma_v : exponent k} / |G|."""
    hs = hs or local_hom_set(G, v)
    idxs = range(len(hs)) if subset is None else subset
    if v.is_archimedean:
        return [Fraction(len(list(idxs)), G.order)]
    counts: dict[int, int] = {}
    for i in idxs:
        k = local_exponent(hs[i], w)
        counts[k] = counts.get(k, 0) + 1
    if not counts:
        return [Fraction(0)]
    out = [Fraction(0)] * (max(counts) + 1)
    for k, c in counts.items():
        out[k] = Fraction(c, G.order)
    return out


def describe_hom(G: FiniteGroup, hs: LocalHomSet, i: int, w: WeightFunction | None = None) -> dict:
    h = hs[i]
    out = {"row": i, "images": {n: G.label(g) for n, g in zip(hs.generators, h.gens)},
           "inertia": G.label(h.inertia), "torsion": G.label(h.torsion),
           "unramified": h.unramified, "source": h.source}
    if w is not None:
        out["exponent"] = local_exponent(h, w)
    return out
