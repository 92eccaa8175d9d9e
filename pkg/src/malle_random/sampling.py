"""Uniform sampling in subgroups of G^L given by generating vectors.

Vectors are numpy rows of element indices of a fixed FiniteGroup G; the group
law acts coordinatewise through G's multiplication table.  Two samplers are
provided: exhaustive (enumerate the subgroup, draw uniform indices) and
product replacement, run as many independent chains in lockstep.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import OracleFailure, ValidationError
from .groups import FiniteGroup

log = logging.getLogger(__name__)

ENUM_CAP = 10**4


class VectorGroup:
    """Coordinatewise arithmetic in G^L on integer arrays of shape (..., L)."""

    def __init__(self, G: FiniteGroup):
        self.G = G
        self.table = G.table
        self.inv = G.inverse
        self.dtype = np.int16 if G.order < 2**15 else np.int32

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.table[a, b].astype(self.dtype, copy=False)

    def inverse(self, a: np.ndarray) -> np.ndarray:
        return self.inv[a].astype(self.dtype, copy=False)

    def conj(self, c: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self.mul(self.mul(c, x), self.inverse(c))

    def commutator(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.mul(self.mul(a, b), self.mul(self.inverse(a), self.inverse(b)))

    def closure(self, seeds: np.ndarray, conj_by: np.ndarray | None = None,
                cap: int = ENUM_CAP) -> np.ndarray | None:
        """Elements of the subgroup generated by ``seeds`` (normal closure under
        conjugation by ``conj_by`` if given), or None past ``cap`` elements."""
        seeds = np.asarray(seeds, dtype=self.dtype).reshape(-1, seeds.shape[-1])
        L = seeds.shape[1]
        ident = np.zeros(L, dtype=self.dtype)
        found = {ident.tobytes(): ident}
        queue = [ident]
        conj_by = None if conj_by is None else np.asarray(conj_by, dtype=self.dtype).reshape(-1, L)
        while queue:
            x = queue.pop()
            nbrs = [self.mul(x, s) for s in seeds]
            if conj_by is not None:
                nbrs += [self.conj(c, x) for c in conj_by]
            for y in nbrs:
                k = y.tobytes()
                if k not in found:
                    found[k] = y
                    queue.append(y)
                    if len(found) > cap:
                        return None
        out = np.array(sorted(found.values(), key=lambda v: v.tobytes()), dtype=self.dtype)
        return out.reshape(-1, L)


class ExactSampler:
    """Uniform draws from an enumerated subgroup."""

    exact = True

    def __init__(self, elements: np.ndarray):
        self.elements = elements

    @property
    def size(self) -> int:
        return len(self.elements)

    def draw(self, rng: np.random.Generator, n: int, columns=None) -> np.ndarray:
        idx = rng.integers(0, len(self.elements), size=n)
        els = self.elements if columns is None else self.elements[:, columns]
        return els[idx]


@dataclass(frozen=True)
class WalkParams:
    rack: int | None = None  # default max(10, 2 * #generators)
    burn_in: int | None = None  # default 200 * rack
    spacing: int = 20
    chains: int = 256
    r0_steps: int = 40

    def resolved(self, ngens: int) -> "WalkParams":
        rack = self.rack or max(10, 2 * ngens)
        burn = self.burn_in if self.burn_in is not None else 200 * rack
        if rack < ngens:
            raise ValidationError("rack must hold every generator")
        if burn < 50 * rack or self.spacing < 5:
            log.warning("product replacement parameters below the safety floor "
                        "(burn-in >= 50 * rack, spacing >= 5)")
        return WalkParams(rack, burn, self.spacing, self.chains, self.r0_steps)

    def to_json(self) -> dict:
        return {"rack": self.rack, "burn_in": self.burn_in, "spacing": self.spacing,
                "chains": self.chains, "r0_steps": self.r0_steps}


class ProductReplacement:
    """Product replacement with an accumulator ("rattle"), many chains at once.

    Each step picks, per chain, slots i != j and a sign, replaces
    rack[i] by rack[i] * rack[j]^{+-1} and multiplies the accumulator by the
    new rack[i].  After burn-in, one draw is emitted per chain every
    ``spacing`` steps.  Restricting to a subset of coordinates gives exactly
    the projected walk, since the random choices do not look at values.
    """

    exact = False

    def __init__(self, vg: VectorGroup, gens: np.ndarray, params: WalkParams = WalkParams()):
        self.vg = vg
        self.gens = np.asarray(gens, dtype=vg.dtype)
        if self.gens.ndim != 2 or len(self.gens) == 0:
            raise ValidationError("product replacement needs at least one generator vector")
        self.params = params.resolved(len(self.gens))

    def draw(self, rng: np.random.Generator, n: int, columns=None) -> np.ndarray:
        p = self.params
        gens = self.gens if columns is None else self.gens[:, columns]
        C = min(p.chains, max(1, n))
        r = p.rack
        slots = np.arange(r) % len(gens)
        rack = np.broadcast_to(gens[slots], (C, r, gens.shape[1])).copy()
        acc = np.zeros((C, gens.shape[1]), dtype=self.vg.dtype)
        rows = np.arange(C)
        per_chain = -(-n // C)
        out = np.empty((C, per_chain, gens.shape[1]), dtype=self.vg.dtype)
        total = p.burn_in + per_chain * p.spacing
        k = 0
        for step in range(1, total + 1):
            i = rng.integers(0, r, size=C)
            j = (i + rng.integers(1, r, size=C)) % r
            sign = rng.integers(0, 2, size=C).astype(bool)
            other = rack[rows, j]
            other = np.where(sign[:, None], other, self.vg.inverse(other))
            new = self.vg.mul(rack[rows, i], other)
            rack[rows, i] = new
            acc = self.vg.mul(acc, new)
            if step > p.burn_in and (step - p.burn_in) % p.spacing == 0:
                out[:, k] = acc
                k += 1
        # interleave chains so prefixes mix all chains
        return out.transpose(1, 0, 2).reshape(-1, gens.shape[1])[:n]


class LazyNormalWalk:
    """Haar draws on T = <[E,E], torsion vectors> (normal in E) by a lazy walk.

    Steps are commutators of fresh E-draws or E-conjugates of torsion vectors,
    each taken with probability 1/2 and inverted with probability 1/2.
    """

    exact = False

    def __init__(self, vg: VectorGroup, e_sampler, torsion: np.ndarray, steps: int = 40):
        self.vg = vg
        self.e_sampler = e_sampler
        self.torsion = np.asarray(torsion, dtype=vg.dtype).reshape(-1, torsion.shape[-1])
        self.steps = steps

    def draw(self, rng: np.random.Generator, n: int, columns=None) -> np.ndarray:
        vg = self.vg
        tors = self.torsion if columns is None else self.torsion[:, columns]
        L = tors.shape[1]
        x = np.zeros((n, L), dtype=vg.dtype)
        for _ in range(self.steps):
            a = self.e_sampler.draw(rng, n, columns)
            b = self.e_sampler.draw(rng, n, columns)
            comm = vg.commutator(a, b)
            if len(tors):
                t = tors[rng.integers(0, len(tors), size=n)]
                tconj = vg.conj(a, t)
                use_t = rng.integers(0, 2, size=n).astype(bool)
                s = np.where(use_t[:, None], tconj, comm)
            else:
                s = comm
            inv = rng.integers(0, 2, size=n).astype(bool)
            s = np.where(inv[:, None], vg.inverse(s), s)
            move = rng.integers(0, 2, size=n).astype(bool)
            x = np.where(move[:, None], vg.mul(x, s), x)
        return x


def make_sampler(vg: VectorGroup, gens: np.ndarray, cap: int = ENUM_CAP,
                 params: WalkParams = WalkParams(), force_walk: bool = False):
    """Exhaustive sampler when the subgroup has at most ``cap`` elements."""
    if not force_walk:
        els = vg.closure(gens, cap=cap)
        if els is not None:
            return ExactSampler(els)
    return ProductReplacement(vg, gens, params)


def separating_columns(elements: np.ndarray) -> np.ndarray:
    """A small set of coordinates on which the rows of ``elements`` stay distinct.

    Projecting onto it is injective on the subgroup, so distances between laws
    on the subgroup can be computed on the (much narrower) projection.
    """
    n = len(elements)
    cols: list[int] = []
    distinct = 1
    for j in range(elements.shape[1]):
        trial = cols + [j]
        k = len(np.unique(elements[:, trial], axis=0))
        if k > distinct:
            cols, distinct = trial, k
            if distinct == n:
                break
    return np.array(cols, dtype=np.int64)


def total_variation(draws: np.ndarray, elements: np.ndarray) -> float:
    """TV distance between the empirical law of ``draws`` and uniform on ``elements``."""
    index = {e.tobytes(): i for i, e in enumerate(elements)}
    counts = np.zeros(len(elements))
    for d in draws:
        i = index.get(d.tobytes())
        if i is None:
            raise OracleFailure("a draw left the enumerated subgroup")
        counts[i] += 1
    emp = counts / len(draws)
    return 0.5 * float(np.abs(emp - 1.0 / len(elements)).sum())
