"""Brute-force oracles, deliberately independent of the fast code paths.

They work on raw permutation tuples (no multiplication tables, no class
machinery) or on explicit local class field theory, and are used by the
test-suite and by the ``oracle`` CLI subcommand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

from .errors import OracleFailure
from .groups import FiniteGroup, index_of, perm_inv, perm_mul, perm_order


def _power(p: tuple, k: int) -> tuple:
    out = tuple(range(len(p)))
    for _ in range(k):
        out = perm_mul(p, out)
    return out


def malle_ab_oracle(G: FiniteGroup, weight: str = "ind",
                    units: tuple[int, ...] | None = None) -> tuple[int, int]:
    """(a, b) by direct orbit enumeration.

    The orbit of g is {h g^u h^-1 : h in G, u in units mod exp(G)}; by default
    all units, i.e. the rational cyclotomic action.
    """
    els = list(G.elements)
    ident = tuple(range(G.degree))
    exp = math.lcm(*(perm_order(g) for g in els))
    if units is None:
        units = tuple(u for u in range(1, exp + 1) if math.gcd(u, exp) == 1)

    def weight_of(g):
        return index_of(g, G.degree) if weight == "ind" else int(g != ident)

    nontrivial = [g for g in els if g != ident]
    a = min(weight_of(g) for g in nontrivial)
    seen: set[tuple] = set()
    b = 0
    for g in nontrivial:
        if g in seen or weight_of(g) != a:
            continue
        b += 1
        for u in units:
            gu = _power(g, u)
            for h in els:
                seen.add(perm_mul(perm_mul(h, gu), perm_inv(h)))
    return a, b


def tame_pairs_oracle(G: FiniteGroup, q: int) -> list[tuple[tuple, tuple]]:
    """All (sigma, tau) in G^2 with sigma tau sigma^-1 = tau^q."""
    els = list(G.elements)
    return [(s, t) for s in els for t in els
            if perm_mul(perm_mul(s, t), perm_inv(s)) == _power(t, q)]


def tame_exponents_oracle(G: FiniteGroup, q: int, weight: str = "ind") -> list[int]:
    ident = tuple(range(G.degree))
    out = []
    for _, t in tame_pairs_oracle(G, q):
        out.append(index_of(t, G.degree) if weight == "ind" else int(t != ident))
    return sorted(out)


# wild places via local class field theory

def _v2(x: int) -> tuple[int, int]:
    k = 0
    while x % 2 == 0:
        x //= 2
        k += 1
    return k, x


def hilbert_symbol_2(a: int, b: int) -> int:
    """(a, b)_2 for nonzero integers, via the standard unit formula."""
    al, u = _v2(a)
    be, v = _v2(b)
    eps = lambda x: ((x - 1) // 2) % 2  # noqa: E731
    omega = lambda x: ((x * x - 1) // 8) % 2  # noqa: E731
    e = (eps(u) * eps(v) + al * omega(v) + be * omega(u)) % 2
    return -1 if e else 1


@dataclass(frozen=True)
class WildRow:
    images: tuple[str, ...]
    inertia: str
    exponent: int
    torsion: str


def c2_wild_rows_p2() -> list[WildRow]:
    """Characters of Q_2^x / squares, evaluated on 2, -1, 5.

    chi_d(x) = (x, d)_2.  The discriminant exponent of Q_2(sqrt d) is 0, 2 or
    3 as d is 1 mod 4, 3 mod 4 or even (d squarefree), and inertia is
    nontrivial exactly when chi_d is nontrivial on units.
    """
    flip = "(1 2)"
    rows = []
    for d in (1, 5, -1, -5, 2, 10, -2, -10):
        imgs = tuple("()" if hilbert_symbol_2(x, d) == 1 else flip for x in (2, -1, 5))
        ram = any(hilbert_symbol_2(u, d) == -1 for u in (-1, 5))
        if d % 2 == 0:
            e = 3
        elif d % 4 == 1:
            e = 0
        else:
            e = 2
        rows.append(WildRow(imgs, flip if ram else "()", e, imgs[1]))
    return rows


def c3_wild_rows_p3() -> list[WildRow]:
    """Characters of Q_3^x / cubes = <3> x <4> onto C3.

    A character ramifies iff it is nontrivial on 4 = 1 + 3; then it is
    nontrivial on 1 + 3Z_3 but trivial on 1 + 9Z_3 = (1 + 3Z_3)^3, so the
    conductor exponent is 2 and the discriminant exponent (p - 1) * 2 = 4.
    The image of -1 is trivial because C3 has odd order.
    """
    c = ("()", "(1 2 3)", "(1 3 2)")
    rows = []
    for i, j in product(range(3), repeat=2):
        rows.append(WildRow((c[i], c[j]), c[j], 4 if j else 0, "()"))
    return rows


def wild_table_oracle(table) -> bool:
    """Compare a bundled wild table with its class field theory oracle."""
    if (table.p, table.group_spec) == (2, "C2"):
        expect = c2_wild_rows_p2()
    elif (table.p, table.group_spec) == (3, "C3"):
        expect = c3_wild_rows_p3()
    else:
        raise OracleFailure(f"no oracle for wild table p = {table.p}, {table.group_spec}")
    got = {(tuple(r["images"]), r["inertia"], int(r["exponent"]), r["torsion"]) for r in table.rows}
    want = {(r.images, r.inertia, r.exponent, r.torsion) for r in expect}
    return got == want


# closed forms used by oracles

def odd_squarefree_count(X: int) -> int:
    """#{n <= X odd squarefree}, by a plain sieve."""
    sq = bytearray([1]) * (X + 1)
    k = 2
    while k * k <= X:
        sq[k * k::k * k] = bytearray(len(sq[k * k::k * k]))
        k += 1
    return sum(1 for n in range(1, X + 1, 2) if sq[n])
