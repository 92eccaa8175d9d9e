"""Epi-products of local objects and the moment multiplicativity they imply.

Two cyclic objects whose local data are compatible combine; a diagonal pair
inside C3 x C3 does not, since the diagonal already surjects onto both.
"""

from __future__ import annotations

from malle_random.category import (FiniteLocalObject, LocalDatum, e2m_membership,
                                   epi_product_exists, epi_product_oracle)
from malle_random.groups import parse_group


def obj(G, data):
    d = {p: LocalDatum(tuple(g), (g[-1],)) for p, g in data.items()}
    return FiniteLocalObject(G, tuple(d), d)


def show(label, A, B):
    dec = epi_product_exists(A, B)
    rep = e2m_membership(A, B)
    print(f"{label}: exists = {dec.exists} (brute force {epi_product_oracle(A, B)}), "
          f"moments {rep.moment_factors[0]} * {rep.moment_factors[1]} = {rep.moment_product}")


def main() -> None:
    C2, C3 = parse_group("C2"), parse_group("C3")
    show("C2 x C3 at 3", obj(C2, {3: (1,)}), obj(C3, {3: (1,)}))
    show("C3 x C3, same image", obj(C3, {3: (1,)}), obj(C3, {3: (1,)}))
    show("C3 x C3, independent images", obj(C3, {3: (1, 0), 5: (0, 1)}),
         obj(C3, {3: (0, 1), 5: (1, 0)}))


if __name__ == "__main__":
    main()
