"""Counting quadratic and cubic fields with the local-product series.

Walks from the Malle invariants of a group, through the local enumeration at
a tame prime, to the Dirichlet series coefficients and a Tauberian check
against an exact count.
"""

from __future__ import annotations

import math

from malle_random.groups import make_weight, malle_ab, parse_group
from malle_random.local import LocalConditions, Place, local_hom_set
from malle_random.oracles import odd_squarefree_count
from malle_random.series import build_profile, dirichlet_coeffs, prediction, tauberian_table


def main() -> None:
    for spec in ("C2", "C3", "S3", "S4", "D4"):
        G = parse_group(spec)
        inv = malle_ab(G, None, make_weight(G, "ind"))
        print(f"{spec:3s} order {G.order:2d}: a = {inv.a}, b = {inv.b}")

    S3 = parse_group("S3")
    hs = local_hom_set(S3, Place.finite(7))
    print(f"\nHom(G_Q7, S3) has {len(hs)} elements, {len(hs.unramified())} unramified")

    C3 = parse_group("C3")
    coeffs = dirichlet_coeffs(C3, "ind", 100).fractions()
    nz = {n: int(c) for n, c in enumerate(coeffs, 1) if c}
    print("\nnonzero C3 coefficients up to 100:", nz)

    # quadratic fields unramified at 2: A(X) is the odd squarefree count
    G = parse_group("C2")
    sigma = LocalConditions(overrides={2: "unramified"})
    X = 10**5
    prof = build_profile(G, "ind", X, sigma)
    pred = prediction(G, "ind", sigma, pmax=X)
    print(f"\npredicted c = {pred.c:.6f}, 4/pi^2 = {4 / math.pi**2:.6f}")
    for row in tauberian_table(prof, [10**3, 10**4, 10**5], pred):
        print(f"  X = {row.X:>6}: A = {int(row.A):>6}, A / (c X) = {row.ratio:.5f}")
    print(f"  sieve count at 10^5: {odd_squarefree_count(X)}")


if __name__ == "__main__":
    main()
