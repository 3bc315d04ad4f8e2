#!/usr/bin/env python3
"""Finite-dimensional orbits and the Walsh block systems."""

import numpy as np

from orbitmachine.carousel import PNorm
from orbitmachine.jordan import classify, decompose, orbit_oracle
from orbitmachine.symbasis import LpNorm, case3_system, detect_case, equivalence_estimate


def main():
    T = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]])
    dec = decompose(T)
    print("eigenvalue clusters:", [(complex(c.mu).real, c.kind, c.multiplicity) for c in dec.clusters])
    for x in ([1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1]):
        v = classify(T, x, dec)
        print(f"  x={x}: {v.cls.value:13s} oracle says {orbit_oracle(T, x).cls.value}")

    print("\nWalsh systems in l2")
    l2 = LpNorm(PNorm.TWO)
    for n in range(1, 7):
        z = case3_system(n)
        est = equivalence_estimate(z, l2)
        print(f"  n={n}: |F|={z.size:3d}, permutation order {z.order()}, "
              f"||sum a z|| / ||a||_2 in [{est.lower:.4f}, {est.upper:.4f}]")

    print("\nwhich construction a norm admits (finite horizon)")
    for p in PNorm:
        rep = detect_case(LpNorm(p))
        print(f"  l{p.value}: case {rep.case}")


if __name__ == "__main__":
    main()
