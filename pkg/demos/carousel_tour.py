#!/usr/bin/env python3
"""Watch one carousel fill up, empty out, and stay inside its estimates."""

from fractions import Fraction

from orbitmachine.carousel import CarouselParams, PNorm, state_at, state_norm_pow, verify_estimates


def bar(values, width=3):
    return " ".join(f"{int(v):>{width}d}" for v in values)


def main():
    prm = CarouselParams(T=12, m=3, eps=Fraction(1), p=PNorm.ONE)
    print(f"T={prm.T}, m={prm.m}, amplitude 1: the integer profile over one cycle")
    for t in range(prm.T + 1):
        print(f"t={t:2d} | {bar(state_at(prm, 1, t).dense())}")

    print("\nl1 norm along the cycle against the three bounds")
    rep = verify_estimates(prm, 1)
    by_t = {}
    for r in rep.records:
        by_t.setdefault(r.t, {})[r.kind] = r
    for t, recs in sorted(by_t.items()):
        parts = [f"{k}={float(r.bound_pow):.3g}" for k, r in sorted(recs.items())]
        norm = next(iter(recs.values())).norm_pow
        print(f"t={t:2d} norm={float(norm):6.2f}  " + "  ".join(parts))
    print("all estimates hold:", rep.ok)

    # closed form at an astronomically late time
    big = CarouselParams(T=5 ** 60, m=5 ** 59 // 3, eps=Fraction(1, 7), p=PNorm.TWO)
    t = 3 ** 100
    print(f"\nT=5^60, t=3^100: squared l2 norm has {len(str(state_norm_pow(big, 1, t).numerator))} digits"
          " in its numerator and costs O(1) to compute")


if __name__ == "__main__":
    main()
