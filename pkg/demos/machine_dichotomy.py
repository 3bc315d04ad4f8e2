#!/usr/bin/env python3
"""The two halves of the dichotomy on a desk-scale machine.

Vectors u in E: the orbit norm is pushed up past a stage-dependent floor.
Vectors u outside E: at the end of each cycle the orbit comes back close to
where it started, closer with every stage.
"""

from orbitmachine.machine import MachineConfig, build_machine, divergence_trace, near_return
from orbitmachine.schedule import Variant
from orbitmachine.sphere import SymmetricSet


def main():
    E = SymmetricSet.pair([1.0, 0.0])
    machine = build_machine(MachineConfig(2, "2", E, N=5, variant=Variant.toy(5)))
    print(f"K={machine.K}, stage boundaries C={machine.feeds.C}, {machine.horizon} blocks, "
          f"T_last has {len(str(machine.block(machine.horizon).T))} digits")

    print("\nu = e1 (in E): smallest sampled norm in each stage window")
    for tr in divergence_trace(machine, [1.0, 0.0], [1, 2, 3, 4], seed=1):
        print(f"  stage {tr.n}: block {tr.k:3d}  min ||R^t u|| = {tr.min_total:8.4f}  "
              f"floor {tr.stage_bound:.4f}  ok={tr.ok}")

    print("\nu = e2 (outside E): distance to the start after the cycle before block k_n")
    for n in range(2, 6):
        r = near_return(machine, [0.0, 1.0], n)
        print(f"  stage {n}: k_n={r.k_n:3d}  deficit {r.deficit:.4f}  (bound {r.bound:.3f})")


if __name__ == "__main__":
    main()
