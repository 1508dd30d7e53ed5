"""Three flipping devices, one coin, three different statistical worlds.

D1 is deterministic (it inverts the inserted face), D2 alternates with only
its first output uncertain, and D3 is a fair Bernoulli device.  A fourth
experiment draws coins without replacement from a box of 51 blue and 51 red,
refilling after 100 draws.  Its long-run frequency is indistinguishable from
D3's, yet the draw-by-draw law p(next blue) = (blue left)/(coins left) leaves
fingerprints: per-round counts are squeezed into {49, 50, 51}, the block
variance collapses, and short-lag autocorrelations go negative.
"""

import numpy as np

from contextlab.coins import d1_run, d2_run, d3_run, e4_run
from contextlab.randtests import (
    autocorrelation_test,
    block_variance_test,
    frequency_test,
    runs_test,
)

print("D1, face B inserted six times: ", "".join(d1_run("B", 6)))
print("D1, face R inserted four times:", "".join(d1_run("R", 4)))

print("\nD2, three seeded runs of twelve:")
for seed in range(3):
    print("  ", "".join(d2_run(12, seed)))

d3 = d3_run(100_000, seed=5)
print(f"\nD3 blue frequency over 1e5 flips: {np.mean(d3 == 'B'):.4f}")
print(f"D3 runs test:      p = {runs_test(d3).p_value:.3f}")

faces, blue_counts = e4_run(N=51, draws_per_round=100, rounds=1000, seed=9)
print(f"\nurn experiment, 1000 rounds of 100 draws:")
print(f"  blue frequency:          {np.mean(faces == 'B'):.4f}")
print(f"  per-round blue counts:   {sorted(set(blue_counts.tolist()))}")
print(f"  count variance:          {blue_counts.var(ddof=1):.4f}  (a fair coin would give 25)")

print("\nthe frequency test cannot tell the two devices apart:")
print(f"  D3  frequency p = {frequency_test(d3, 0.5).p_value:.3f}")
print(f"  urn frequency p = {frequency_test(faces, 0.5).p_value:.3f}")

print("\nbut dispersion and memory tests separate them immediately:")
for name, stream in (("D3 ", d3), ("urn", faces)):
    bv = block_variance_test(stream, block_size=100)
    ac = autocorrelation_test(stream, max_lag=5)
    print(
        f"  {name}: block-variance ratio {bv.details['variance_ratio']:6.3f} "
        f"(p = {bv.p_value:9.3g}),  lag-1 r = {ac.details['autocorrelations'][0]:+.4f} "
        f"(portmanteau p = {ac.p_value:9.3g})"
    )
