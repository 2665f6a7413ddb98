"""Packings and information bounds behind the minimax lower bounds.

Builds certified sign packings for growing k and shows the information
bound shrinking like k^-(2 beta + 1), then evaluates the Fano bound for the
bump-function density family at a fixed sample size.

    python3 demos/lower_bounds.py
"""

from lpme import RngStream
from lpme.bounds import BUMPS, DensityPacking, build_sign_packing, fano_bound, info_bound_density, predict_rates

n, eps, beta = 100_000, 0.2, 1
c_half = BUMPS[beta].c_half
print(f"n={n}, eps={eps}, beta={beta}")
print("   k  |V|  lambda_max  info bound   min dist^2   Fano bound")
for k in (16, 32, 64, 128):
    packing = build_sign_packing(k, RngStream(k))
    info = info_bound_density(n, eps, k, beta, packing, c_half)
    dist = DensityPacking(beta, k, packing).min_distance_sq()
    fano = fano_bound(dist / 4, info, packing.log_cardinality)
    print(f"{k:>4} {len(packing):>4}  {packing.cov_lambda_max:10.3f}  {info:10.3e}  {dist:11.3e}  {fano:10.3e}")
print(f"unit-constant private rate (n eps^2)^(-1/2): {predict_rates('density', n, eps, beta=beta).private_lower:.3e}")
