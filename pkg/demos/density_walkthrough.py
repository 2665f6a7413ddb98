"""Private density estimation on [0, 1].

Histogram estimator with Laplace noise on the tent density (Lipschitz),
then the halfspace series channel and its naive Laplace counterpart on the
smooth power-decay density.  Errors are exact L2 distances to the truth.

    python3 demos/density_walkthrough.py
"""

from lpme import ChannelConfig, RngStream, estimate, privatize
from lpme.core import l2_distance_squared
from lpme.densities import TentDensity, power_decay_density
from lpme.estimators import classical_histogram_estimate, classical_series_estimate
from lpme.harness import round_k

rng = RngStream(7)
eps = 1.0

tent = TentDensity()
print("tent density, histogram estimators")
for n in (4_096, 65_536):
    x = tent.sample(n, rng)
    k = round_k((n * eps**2) ** 0.25)
    cfg = ChannelConfig("laplace_histogram", eps, k)
    private = l2_distance_squared(estimate(privatize(x, cfg, rng), cfg), tent)
    classical = l2_distance_squared(classical_histogram_estimate(x, round_k(n ** (1 / 3))), tent)
    print(f"  n={n:>6}  private (k={k}) {private:.2e}   non-private {classical:.2e}")

smooth = power_decay_density()
print("power-decay density, series estimators")
for n in (4_096, 65_536):
    x = smooth.sample(n, rng)
    errs = {}
    for mech, k in (("halfspace_series", round_k((n * eps**2) ** (1 / 6))), ("naive_laplace_series", 3)):
        cfg = ChannelConfig(mech, eps, k)
        errs[mech] = l2_distance_squared(estimate(privatize(x, cfg, rng), cfg), smooth)
    classical = l2_distance_squared(classical_series_estimate(x, round_k(n ** 0.2)), smooth)
    print(f"  n={n:>6}  halfspace {errs['halfspace_series']:.2e}   naive {errs['naive_laplace_series']:.2e}   non-private {classical:.2e}")
