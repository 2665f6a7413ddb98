"""Private frequency estimation on a 10-category distribution.

Privatizes 50,000 draws with randomized response and with Laplace noise,
rebuilds the distribution from the private views and compares the squared
error with the non-private empirical frequencies.

    python3 demos/multinomial_walkthrough.py
"""

import numpy as np

from lpme import ChannelConfig, RngStream, audit_channel, estimate, privatize
from lpme.estimators import mle_multinomial_estimate
from lpme.harness import default_multinomial_truth

d, n, eps = 10, 50_000, 1.0
theta = default_multinomial_truth(d)
rng = RngStream(2024)
x = rng.generator.choice(d, size=n, p=theta) + 1

print(f"truth: {np.round(theta, 3)}")
mle = np.asarray(mle_multinomial_estimate(x, d))
print(f"non-private     squared error {np.sum((mle - theta) ** 2):.2e}")
for mech in ("randomized_response", "laplace_multinomial"):
    cfg = ChannelConfig(mech, eps, d)
    est = np.asarray(estimate(privatize(x, cfg, rng), cfg))
    audit = audit_channel(cfg)
    print(f"{mech:<20} squared error {np.sum((est - theta) ** 2):.2e}  audited log-ratio {audit.max_log_ratio:.4f}")

# roughly d / (n eps^2) for the private estimators against 1/n without privacy
print(f"scale d/(n eps^2) = {d / (n * eps**2):.2e}, 1/n = {1 / n:.2e}")
