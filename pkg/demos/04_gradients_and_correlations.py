# %% [markdown]
# Why the 1/sqrt(L) block scale matters
#
# Without the scale each block adds an O(1) random perturbation and back-propagated
# gradients grow geometrically with depth. With it, depth behaves like time in an
# SDE and nothing blows up. The same scaling keeps the correlation between two
# inputs away from the degenerate values +-1.

# %%
import numpy as np

from infdepth import NetworkConfig, RngStream, correlation_path, forward_multi, gradient_norms

n, L = 10, 100
g_last = np.ones(n) / np.sqrt(n)
for scaled in (True, False):
    cfg = NetworkConfig(width=n, depth=L, scaled=scaled)
    ratios = [gradient_norms(cfg, [1.0], g_last, RngStream(0).child("draw", i))[-1]
              for i in range(10)]
    print(f"scaled={scaled!s:5}  median |g_0| / |g_L| = {np.median(ratios):.3g}")

# %%
cfg = NetworkConfig(width=20, depth=200, input_dim=2)
for i in range(5):
    a, b = forward_multi(cfg, [[1.0, 0.0], [1.0, 1.0]], RngStream(1).child("draw", i))
    c = correlation_path(a, b)
    print(f"draw {i}: c_0 = {c[0]:+.3f}  c_100 = {c[100]:+.3f}  c_200 = {c[-1]:+.3f}")
