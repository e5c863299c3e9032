# %% [markdown]
# Width one, depth going to infinity
#
# With a single neuron and ReLU the residual update is Y_l = Y_{l-1} (1 + W_l / sqrt(L))
# as long as Y stays positive, so log Y_L is a sum of L small independent terms.
# Its law approaches the log of a geometric Brownian motion with zero drift and
# unit volatility: log Y_1 ~ N(-1/2, 1).

# %%
import math

import numpy as np

from infdepth import NetworkConfig, RngStream, SdeConfig, euler_paths, sample_states
from infdepth.stats import Normal, gaussian_kde, ks_test, summarize
from infdepth.theory import gbm_log_params

L, N = 100, 5000
cfg = NetworkConfig(width=1, depth=L)
y = sample_states(cfg, [1.0], N, RngStream(7).child("demo"), y0=[1.0], layers=[L])[:, 0, 0]
log_y = np.log(y[y > 0])
print(f"{y.size - log_y.size} of {N} draws collapsed (Y <= 0 is absorbing)")

# %%
mu, var = gbm_log_params(1.0, 0.0, 1.0, 1.0)
s = summarize(log_y)
print(f"mean log Y_L = {s.mean:.4f} +- {s.stderr:.4f}   (limit {mu})")
print(f"var  log Y_L = {s.variance:.4f}             (limit {var})")
ks = ks_test(log_y, Normal(mu, math.sqrt(var)))
print(f"KS against N(-1/2, 1): D = {ks.statistic:.4f}, p = {ks.p_value:.3f}")

# %% [markdown]
# The same law from the SDE side: Euler steps of dX = |relu(X)| dB.

# %%
scfg = SdeConfig(width=1, steps=1000)
x = euler_paths(scfg, [1.0], 2000, RngStream(8), record=[scfg.n_steps])[:, 0, 0]
log_x = np.log(x[x > 0])
print(f"Euler: mean {log_x.mean():.4f}, var {log_x.var(ddof=1):.4f}, "
      f"KS p = {ks_test(log_x, Normal(mu, 1.0)).p_value:.3f}")

# %%
kde = gaussian_kde(log_y)
grid = np.linspace(-4, 3, 8)
exact = np.exp(-0.5 * (grid - mu) ** 2 / var) / math.sqrt(2 * math.pi * var)
for g, a, b in zip(grid, kde(grid), exact):
    print(f"z = {g:+.1f}   kde {a:.4f}   normal {b:.4f}")
