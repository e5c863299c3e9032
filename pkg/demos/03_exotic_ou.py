# %% [markdown]
# An activation that turns the limit into an Ornstein-Uhlenbeck process
#
# With phi(y) = exp(u^2) where erfi(u) = y, and g(y) = sqrt(pi) u, the transformed
# state g(Y) behaves like a mean-reverting Gaussian process with rate a = pi/4.
# We fit the decay rate of E g(Y_l) and compare it with pi/4 and pi/3.

# %%
import math

import numpy as np

from infdepth import NetworkConfig, RngStream, sample_states
from infdepth.activations import exotic_g
from infdepth.stats import Normal, ks_test
from infdepth.theory import ou_marginal_params, ou_rate

L, N = 100, 3000
cfg = NetworkConfig(width=1, depth=L, activation="exotic:1:0")
y = sample_states(cfg, [1.0], N, RngStream(3), y0=[1.0])[:, :, 0]
kept = ~np.isnan(y[:, -1])
g = exotic_g(1.0, 0.0, y[kept])
print(f"{N - kept.sum()} draws left the activation's domain and were excluded")

# %%
g0 = float(exotic_g(1.0, 0.0, 1.0))
t = np.arange(L + 1) / L
curve = g.mean(axis=0)
rate = -np.sum(t[1:] * np.log(curve[1:] / g0)) / np.sum(t[1:] ** 2)
print(f"fitted decay rate {rate:.3f};  pi/4 = {ou_rate():.3f},  pi/3 = {math.pi / 3:.3f}")

# %%
mean, var = ou_marginal_params(g0, 1.0, 1.0)
ks = ks_test(g[:, -1], Normal(mean, math.sqrt(var)))
print(f"g(Y_L): mean {g[:, -1].mean():.4f} vs {mean:.4f}, var {g[:, -1].var(ddof=1):.4f} vs {var:.4f}")
print(f"KS p = {ks.p_value:.3f}")

# %% [markdown]
# At L = 100 the fitted rate sits a little above pi/4, and the mean of g(Y_L) a
# little below the limit, so the KS test is only marginally happy at this sample
# size. pi/3 is clearly further away. Raising L shrinks the gap; the
# `ou-hist` experiment records the same comparison in its JSON report.
