# %% [markdown]
# Mean log growth of the post-activation norm across widths
#
# For a ReLU network at finite width n, log(|relu(Y_L)| / |relu(Y_0)|) has a
# mean that changes sign as n grows: it is negative up to n = 3 and positive
# from n = 4. Two closed forms are in circulation, which we call `main`
# ((1 - 2^-n)^-1 / 4 - 1/n) and `appendix` ((1 - 2^-n) / 4 - 1/n).
# The simulation below separates them.

# %%
import numpy as np

from infdepth import NetworkConfig, RngStream, sample_states
from infdepth.resnet import log_post_norm_ratios
from infdepth.activations import RELU
from infdepth.stats import summarize
from infdepth.theory import relu_log_growth_mean

L, N = 100, 4000
root = RngStream(1).child("regime")
print(" n   mean +- stderr        main     appendix   excluded")
for n in (1, 2, 3, 4, 6, 20):
    states = sample_states(NetworkConfig(width=n, depth=L), [1.0], N, root.child("width", n),
                           layers=[0, L])
    s = summarize(log_post_norm_ratios(states, RELU)[:, 1])
    print(f"{n:2d}  {s.mean:+.4f} +- {s.stderr:.4f}   {relu_log_growth_mean(n):+.4f}   "
          f"{relu_log_growth_mean(n, variant='appendix'):+.4f}   {s.n_excluded}")

# %% [markdown]
# Draws where the whole layer sits at or below zero are excluded: after such a
# collapse the network is frozen and the ratio is undefined. At depth 0 this
# happens with probability 2^-n, which is why width 1 loses about half its draws.
