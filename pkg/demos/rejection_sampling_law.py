"""
What rejection sampling really outputs
======================================

On the channel (0.7, 0.3) with blocks of two symbols and the map
"first symbol", we compare the exact output law of rejection sampling
against the channel for two choices of target: targets drawn from the
map's own image law, and uniform targets.
"""
# %%
from fractions import Fraction as F

import numpy as np

from stegokit import memoryless, statistical_distance
from stegokit.channel import marginal_block
from stegokit.probability import Distribution, pushforward
from stegokit.sampling import RejSamConfig, hit_law, rejsam_mixture_distribution

channel = memoryless([F(7, 10), F(3, 10)])
first_symbol = np.array([0, 0, 1, 1])
block = marginal_block(channel, (), 2).dist

# %%
# Targets drawn from the image law reproduce the channel only with no retries.
for rho in (0, 1, 2, 4, 16):
    cfg = RejSamConfig(rho, 2, 1)
    out = rejsam_mixture_distribution(cfg, hit_law(cfg, channel, (), first_symbol), channel, (), first_symbol).dist
    print(f"rho={rho:2d}  distance {float(statistical_distance(out, block)):.5f}"
          f"  Pr[first symbol = 0] = {float(pushforward(first_symbol, out, 2)[0]):.4f}")

# %%
# Uniform targets: the distance stays within the bias of the map, 0.2 here.
uniform = Distribution((F(1, 2), F(1, 2)))
for rho in (0, 1, 4, 16):
    out = rejsam_mixture_distribution(RejSamConfig(rho, 2, 1), uniform, channel, (), first_symbol).dist
    print(f"rho={rho:2d}  uniform-target distance {float(statistical_distance(out, block)):.5f}")
