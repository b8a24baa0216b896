"""
Hiding a message in a Markov channel
====================================

A one-time key hides an 8-bit message in text drawn from a two-symbol
Markov chain, then the receiver recovers it. We also look at how many
channel draws the sender needed per block.
"""
# %%
from fractions import Fraction as F

import numpy as np

from stegokit import derive_params, keygen, markov, sd_decode, se_encode

rng = np.random.default_rng(2026)

# a sticky chain: the previous symbol repeats with probability 3/5
chain = markov(
    {(): (F(1, 2), F(1, 2)), (0,): (F(3, 5), F(2, 5)), (1,): (F(2, 5), F(3, 5))},
    order=1,
    alphabet="ab",
)
print("min-entropy per symbol:", round(chain.min_entropy, 4))

# %%
params = derive_params(8, c=1, delta=chain.min_entropy, b=1, rho=64)
print(f"blocks of {params.block_bits} bits, {params.ell} blocks, {params.t} symbols each")
key = keygen(params, rng)

# %%
message = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
st = se_encode(key, message, chain, (), rng)
print("stegotext:", "".join(chain.indices_to_symbols(st.symbols)))
print("draws per block:", list(st.draws))

# %%
recovered = sd_decode(key, st)
print("recovered:", recovered, "ok" if np.array_equal(recovered, message) else "MISMATCH")
