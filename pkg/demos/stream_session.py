"""
Several messages from one shared secret
=======================================

Sender and receiver share a 32-byte master secret. Each message takes a
fresh one-time key from the generator, and the session can be saved to
text and restored between messages.
"""
# %%
import numpy as np

from stegokit import memoryless
from stegokit.stream import PrgState, StreamSession, session_from_text, session_to_text, stream_decode, stream_encode

rng = np.random.default_rng(7)
dna = memoryless([0.25] * 4, alphabet="ACGT", min_entropy_bits=2.0)
template = {"c": 1, "rho": 64}

master = rng.bytes(32)
alice = StreamSession(PrgState.fresh(master), dna, **template)
bob_saved = session_to_text(alice)

# %%
for text in ("10110", "0011100", "111"):
    msg = np.array([int(ch) for ch in text], dtype=np.uint8)
    st = stream_encode(alice, msg, rng)
    bob = session_from_text(bob_saved, dna, **template)  # bob restarts each time
    got = stream_decode(bob, st, msg.size)
    bob_saved = session_to_text(bob)
    print(f"{text:>8} -> {''.join(dna.indices_to_symbols(st.symbols))[:40]}... -> {''.join(map(str, got))}")

print("generator bits used:", alice.prg.n_consumed)
