"""Multi-message stegosystem keyed by a resumable pseudorandom generator.

The generator is HMAC-SHA256 in counter mode: output block ``j`` is
``HMAC(master, j as 8 big-endian bytes)``, read MSB first. Because any
block can be computed directly, the state after ``N`` emitted bits is just
``(counter, offset) = divmod(N, 256)`` and resuming costs the same for
every ``N``.
"""
from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .bits import as_bits
from .channel import ChannelModel, check_history
from .errors import FormatError, ParameterError
from .otstego import ParamSet, Stegotext, advance_history, derive_params, key_from_bits, sd_decode, se_encode

PRG_BLOCK_BITS = 256
SESSION_HEADER = "stegokit-session v1"


def _prg_block(master: bytes, counter: int) -> np.ndarray:
    digest = hmac.new(master, counter.to_bytes(8, "big"), hashlib.sha256).digest()
    return np.unpackbits(np.frombuffer(digest, dtype=np.uint8))


def _prg_range(master: bytes, start: int, length: int) -> np.ndarray:
    if length == 0:
        return np.zeros(0, dtype=np.uint8)
    first, offset = divmod(start, PRG_BLOCK_BITS)
    last = (start + length - 1) // PRG_BLOCK_BITS
    stream = np.concatenate([_prg_block(master, j) for j in range(first, last + 1)])
    return stream[offset:offset + length]


def prg_expand(master: bytes, y: int) -> np.ndarray:
    """The first ``y`` generator bits for ``master``."""
    if y < 0:
        raise ValueError("output length must be non-negative")
    return _prg_range(bytes(master), 0, y)


@dataclass(frozen=True)
class PrgState:
    master: bytes
    n_consumed: int = 0
    aux: tuple = (0, 0)  # (block counter, offset inside the block)

    def __post_init__(self):
        if divmod(self.n_consumed, PRG_BLOCK_BITS) != tuple(self.aux):
            raise FormatError(f"aux {self.aux} inconsistent with N={self.n_consumed}")

    @classmethod
    def fresh(cls, master: bytes) -> "PrgState":
        return cls(bytes(master), 0, (0, 0))

    def aux_hex(self) -> str:
        counter, offset = self.aux
        return counter.to_bytes(8, "big").hex() + offset.to_bytes(2, "big").hex()

    @staticmethod
    def aux_from_hex(text: str) -> tuple:
        raw = bytes.fromhex(text.strip())
        if len(raw) != 10:
            raise FormatError("aux must be 10 bytes: 8-byte counter and 2-byte offset")
        return int.from_bytes(raw[:8], "big"), int.from_bytes(raw[8:], "big")


def prg_resume(state: PrgState, y_prime: int) -> tuple[np.ndarray, PrgState]:
    """Next ``y_prime`` bits after the ``N`` already consumed, and the advanced state."""
    if y_prime < 0:
        raise ValueError("output length must be non-negative")
    counter, offset = state.aux
    start = counter * PRG_BLOCK_BITS + offset
    out = _prg_range(state.master, start, y_prime)
    n = state.n_consumed + y_prime
    return out, PrgState(state.master, n, divmod(n, PRG_BLOCK_BITS))


@dataclass
class StreamSession:
    """Sender or receiver state; both ends must start from identical sessions.

    ``c``, ``delta``, ``eps_sec`` and ``rho`` fix how each message's one-time
    parameters are derived; ``delta`` defaults to the channel's declared
    min-entropy. ``bit_source``, when set, replaces the generator (used to
    compare against truly random keys).
    """

    prg: PrgState
    channel: ChannelModel
    history: tuple = ()
    c: int = 4
    delta: Optional[float] = None
    eps_sec: Optional[float] = None
    rho: Optional[int] = None
    bit_source: Optional[Callable[[int], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        self.history = check_history(self.channel, self.history)

    def params_for(self, nu: int) -> ParamSet:
        delta = self.channel.min_entropy if self.delta is None else self.delta
        return derive_params(nu, self.c, delta, self.channel.bits_per_symbol, self.eps_sec, self.rho)

    def _key(self, nu: int):
        params = self.params_for(nu)
        if self.bit_source is not None:
            bits = as_bits(self.bit_source(params.key_bits))
            n = self.prg.n_consumed + params.key_bits
            self.prg = PrgState(self.prg.master, n, divmod(n, PRG_BLOCK_BITS))
        else:
            bits, self.prg = prg_resume(self.prg, params.key_bits)
        return key_from_bits(params, bits)


def stream_encode(sess: StreamSession, message, rng: np.random.Generator) -> Stegotext:
    message = as_bits(message)
    if message.size < 2:
        raise ParameterError("stream messages must carry at least 2 bits")
    key = sess._key(message.size)
    st = se_encode(key, message, sess.channel, sess.history, rng)
    sess.history = advance_history(sess.history, st)
    return st


def stream_decode(sess: StreamSession, st: Stegotext, message_len: int) -> np.ndarray:
    """Decode the next message; a desynchronised session yields garbage, not an error."""
    if message_len < 2:
        raise ParameterError("stream messages must carry at least 2 bits")
    key = sess._key(message_len)
    out = sd_decode(key, st)
    sess.history = advance_history(sess.history, st)
    return out


# -- persistence -------------------------------------------------------------


def session_to_text(sess: StreamSession) -> str:
    return (
        f"{SESSION_HEADER}\n"
        f"master={sess.prg.master.hex()}\n"
        f"N={sess.prg.n_consumed}\n"
        f"aux={sess.prg.aux_hex()}\n"
        f"history={' '.join(sess.channel.indices_to_symbols(sess.history))}\n"
    )


def session_from_text(text: str, channel: ChannelModel, **template) -> StreamSession:
    """Restore a session; ``template`` supplies ``c``, ``delta``, ``eps_sec``, ``rho``."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != SESSION_HEADER:
        raise FormatError(f"session file must start with {SESSION_HEADER!r}")
    fields = {}
    for ln in lines[1:]:
        name, sep, value = ln.partition("=")
        if sep:
            fields[name.strip()] = value.strip()
    try:
        master = bytes.fromhex(fields["master"])
        n = int(fields["N"])
        aux = PrgState.aux_from_hex(fields["aux"])
        history = channel.symbols_to_indices(fields.get("history", "").split())
    except (KeyError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed session file: {exc}") from exc
    return StreamSession(PrgState(master, n, aux), channel, history, **template)


def clone_session(sess: StreamSession) -> StreamSession:
    return replace(sess)
