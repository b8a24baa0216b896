"""One-time stegosystem: key generation, embedding, and extraction.

The message is masked with a one-time pad, cut into ``ell`` blocks of
``block_bits`` bits (the last one zero-padded), and each block is hidden in
``t`` channel symbols found by rejection sampling against a seeded
extractor. The history grows by each chosen block before the next one is
sampled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bits import as_bits, bits_to_hex, bits_to_int, hex_to_bits, int_to_bits, random_bits
from .channel import ChannelModel, check_history, symbols_to_bits
from .errors import FormatError, ParameterError
from .extractor import ExtractorParams, ExtractorSeed, extract_rows
from .sampling import RejSamConfig, rejsam

KEY_HEADER = "stegokit-key v1"
DEFAULT_C = 4
DELTA_TOL = 1e-9
MAX_BLOCK_BITS = 62  # blocks and targets are packed into int64


def ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


@dataclass(frozen=True)
class ParamSet:
    nu: int
    c: int
    block_bits: int
    ell: int
    eps_sec: float
    rho: int
    t: int
    delta: float
    b: int
    extractor: ExtractorParams

    @property
    def lam(self) -> int:
        """Stegotext length in symbols."""
        return self.ell * self.t

    @property
    def key_bits(self) -> int:
        return self.nu + self.extractor.d

    @property
    def rejsam_config(self) -> RejSamConfig:
        return RejSamConfig(self.rho, self.t, self.block_bits)

    def block_lengths(self) -> list[int]:
        """Message bits carried by each block; only the last can be short."""
        return [min(self.block_bits, self.nu - i * self.block_bits) for i in range(self.ell)]


def derive_params(
    nu: int,
    c: int = DEFAULT_C,
    delta: float = 1.0,
    b: int = 1,
    eps_sec: Optional[float] = None,
    rho: Optional[int] = None,
) -> ParamSet:
    """Parameters for hiding ``nu`` bits in a channel of min-entropy ``delta`` per ``b``-bit symbol.

    ``eps_sec`` defaults to ``1 / (4 * 2**(2 * block_bits))`` and ``rho`` to
    ``2 * block_bits * 2**block_bits``, the choices that make the soundness
    bound go through; both can be overridden for small experiments.
    """
    if nu < 2:
        raise ParameterError("message length must be at least 2 bits")
    if c < 1:
        raise ParameterError("block-size constant c must be at least 1")
    if b < 1:
        raise ParameterError("bits per symbol must be at least 1")
    if not delta > 0:
        raise ParameterError("channel min-entropy must be positive")
    if delta > b + DELTA_TOL:
        raise ParameterError(f"min-entropy {delta} per symbol is impossible with {b}-bit symbols")
    block_bits = c * ceil_log2(nu)
    if block_bits >= nu:
        block_bits = nu
    if block_bits > MAX_BLOCK_BITS:
        raise ParameterError(f"block size {block_bits} exceeds {MAX_BLOCK_BITS} bits; lower c")
    ell = -(-nu // block_bits)
    if eps_sec is None:
        eps_sec = 1.0 / (4 * 2 ** (2 * block_bits))
    if not 0 < eps_sec < 1:
        raise ParameterError("eps_sec must lie in (0, 1)")
    if rho is None:
        rho = 2 * block_bits * 2 ** block_bits
    if rho < 0:
        raise ParameterError("rho must be non-negative")
    k = block_bits + 2 * math.log2(1 / eps_sec)
    t = math.ceil(k / delta - DELTA_TOL)
    ext = ExtractorParams.toeplitz(n=t * b, k=k, m=block_bits, eps=eps_sec)
    return ParamSet(nu, c, block_bits, ell, float(eps_sec), int(rho), t, float(delta), b, ext)


@dataclass(frozen=True)
class StegoKey:
    otp: np.ndarray
    seed: ExtractorSeed
    params: ParamSet

    def __post_init__(self):
        otp = as_bits(self.otp).copy()
        otp.setflags(write=False)
        object.__setattr__(self, "otp", otp)
        if otp.size != self.params.nu:
            raise FormatError(f"one-time pad has {otp.size} bits, expected {self.params.nu}")
        if len(self.seed) != self.params.extractor.d:
            raise FormatError(f"seed has {len(self.seed)} bits, expected {self.params.extractor.d}")

    def __eq__(self, other):
        return (
            isinstance(other, StegoKey)
            and np.array_equal(self.otp, other.otp)
            and self.seed == other.seed
            and self.params == other.params
        )


@dataclass(frozen=True)
class Stegotext:
    symbols: tuple
    ell: int
    t: int
    draws: tuple = field(default=(), compare=False)
    hits: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if len(self.symbols) != self.ell * self.t:
            raise FormatError(f"stegotext has {len(self.symbols)} symbols, expected {self.ell * self.t}")

    def blocks(self) -> list[tuple]:
        return [self.symbols[i * self.t:(i + 1) * self.t] for i in range(self.ell)]


def keygen(params: ParamSet, rng: np.random.Generator) -> StegoKey:
    otp = random_bits(params.nu, rng)
    seed = ExtractorSeed.random(params.extractor.d, rng)
    return StegoKey(otp, seed, params)


def key_from_bits(params: ParamSet, bits) -> StegoKey:
    """First ``nu`` bits become the pad, the next ``d`` the seed."""
    bits = as_bits(bits)
    if bits.size != params.key_bits:
        raise FormatError(f"need {params.key_bits} key bits, got {bits.size}")
    return StegoKey(bits[: params.nu], ExtractorSeed(bits[params.nu:]), params)


def block_map(key: StegoKey):
    p = key.params
    return lambda blocks: extract_rows(p.extractor, key.seed, symbols_to_bits(blocks, p.b))


def _check_channel(params: ParamSet, c: ChannelModel):
    if c.bits_per_symbol != params.b:
        raise ParameterError(f"channel has {c.bits_per_symbol}-bit symbols, key expects {params.b}")
    if c.min_entropy < params.delta - DELTA_TOL:
        raise ParameterError(f"channel min-entropy {c.min_entropy} below the key's delta {params.delta}")


def masked_targets(key: StegoKey, message) -> list[int]:
    """Pad-masked message cut into zero-padded blocks, each packed MSB first."""
    p = key.params
    message = as_bits(message)
    if message.size != p.nu:
        raise FormatError(f"message has {message.size} bits, key expects {p.nu}")
    masked = np.zeros(p.ell * p.block_bits, dtype=np.uint8)
    masked[: p.nu] = key.otp ^ message
    return [bits_to_int(masked[i * p.block_bits:(i + 1) * p.block_bits]) for i in range(p.ell)]


def se_encode(
    key: StegoKey,
    message,
    c: ChannelModel,
    h: Sequence[int],
    rng: np.random.Generator,
) -> Stegotext:
    p = key.params
    _check_channel(p, c)
    h = check_history(c, h)
    f = block_map(key)
    cfg = p.rejsam_config
    symbols, draws, hits = [], [], []
    for target in masked_targets(key, message):
        res = rejsam(cfg, target, c, h, f, rng)
        symbols.extend(res.block)
        draws.append(res.draws)
        hits.append(res.hit)
        h = h + res.block
    return Stegotext(tuple(symbols), p.ell, p.t, tuple(draws), tuple(hits))


def sd_decode(key: StegoKey, st: Stegotext) -> np.ndarray:
    p = key.params
    if st.ell != p.ell or st.t != p.t or len(st.symbols) != p.lam:
        raise FormatError(f"stegotext shape ({st.ell} x {st.t}) does not match key ({p.ell} x {p.t})")
    outs = block_map(key)(np.array(st.blocks(), dtype=np.int64))
    masked = np.concatenate([int_to_bits(int(y), p.block_bits) for y in outs])[: p.nu]
    return masked ^ key.otp


def advance_history(h: Sequence[int], st: Stegotext) -> tuple:
    return tuple(h) + st.symbols


# -- file formats ------------------------------------------------------------


def _decimal(x: float) -> str:
    return np.format_float_positional(float(x), unique=True, trim="-")


def key_to_text(key: StegoKey) -> str:
    p = key.params
    return (
        f"{KEY_HEADER}\n"
        f"nu={p.nu} c={p.c} delta={_decimal(p.delta)} b={p.b} eps={_decimal(p.eps_sec)} rho={p.rho}\n"
        f"otp={bits_to_hex(key.otp)}\n"
        f"seed={key.seed.to_hex()}\n"
    )


def _fields(line: str) -> dict:
    out = {}
    for tok in line.split():
        name, sep, value = tok.partition("=")
        if not sep:
            raise FormatError(f"expected name=value, got {tok!r}")
        out[name] = value
    return out


def key_from_text(text: str) -> StegoKey:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 4 or lines[0] != KEY_HEADER:
        raise FormatError(f"key file must start with {KEY_HEADER!r} and have 4 lines")
    try:
        f = _fields(lines[1])
        params = derive_params(
            nu=int(f["nu"]),
            c=int(f["c"]),
            delta=float(f["delta"]),
            b=int(f["b"]),
            eps_sec=float(f["eps"]),
            rho=int(f["rho"]),
        )
        otp = _fields(lines[2])["otp"]
        seed = _fields(lines[3])["seed"]
    except (KeyError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed key file: {exc}") from exc
    return StegoKey(hex_to_bits(otp, params.nu), ExtractorSeed.from_hex(seed, params.extractor.d), params)


def stegotext_to_line(st: Stegotext, c: ChannelModel) -> str:
    return " ".join(c.indices_to_symbols(st.symbols)) + "\n"


def stegotext_from_line(line: str, c: ChannelModel, params: ParamSet) -> Stegotext:
    symbols = c.symbols_to_indices(line.split())
    if len(symbols) != params.lam:
        raise FormatError(f"stegotext has {len(symbols)} symbols, key expects {params.lam}")
    return Stegotext(symbols, params.ell, params.t)
