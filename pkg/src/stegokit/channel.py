"""History-dependent channels realized as memoryless or order-r Markov tables.

A history is a tuple of alphabet indices. Only its last ``order`` symbols
select the next-symbol distribution; histories shorter than ``order``
select the row keyed by the whole history, so every context of length
``0..order`` must have an explicit row.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from os import PathLike
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ChannelError, EnumerationTooLarge, PreconditionError
from .probability import Distribution, min_entropy

DEFAULT_ENUMERATION_CAP = 1 << 20
ENTROPY_TOL = 1e-12

History = tuple


@dataclass(frozen=True)
class ChannelModel:
    alphabet: tuple
    order: int
    rows: Mapping[tuple, Distribution]
    min_entropy: float
    _cum: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        alphabet = tuple(str(s) for s in self.alphabet)
        object.__setattr__(self, "alphabet", alphabet)
        size = len(alphabet)
        if size < 2 or size & (size - 1):
            raise ChannelError(f"alphabet size {size} is not a power of two >= 2")
        if len(set(alphabet)) != size:
            raise ChannelError("alphabet symbols must be distinct")
        if self.order < 0:
            raise ChannelError("markov order must be non-negative")
        if not self.min_entropy > 0:
            raise ChannelError("declared min-entropy must be positive")
        if self.min_entropy > self.bits_per_symbol + ENTROPY_TOL:
            raise ChannelError(
                f"declared min-entropy {self.min_entropy} exceeds log2|alphabet| = {self.bits_per_symbol}"
            )
        rows = {tuple(int(s) for s in ctx): d for ctx, d in self.rows.items()}
        for length in range(self.order + 1):
            for ctx in itertools.product(range(size), repeat=length):
                if ctx not in rows:
                    raise ChannelError(f"missing row for context {self.format_context(ctx)!r}")
        cum = {}
        for ctx, row in rows.items():
            if len(ctx) > self.order:
                raise ChannelError(f"context {ctx} longer than order {self.order}")
            if row.support_size != size:
                raise ChannelError(f"row {self.format_context(ctx)!r} has {row.support_size} entries, expected {size}")
            h = min_entropy(row)
            if h < self.min_entropy - ENTROPY_TOL:
                raise ChannelError(
                    f"row {self.format_context(ctx)!r} has min-entropy {h:.6f} < declared {self.min_entropy}"
                )
            c = np.cumsum(row.as_array())
            c[-1] = 1.0
            cum[ctx] = c
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_cum", cum)

    @property
    def size(self) -> int:
        return len(self.alphabet)

    @property
    def bits_per_symbol(self) -> int:
        return self.size.bit_length() - 1

    @property
    def kind(self) -> str:
        return "memoryless" if self.order == 0 else "markov"

    @property
    def exact(self) -> bool:
        return all(r.exact for r in self.rows.values())

    def context(self, history: Sequence[int]) -> tuple:
        if self.order == 0:
            return ()
        return tuple(history[-self.order:])

    def row(self, history: Sequence[int]) -> Distribution:
        return self.rows[self.context(history)]

    def _full_cum(self) -> np.ndarray:
        """Cumulative rows for all length-``order`` contexts, indexed by base-|alphabet| code."""
        cached = self.__dict__.get("_full")
        if cached is None:
            ctxs = itertools.product(range(self.size), repeat=self.order)
            cached = np.stack([self._cum[ctx] for ctx in ctxs])
            object.__setattr__(self, "_full", cached)
        return cached

    def format_context(self, ctx) -> str:
        syms = [self.alphabet[i] for i in ctx]
        sep = "" if all(len(s) == 1 for s in self.alphabet) else " "
        return sep.join(syms)

    def symbols_to_indices(self, symbols: Sequence[str]) -> tuple:
        lookup = {s: i for i, s in enumerate(self.alphabet)}
        try:
            return tuple(lookup[s] for s in symbols)
        except KeyError as exc:
            raise ChannelError(f"symbol {exc.args[0]!r} not in alphabet") from None

    def indices_to_symbols(self, indices: Sequence[int]) -> list[str]:
        return [self.alphabet[i] for i in indices]


@dataclass(frozen=True)
class BlockDistribution:
    """Exact law of the next ``t`` symbols; outcome index is base-|alphabet|, first symbol most significant."""

    t: int
    dist: Distribution


def check_history(c: ChannelModel, h: Sequence[int]) -> History:
    h = tuple(int(s) for s in h)
    if any(s < 0 or s >= c.size for s in h):
        raise PreconditionError("history contains a symbol outside the alphabet")
    return h


# -- loading ---------------------------------------------------------------


def _parse_context(text: str, alphabet: tuple) -> tuple:
    text = text.strip()
    if not text:
        return ()
    lookup = {s: i for i, s in enumerate(alphabet)}
    parts = text.split() if (" " in text or any(len(s) > 1 for s in alphabet)) else list(text)
    try:
        return tuple(lookup[p] for p in parts)
    except KeyError as exc:
        raise ChannelError(f"context {text!r} uses unknown symbol {exc.args[0]!r}") from None


def _parse_prob(value) -> Fraction:
    if isinstance(value, bool):
        raise ChannelError("probabilities must be numbers or decimal strings")
    try:
        # go through str so JSON floats like 0.7 become 7/10, not a binary approximation
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ChannelError(f"bad probability {value!r}") from exc


def channel_from_dict(doc: Mapping) -> ChannelModel:
    try:
        alphabet = tuple(str(s) for s in doc["alphabet"])
        kind = doc.get("kind", "memoryless")
        declared = float(doc["min_entropy"])
        raw_rows = doc["rows"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ChannelError(f"malformed channel document: {exc}") from exc
    if kind == "memoryless":
        order = 0
    elif kind == "markov":
        try:
            order = int(doc["order"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ChannelError("markov channel needs an integer 'order'") from exc
        if order < 1:
            raise ChannelError("markov order must be at least 1")
    else:
        raise ChannelError(f"unknown channel kind {kind!r}")
    if not isinstance(raw_rows, Mapping):
        raise ChannelError("'rows' must map context strings to probability lists")
    rows = {}
    for key, probs in raw_rows.items():
        ctx = _parse_context(str(key), alphabet)
        if ctx in rows:
            raise ChannelError(f"duplicate row for context {key!r}")
        try:
            rows[ctx] = Distribution(tuple(_parse_prob(p) for p in probs))
        except (TypeError, ValueError) as exc:
            raise ChannelError(f"row {key!r}: {exc}") from exc
    return ChannelModel(alphabet, order, rows, declared)


def load_channel(source: Union[str, Mapping]) -> ChannelModel:
    """Build a validated model from a JSON channel document (text or parsed)."""
    if isinstance(source, Mapping):
        return channel_from_dict(source)
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ChannelError(f"channel document is not valid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ChannelError("channel document must be a JSON object")
    return channel_from_dict(doc)


def load_channel_file(path: Union[str, PathLike]) -> ChannelModel:
    with open(path, encoding="utf-8") as fh:
        return load_channel(fh.read())


def channel_to_dict(c: ChannelModel) -> dict:
    doc = {
        "alphabet": list(c.alphabet),
        "kind": c.kind,
        "min_entropy": c.min_entropy,
        "rows": {
            c.format_context(ctx): [str(m) for m in row.mass]
            for ctx, row in sorted(c.rows.items(), key=lambda kv: (len(kv[0]), kv[0]))
        },
    }
    if c.order:
        doc["order"] = c.order
    return doc


def memoryless(probs: Sequence, alphabet=None, min_entropy_bits=None) -> ChannelModel:
    """Convenience constructor; the declared min-entropy defaults to the row's own."""
    row = Distribution(tuple(_parse_prob(p) if isinstance(p, str) else p for p in probs))
    alphabet = tuple(alphabet) if alphabet else tuple(str(i) for i in range(row.support_size))
    delta = min_entropy(row) if min_entropy_bits is None else min_entropy_bits
    return ChannelModel(alphabet, 0, {(): row}, delta)


def markov(rows: Mapping[tuple, Sequence], order: int, alphabet=None, min_entropy_bits=None) -> ChannelModel:
    dists = {tuple(k): Distribution(tuple(v)) for k, v in rows.items()}
    size = next(iter(dists.values())).support_size
    alphabet = tuple(alphabet) if alphabet else tuple(str(i) for i in range(size))
    delta = min(min_entropy(d) for d in dists.values()) if min_entropy_bits is None else min_entropy_bits
    return ChannelModel(alphabet, order, dists, delta)


# -- sampling --------------------------------------------------------------


def sample(c: ChannelModel, h: Sequence[int], rng: np.random.Generator) -> int:
    """One symbol drawn from the row selected by ``h``; ``h`` is not modified."""
    cum = c._cum[c.context(h)]
    return int(np.searchsorted(cum, rng.random(), side="right"))


def sample_blocks(c: ChannelModel, h: Sequence[int], t: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent ``t``-symbol blocks, every one continuing the same history ``h``."""
    out = np.empty((count, t), dtype=np.int64)
    if count == 0 or t == 0:
        return out
    if c.order == 0:
        cum = c._cum[()]
        u = rng.random((count, t))
        out[:] = np.minimum(np.searchsorted(cum, u, side="right"), c.size - 1)
        return out
    h = tuple(h)
    r = c.order
    size = c.size
    full = c._full_cum()
    code = None
    for i in range(t):
        u = rng.random(count)
        if len(h) + i >= r:
            if code is None:
                # first step with a full-length context
                tail = h[len(h) - (r - i):] if r > i else ()
                ctx = np.zeros(count, dtype=np.int64)
                for sym in tail:
                    ctx = ctx * size + sym
                for j in range(max(0, i - r), i):
                    ctx = ctx * size + out[:, j]
                code = ctx
            cum = full[code]
        else:
            keys = [h + tuple(row) for row in out[:, :i].tolist()]
            cum = np.stack([c._cum[k] for k in keys])
        sym = np.minimum((u[:, None] >= cum).sum(axis=1), size - 1)
        out[:, i] = sym
        if code is not None:
            code = (code * size + sym) % (size ** r)
    return out


def sample_sequence(c: ChannelModel, h: Sequence[int], length: int, rng: np.random.Generator) -> tuple:
    """``length`` covertext symbols continuing ``h``, each conditioned on everything before it."""
    return tuple(int(s) for s in sample_blocks(c, h, length, 1, rng)[0])


# -- exact marginals -------------------------------------------------------


def block_indices(blocks: np.ndarray, size: int) -> np.ndarray:
    """Outcome index of each row of a ``(count, t)`` symbol array; needs ``size**t < 2**63``."""
    blocks = np.asarray(blocks, dtype=np.int64)
    t = blocks.shape[1]
    if size ** t >= 1 << 63:
        raise EnumerationTooLarge(f"{size}^{t} block outcomes do not fit a 64-bit index")
    powers = np.array([size ** (t - 1 - i) for i in range(t)], dtype=np.int64)
    return blocks @ powers


def all_blocks(size: int, t: int) -> np.ndarray:
    """Every ``t``-symbol block as rows, in outcome-index order."""
    idx = np.arange(size ** t, dtype=np.int64)[:, None]
    powers = np.array([size ** (t - 1 - i) for i in range(t)], dtype=np.int64)
    return (idx // powers) % size


def symbols_to_bits(blocks: np.ndarray, b: int) -> np.ndarray:
    """Expand ``(count, t)`` symbols into ``(count, t*b)`` bits, each symbol MSB first."""
    blocks = np.asarray(blocks, dtype=np.int64)
    shifts = np.arange(b - 1, -1, -1, dtype=np.int64)
    bits = (blocks[:, :, None] >> shifts) & 1
    return bits.reshape(blocks.shape[0], -1).astype(np.uint8)


def block_index(symbols: Sequence[int], size: int) -> int:
    idx = 0
    for s in symbols:
        idx = idx * size + int(s)
    return idx


def block_symbols(index: int, t: int, size: int) -> tuple:
    out = []
    for _ in range(t):
        index, s = divmod(index, size)
        out.append(s)
    return tuple(reversed(out))


def marginal_block(c: ChannelModel, h: Sequence[int], t: int, cap: int = DEFAULT_ENUMERATION_CAP) -> BlockDistribution:
    """Exact chain-rule law of the next ``t`` symbols after history ``h``."""
    if t < 1:
        raise PreconditionError("block length must be at least 1")
    if c.size ** t > cap:
        raise EnumerationTooLarge(f"|alphabet|^t = {c.size}^{t} exceeds the cap of {cap} outcomes")
    h = tuple(h)
    exact = c.exact
    if c.order == 0:
        row = c.rows[()].mass if exact else tuple(float(m) for m in c.rows[()].mass)
        probs = [Fraction(1) if exact else 1.0]
        for _ in range(t):
            probs = [p * m for p in probs for m in row]
        return BlockDistribution(t, Distribution(tuple(probs)))
    probs = [Fraction(1) if exact else 1.0]
    prefixes = [()]
    for _ in range(t):
        nxt_p, nxt_x = [], []
        for p, pre in zip(probs, prefixes):
            row = c.row(h + pre if len(pre) < c.order else pre).mass
            for s, m in enumerate(row):
                nxt_p.append(p * (m if exact else float(m)))
                nxt_x.append((pre + (s,))[-c.order:])
        probs, prefixes = nxt_p, nxt_x
    if not exact:
        s = sum(probs)
        probs = [p / s for p in probs]
    return BlockDistribution(t, Distribution(tuple(probs)))
