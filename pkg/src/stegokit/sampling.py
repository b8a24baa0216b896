"""Bounded rejection sampling of channel blocks, and its exact output law.

A block map ``f`` takes a ``(count, t)`` array of symbol blocks and returns
packed ``eta``-bit outputs, MSB first; targets are packed the same way. A
numpy array is accepted as a lookup table indexed by block index
(base-|alphabet|, first symbol most significant).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .channel import BlockDistribution, ChannelModel, all_blocks, block_indices, marginal_block, sample_blocks
from .errors import ParameterError, RangeError
from .probability import Distribution, integer_weights

BlockMap = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RejSamConfig:
    rho: int
    t: int
    eta: int

    def __post_init__(self):
        if self.rho < 0:
            raise ParameterError("rho must be non-negative")
        if self.t < 1 or self.eta < 1:
            raise ParameterError("t and eta must be positive")


@dataclass(frozen=True)
class RejSamResult:
    block: tuple
    draws: int
    hit: bool


def apply_map(f: BlockMap, blocks: np.ndarray, eta: int, size: int) -> np.ndarray:
    blocks = np.asarray(blocks, dtype=np.int64)
    out = f[block_indices(blocks, size)] if isinstance(f, np.ndarray) else f(blocks)
    out = np.asarray(out, dtype=np.int64)
    if out.size and (out.min() < 0 or out.max() >= 1 << eta):
        raise RangeError(f"block map produced a value outside [0, 2**{eta})")
    return out


def _check_target(target: int, eta: int):
    if not 0 <= target < 1 << eta:
        raise RangeError(f"target {target} is not an {eta}-bit value")


def rejsam(
    cfg: RejSamConfig,
    target: int,
    c: ChannelModel,
    h: Sequence[int],
    f: BlockMap,
    rng: np.random.Generator,
) -> RejSamResult:
    """Draw blocks after the fixed history ``h`` until one maps to ``target``.

    At most ``rho + 1`` blocks are drawn; when none of the first ``rho``
    hits, the last draw is returned anyway.
    """
    _check_target(target, cfg.eta)
    h = tuple(h)
    limit = cfg.rho + 1
    drawn = 0
    chunk = 4
    while True:
        n = min(chunk, limit - drawn)
        blocks = sample_blocks(c, h, cfg.t, n, rng)
        hits = np.flatnonzero(apply_map(f, blocks, cfg.eta, c.size) == target)
        if hits.size:
            i = int(hits[0])
            return RejSamResult(tuple(blocks[i].tolist()), drawn + i + 1, True)
        drawn += n
        if drawn >= limit:
            return RejSamResult(tuple(blocks[-1].tolist()), drawn, False)
        chunk *= 2


def expected_draws(hit_probability: float, rho: int) -> float:
    """Mean number of channel draws for per-draw hit probability ``p``."""
    p = hit_probability
    if p == 0:
        return float(rho + 1)
    miss = (1 - p) ** rho
    return (1 - miss) / p + miss


def survival_terms(q, rho: int):
    """``(sum_{j<rho} (1-q)**j, (1-q)**rho)`` accumulated one round at a time."""
    survive = Fraction(1) if isinstance(q, Fraction) else 1.0
    acc = 0 * survive
    for _ in range(rho):
        acc += survive
        survive *= 1 - q
    return acc, survive


def output_ratios(hit_probs: Sequence, target_weights: Sequence, rho: int) -> list:
    """Likelihood ratio ``Pr[rejsam out = c] / Pr[channel = c]`` as a function of ``f(c)``.

    ``hit_probs[y]`` is ``Pr[f(C) = y]`` under the channel block law and
    ``target_weights[y]`` the probability of target ``y``.
    """
    terms = [survival_terms(q, rho) for q in hit_probs]
    tail = sum(w * s for w, (_, s) in zip(target_weights, terms))
    return [w * a + tail for w, (a, _) in zip(target_weights, terms)]


def _block_law(cfg: RejSamConfig, c: ChannelModel, h, f: BlockMap):
    block = marginal_block(c, h, cfg.t)
    outputs = apply_map(f, all_blocks(c.size, cfg.t), cfg.eta, c.size)
    return block, outputs


def _hit_probs(block: BlockDistribution, outputs: np.ndarray, eta: int) -> list:
    d = block.dist
    if d.exact:
        weights, denom = integer_weights(d)
        sums = [0] * (1 << eta)
        for y, w in zip(outputs.tolist(), weights.tolist()):
            sums[y] += w
        return [Fraction(s, denom) for s in sums]
    return np.bincount(outputs, weights=d.as_array(), minlength=1 << eta).tolist()


def rejsam_exact_distribution(
    cfg: RejSamConfig,
    target: int,
    c: ChannelModel,
    h: Sequence[int],
    f: BlockMap,
) -> BlockDistribution:
    """Exact law of :func:`rejsam` output for one fixed target, round by round."""
    _check_target(target, cfg.eta)
    block, outputs = _block_law(cfg, c, h, f)
    d = block.dist
    hits = outputs == target
    q = sum((m for m, hit in zip(d.mass, hits) if hit), Fraction(0) if d.exact else 0.0)
    survive = Fraction(1) if d.exact else 1.0
    out = [0 * survive] * d.support_size
    for _ in range(cfg.rho):
        for i, (m, hit) in enumerate(zip(d.mass, hits)):
            if hit:
                out[i] += survive * m
        survive *= 1 - q
    out = [o + survive * m for o, m in zip(out, d.mass)]
    return BlockDistribution(cfg.t, Distribution(tuple(out)))


def rejsam_mixture_distribution(
    cfg: RejSamConfig,
    target_law: Distribution,
    c: ChannelModel,
    h: Sequence[int],
    f: BlockMap,
) -> BlockDistribution:
    """Output law when the target itself is drawn from ``target_law``."""
    if target_law.support_size != 1 << cfg.eta:
        raise RangeError(f"target law must cover 2**{cfg.eta} values")
    block, outputs = _block_law(cfg, c, h, f)
    q = _hit_probs(block, outputs, cfg.eta)
    ratio = output_ratios(q, target_law.mass, cfg.rho)
    mass = tuple(m * ratio[y] for m, y in zip(block.dist.mass, outputs.tolist()))
    if not block.dist.exact:
        s = sum(mass)
        mass = tuple(x / s for x in mass)
    return BlockDistribution(cfg.t, Distribution(mass))


def hit_law(cfg: RejSamConfig, c: ChannelModel, h: Sequence[int], f: BlockMap) -> Distribution:
    """Law of ``f(C_h^t)``.

    As a target law it reproduces the channel only when ``rho == 0`` or the
    hit probability is constant on the image of ``f``.
    """
    block, outputs = _block_law(cfg, c, h, f)
    return Distribution(tuple(_hit_probs(block, outputs, cfg.eta)))
