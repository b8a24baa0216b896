"""Finite probability distributions and the distances used throughout.

Two numeric backends share one type: a :class:`Distribution` whose masses
are all :class:`fractions.Fraction` is *exact*, and every operation on
exact inputs returns exact results (min-entropy aside, which is a
logarithm). Float masses give float results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DimensionError, DistributionError, RangeError

FLOAT_TOL = 1e-12

Number = Union[Fraction, float]
Map = Union[Callable[[int], int], Sequence[int], np.ndarray]


def _coerce(value) -> Number:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    return float(value)


@dataclass(frozen=True)
class Distribution:
    """Probability mass function over ``range(support_size)``."""

    mass: tuple

    def __post_init__(self):
        mass = tuple(_coerce(m) for m in self.mass)
        if not mass:
            raise DistributionError("distribution needs a non-empty support")
        exact = all(isinstance(m, Fraction) for m in mass)
        if not exact:
            mass = tuple(float(m) for m in mass)
        for m in mass:
            if m < 0 or m > 1:
                raise DistributionError(f"mass entry {m} outside [0, 1]")
        total = sum(mass)
        if exact:
            if total != 1:
                raise DistributionError(f"masses sum to {total}, not 1")
        elif abs(total - 1.0) > FLOAT_TOL * max(1, len(mass)):
            raise DistributionError(f"masses sum to {total!r}, not 1")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def uniform(cls, size: int, exact: bool = True) -> "Distribution":
        p = Fraction(1, size) if exact else 1.0 / size
        return cls((p,) * size)

    @classmethod
    def point(cls, size: int, index: int, exact: bool = True) -> "Distribution":
        one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
        return cls(tuple(one if i == index else zero for i in range(size)))

    @classmethod
    def flat(cls, size: int, support, exact: bool = True) -> "Distribution":
        """Uniform over the index set ``support`` inside ``range(size)``."""
        support = set(int(i) for i in support)
        p = Fraction(1, len(support)) if exact else 1.0 / len(support)
        zero = Fraction(0) if exact else 0.0
        return cls(tuple(p if i in support else zero for i in range(size)))

    @property
    def support_size(self) -> int:
        return len(self.mass)

    @property
    def exact(self) -> bool:
        return isinstance(self.mass[0], Fraction)

    def to_float(self) -> "Distribution":
        return Distribution(tuple(float(m) for m in self.mass))

    def as_array(self) -> np.ndarray:
        return np.array([float(m) for m in self.mass], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.mass)

    def __getitem__(self, i: int) -> Number:
        return self.mass[i]


@dataclass(frozen=True)
class BiasReport:
    max_deviation: Number
    worst_output: int


def min_entropy(d: Distribution) -> float:
    """Min-entropy in bits; zero-mass entries are ignored."""
    top = max(d.mass)
    if top <= 0:
        raise DistributionError("all-zero distribution has no min-entropy")
    if isinstance(top, Fraction):
        return math.log2(top.denominator) - math.log2(top.numerator)
    return -math.log2(top)


def _check_pair(p: Distribution, q: Distribution):
    if p.support_size != q.support_size:
        raise DimensionError(f"support sizes differ: {p.support_size} vs {q.support_size}")
    if p.exact != q.exact:
        return p.to_float(), q.to_float()
    return p, q


def statistical_distance(p: Distribution, q: Distribution) -> Number:
    """Half the L1 distance between two mass vectors."""
    p, q = _check_pair(p, q)
    return sum(abs(a - b) for a, b in zip(p.mass, q.mass)) / 2


def worst_event_distance(p: Distribution, q: Distribution) -> tuple[Number, frozenset]:
    """The event where ``p`` falls short of ``q`` the most, with its gap.

    The gap equals :func:`statistical_distance` exactly.
    """
    p, q = _check_pair(p, q)
    event = frozenset(i for i, (a, b) in enumerate(zip(p.mass, q.mass)) if a < b)
    gap = sum((q.mass[i] - p.mass[i] for i in event), Fraction(0) if p.exact else 0.0)
    return gap, event


def event_probability(d: Distribution, event) -> Number:
    return sum((d.mass[i] for i in event), Fraction(0) if d.exact else 0.0)


def _as_table(f: Map, size: int) -> list[int]:
    if callable(f):
        return [int(f(i)) for i in range(size)]
    table = [int(v) for v in np.asarray(f).reshape(-1)]
    if len(table) != size:
        raise DimensionError(f"lookup table has {len(table)} entries, support has {size}")
    return table


def pushforward(f: Map, d: Distribution, output_count: int) -> Distribution:
    """Distribution of ``f(X)`` for ``X ~ d``; ``f`` is a callable or lookup table."""
    if output_count < 1:
        raise RangeError("output_count must be at least 1")
    table = _as_table(f, d.support_size)
    zero = Fraction(0) if d.exact else 0.0
    out = [zero] * output_count
    for x, y in enumerate(table):
        if not 0 <= y < output_count:
            raise RangeError(f"f({x}) = {y} outside [0, {output_count})")
        out[y] += d.mass[x]
    if not d.exact:
        # keep float round-off from failing the sum check
        s = sum(out)
        out = [v / s for v in out]
    return Distribution(tuple(out))


def bias_of(f: Map, d: Distribution, output_count: int) -> BiasReport:
    """Largest deviation of ``Pr[f(X)=y]`` from ``1/output_count``."""
    image = pushforward(f, d, output_count)
    target = Fraction(1, output_count) if d.exact else 1.0 / output_count
    devs = [abs(m - target) for m in image.mass]
    worst = max(range(output_count), key=devs.__getitem__)
    return BiasReport(devs[worst], worst)


def mix(weights: Sequence[Number], dists: Sequence[Distribution]) -> Distribution:
    """Convex combination of distributions over a common support."""
    if len(weights) != len(dists) or not dists:
        raise DimensionError("need one weight per distribution")
    size = dists[0].support_size
    exact = all(d.exact for d in dists) and all(isinstance(_coerce(w), Fraction) for w in weights)
    zero = Fraction(0) if exact else 0.0
    out = [zero] * size
    for w, d in zip(weights, dists):
        if d.support_size != size:
            raise DimensionError("mixture components have different supports")
        w = _coerce(w) if exact else float(w)
        for i, m in enumerate(d.mass):
            out[i] += w * (m if exact else float(m))
    return Distribution(tuple(out))


def integer_weights(d: Distribution) -> tuple[np.ndarray, int]:
    """Numerators over the least common denominator of an exact distribution."""
    if not d.exact:
        raise DistributionError("integer weights need an exact distribution")
    denom = 1
    for m in d.mass:
        denom = math.lcm(denom, m.denominator)
    nums = [m.numerator * (denom // m.denominator) for m in d.mass]
    dtype = np.int64 if denom < (1 << 62) else object
    return np.array(nums, dtype=dtype), denom


def grouped_sums(keys: np.ndarray, weights: np.ndarray, size: int) -> np.ndarray:
    """``out[k] = sum(weights[keys == k])`` without leaving integer arithmetic."""
    out = np.zeros(size, dtype=weights.dtype)
    np.add.at(out, np.asarray(keys, dtype=np.int64), weights)
    return out
