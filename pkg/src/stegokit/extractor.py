"""Seeded strong extractor built from Toeplitz-matrix hashing.

Toeplitz hashing is a universal hash family, so by the leftover hash lemma
it extracts ``m`` bits that are ``0.5 * sqrt(2**(m - k))``-close to
uniform (jointly with the seed) from any source of min-entropy ``k``.

Seed layout, fixed for interoperability: for an ``m x n`` matrix ``T`` and
seed bits ``s[0..n+m-2]``, the first row is ``s[0:n]`` and ``T[i][0]`` for
``i >= 1`` is ``s[n + i - 1]``; every other entry copies its upper-left
neighbour, i.e. ``T[i][j] = s[j - i]`` for ``j >= i`` and
``T[i][j] = s[n + i - j - 1]`` otherwise. Output bit ``i`` is
``sum_j T[i][j] * x[j] mod 2``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .bits import as_bits, bits_to_hex, hex_to_bits, index_bits, int_to_bits, pack_rows
from .errors import DimensionError, EnumerationTooLarge, ParameterError, PreconditionError
from .probability import Distribution, grouped_sums, integer_weights, min_entropy

ENUMERATION_CAP = 1 << 26
PARAM_TOL = 1e-9


@dataclass(frozen=True)
class ExtractorParams:
    n: int
    k: float
    d: int
    m: int
    eps: float

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ParameterError("extractor needs n >= 1 and m >= 1")
        if not 0 < self.eps <= 1:
            raise ParameterError(f"extractor error must lie in (0, 1], got {self.eps}")
        if self.k > self.n + PARAM_TOL:
            raise ParameterError(f"min-entropy threshold k={self.k} exceeds source length n={self.n}")
        if self.d != self.n + self.m - 1:
            raise ParameterError(f"Toeplitz seed length must be n + m - 1 = {self.n + self.m - 1}, got {self.d}")
        if self.m > self.k - 2 * math.log2(1 / self.eps) + PARAM_TOL:
            raise ParameterError(
                f"output length m={self.m} exceeds k - 2 log2(1/eps) = {self.k - 2 * math.log2(1 / self.eps):.6f}"
            )

    @classmethod
    def toeplitz(cls, n: int, k: float, m: int, eps: float) -> "ExtractorParams":
        return cls(n=n, k=k, d=n + m - 1, m=m, eps=eps)

    @property
    def lhl_error(self) -> float:
        """Leftover-hash guarantee ``0.5 * sqrt(2**(m - k))`` for a ``k``-source."""
        return 0.5 * math.sqrt(2.0 ** (self.m - self.k))

    @property
    def entropy_loss(self) -> float:
        return self.k + self.d - self.m


@dataclass(frozen=True)
class ExtractorSeed:
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", as_bits(self.bits).copy())
        self.bits.setflags(write=False)

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other):
        return isinstance(other, ExtractorSeed) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def to_hex(self) -> str:
        return bits_to_hex(self.bits)

    @classmethod
    def from_hex(cls, text: str, d: int) -> "ExtractorSeed":
        return cls(hex_to_bits(text, d))

    @classmethod
    def from_int(cls, value: int, d: int) -> "ExtractorSeed":
        return cls(int_to_bits(value, d))

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> "ExtractorSeed":
        return cls(rng.integers(0, 2, size=d, dtype=np.uint8))


def toeplitz_matrix(p: ExtractorParams, s: ExtractorSeed) -> np.ndarray:
    if len(s) != p.d:
        raise DimensionError(f"seed has {len(s)} bits, params need d={p.d}")
    i = np.arange(p.m)[:, None]
    j = np.arange(p.n)[None, :]
    idx = np.where(j >= i, j - i, p.n + i - j - 1)
    return s.bits[idx]


def extract(p: ExtractorParams, s: ExtractorSeed, x) -> np.ndarray:
    """``m`` output bits for the ``n``-bit input ``x``."""
    x = as_bits(x)
    if x.size != p.n:
        raise DimensionError(f"input has {x.size} bits, params need n={p.n}")
    return (toeplitz_matrix(p, s).astype(np.int64) @ x.astype(np.int64) % 2).astype(np.uint8)


def extract_rows(p: ExtractorParams, s: ExtractorSeed, X: np.ndarray) -> np.ndarray:
    """Packed ``m``-bit outputs for each row of the ``(count, n)`` bit matrix ``X``."""
    X = np.asarray(X, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != p.n:
        raise DimensionError(f"inputs must be rows of n={p.n} bits")
    return pack_rows(X @ toeplitz_matrix(p, s).T.astype(np.int64) % 2)


def extract_indices(p: ExtractorParams, s: ExtractorSeed, indices) -> np.ndarray:
    """Packed outputs for inputs given as ``n``-bit integers (MSB = input bit 0)."""
    return extract_rows(p, s, index_bits(indices, p.n))


def extract_all(p: ExtractorParams, s: ExtractorSeed) -> np.ndarray:
    """Packed output for every one of the ``2**n`` inputs, built column by column."""
    if 1 << p.n > ENUMERATION_CAP:
        raise EnumerationTooLarge(f"2**{p.n} inputs exceeds the enumeration cap")
    cols = pack_rows(toeplitz_matrix(p, s).T)  # column j as an m-bit integer
    table = np.zeros(1, dtype=np.int64)
    for j in range(p.n):
        table = _extend(table, int(cols[j]))
    return table


def _extend(table: np.ndarray, col: int) -> np.ndarray:
    # appending input bit j as the new least significant bit doubles the table
    out = np.empty(table.size * 2, dtype=np.int64)
    out[0::2] = table
    out[1::2] = table ^ col
    return out


def all_seed_tables(p: ExtractorParams) -> np.ndarray:
    """``(2**d, 2**n)`` array of packed outputs, row ``s`` for seed integer ``s``."""
    if 1 << (p.n + p.d) > ENUMERATION_CAP:
        raise EnumerationTooLarge(f"2**(n+d) = 2**{p.n + p.d} exceeds the enumeration cap")
    return np.stack([extract_all(p, ExtractorSeed.from_int(v, p.d)) for v in range(1 << p.d)])


# -- exact verification ----------------------------------------------------


def _seed_distance_exact(table: np.ndarray, weights: np.ndarray, denom: int, m: int) -> Fraction:
    counts = grouped_sums(table, weights, 1 << m)
    # distance = sum |c/denom - 2^-m| / 2 = sum |c * 2^m - denom| / (denom * 2^(m+1))
    num = sum(abs(int(c) * (1 << m) - denom) for c in counts)
    return Fraction(num, denom << (m + 1))


def _seed_distance_float(table: np.ndarray, probs: np.ndarray, m: int) -> float:
    counts = np.bincount(table, weights=probs, minlength=1 << m)
    return 0.5 * float(np.abs(counts - 2.0 ** -m).sum())


def seed_distances(p: ExtractorParams, src: Distribution, seeds: Optional[list] = None) -> list:
    """``Delta[Ext(src, s), U_m]`` for each seed (every seed when ``seeds`` is None)."""
    if src.support_size != 1 << p.n:
        raise DimensionError(f"source has {src.support_size} outcomes, expected 2**{p.n}")
    if seeds is None:
        if 1 << (p.n + p.d) > ENUMERATION_CAP:
            raise EnumerationTooLarge(f"2**(n+d) = 2**{p.n + p.d} exceeds the enumeration cap")
        seeds = [ExtractorSeed.from_int(v, p.d) for v in range(1 << p.d)]
    if src.exact:
        weights, denom = integer_weights(src)
        return [_seed_distance_exact(extract_all(p, s), weights, denom, p.m) for s in seeds]
    probs = src.as_array()
    return [_seed_distance_float(extract_all(p, s), probs, p.m) for s in seeds]


def _check_source(p: ExtractorParams, src: Distribution):
    if min_entropy(src) < p.k - PARAM_TOL:
        raise PreconditionError(f"source min-entropy {min_entropy(src):.6f} below threshold k={p.k}")


def verify_strong_extractor(p: ExtractorParams, src: Distribution):
    """Exact ``Delta[U_d . Ext(src, U_d), U_{m+d}]`` by enumerating seeds and source."""
    _check_source(p, src)
    dists = seed_distances(p, src)
    return sum(dists) / len(dists)


@dataclass(frozen=True)
class SeedQuality:
    fraction: float
    threshold: float
    seeds_examined: int
    exhaustive: bool
    halfwidth: float  # 95% normal-approximation half-width; 0 when exhaustive


def seed_quality_histogram(
    p: ExtractorParams,
    src: Distribution,
    eps=None,
    max_seeds: int = 1 << 16,
    rng: Optional[np.random.Generator] = None,
) -> SeedQuality:
    """Fraction of seeds whose output is at least ``sqrt(eps)`` away from uniform.

    Seeds are enumerated when ``2**d <= max_seeds``; otherwise ``max_seeds``
    seeds are sampled and the result carries a confidence half-width.
    """
    _check_source(p, src)
    eps = p.eps if eps is None else eps
    exhaustive = (1 << p.d) <= max_seeds
    if exhaustive:
        dists = seed_distances(p, src)
    else:
        rng = rng if rng is not None else np.random.default_rng()
        seeds = [ExtractorSeed.random(p.d, rng) for _ in range(max_seeds)]
        dists = seed_distances(p, src, seeds)
    bad = sum(1 for x in dists if exceeds_sqrt(x, eps))
    frac = bad / len(dists)
    hw = 0.0 if exhaustive else 1.96 * math.sqrt(frac * (1 - frac) / len(dists))
    return SeedQuality(frac, math.sqrt(float(eps)), len(dists), exhaustive, hw)


def exceeds_sqrt(x, eps) -> bool:
    """``x >= sqrt(eps)`` decided in exact arithmetic for rational inputs."""
    if isinstance(x, Fraction) or isinstance(eps, Fraction):
        x, eps = Fraction(x), Fraction(eps)
        return x >= 0 and x * x >= eps
    return x >= math.sqrt(eps)


# -- flat sources for exhaustive checks --------------------------------------


def gaussian_binomial(n: int, k: int, q: int = 2) -> int:
    """Number of ``k``-dimensional subspaces of ``GF(q)**n``."""
    if k < 0 or k > n:
        return 0
    num = den = 1
    for i in range(k):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def rref_bases(n: int, k: int) -> Iterator[np.ndarray]:
    """Every ``k x n`` reduced row-echelon basis over GF(2), one per subspace."""
    for pivots in itertools.combinations(range(n), k):
        free = [(r, c) for r in range(k) for c in range(pivots[r] + 1, n) if c not in pivots]
        for fill in itertools.product((0, 1), repeat=len(free)):
            B = np.zeros((k, n), dtype=np.uint8)
            for r, c in enumerate(pivots):
                B[r, c] = 1
            for (r, c), v in zip(free, fill):
                B[r, c] = v
            yield B


def affine_subspace_sources(n: int, k: int) -> Iterator[np.ndarray]:
    """Supports (as sorted input indices) of every ``k``-dim affine subspace of ``GF(2)**n``."""
    for B in rref_bases(n, k):
        coeffs = index_bits(np.arange(1 << k), k).astype(np.int64)
        span = pack_rows(coeffs @ B.astype(np.int64) % 2)
        seen = set()
        for shift in range(1 << n):
            if shift in seen:
                continue
            coset = np.sort(span ^ shift)
            seen.update(coset.tolist())
            yield coset


def flat_source_seed_distances(tables: np.ndarray, support: np.ndarray, m: int) -> np.ndarray:
    """Per-seed distance numerators for a flat source, over the common denominator ``2**(k+m+1)``.

    ``tables`` comes from :func:`all_seed_tables`; ``support`` has ``2**k`` entries.
    """
    sub = tables[:, support]
    num_seeds, size = sub.shape
    keys = sub + (np.arange(num_seeds, dtype=np.int64)[:, None] << m)
    counts = np.bincount(keys.ravel(), minlength=num_seeds << m).reshape(num_seeds, 1 << m)
    return np.abs(counts * (1 << m) - size).sum(axis=1)
