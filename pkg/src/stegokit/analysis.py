"""Exact and Monte Carlo checks of the stegosystem's security and soundness.

The exact distance between stegotext and covertext is computed by dynamic
programming over block boundaries. Conditioned on the extractor seed, the
embedder's output law is the channel law reweighted block by block by the
rejection-sampling likelihood ratio ``g_i(ctx, f(block))``; the pad makes
each block's target uniform over its real bits (padding bits are zero). So
the state after ``i`` blocks only needs the channel context and the running
product of ratios, and the distance is ``0.5 * E_channel |ratio - 1|``.

The warden's view includes the extractor seed: the seed is public in the
extractor sense, and handing it to the adversary only makes the game
harder to win for the embedder.
"""
from __future__ import annotations

import json
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .bits import as_bits, random_bits
from .channel import (
    DEFAULT_ENUMERATION_CAP,
    ChannelModel,
    all_blocks,
    block_index,
    check_history,
    marginal_block,
    sample,
    sample_sequence,
)
from .errors import EnumerationTooLarge, ParameterError
from .extractor import ENUMERATION_CAP, ExtractorSeed, extract_all
from .otstego import DEFAULT_C, ParamSet, StegoKey, derive_params, keygen, sd_decode, se_encode
from .probability import integer_weights
from .sampling import output_ratios

Z95 = 1.96


# -- result types --------------------------------------------------------------


@dataclass(frozen=True)
class GameResult:
    trials: int
    successes: int
    advantage_estimate: float
    confidence_halfwidth: float  # 95% normal approximation

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")

    @classmethod
    def from_counts(cls, trials: int, successes: int) -> "GameResult":
        p = successes / trials
        return cls(trials, successes, abs(p - 0.5), Z95 * math.sqrt(p * (1 - p) / trials))

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    @property
    def sigma(self) -> float:
        """Standard error of the success rate (and so of the advantage)."""
        p = self.success_rate
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def contains_zero(self) -> bool:
        return self.advantage_estimate <= self.confidence_halfwidth


@dataclass(frozen=True)
class BoundReport:
    measured: float
    bound: float
    passed: bool
    tolerance: float = 0.0
    trials: Optional[int] = None
    vacuous: bool = False
    exact: bool = False
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.passed != (self.measured <= self.bound + self.tolerance):
            raise ValueError("pass flag disagrees with measured <= bound + tolerance")

    @classmethod
    def check(cls, measured, bound, tolerance=0.0, **kw) -> "BoundReport":
        return cls(measured, bound, bool(measured <= bound + tolerance), tolerance, **kw)


@dataclass(frozen=True)
class SeedAverage:
    value: float  # a Fraction when every seed was enumerated on an exact channel
    exhaustive: bool
    seeds_examined: int
    halfwidth: float  # 95% half-width when seeds were sampled, else 0


# -- closed-form bounds --------------------------------------------------------


def security_bound(params: ParamSet) -> float:
    """``ell * (sqrt(eps) + 2 * eps**0.25)``; values above 1 are vacuous."""
    e = params.eps_sec
    return params.ell * (math.sqrt(e) + 2 * e ** 0.25)


def security_bound_floor(params: ParamSet) -> Fraction:
    """A rational lower bound on :func:`security_bound`, for exact comparisons."""
    scale = 64
    e = Fraction(params.eps_sec)
    n = (e.numerator << (4 * scale)) // e.denominator
    x = Fraction(math.isqrt(math.isqrt(n)), 1 << scale)  # x <= eps**0.25
    return params.ell * (x * x + 2 * x)


def _soundness_terms(eps: float, rho: int, eta: int, ell: int) -> float:
    r = eps ** 0.25
    miss = max(0.0, 1 - (2.0 ** -eta - math.sqrt(eps)))
    return ell * ((1 - r) * miss ** rho + r + ell * r)


def soundness_bound_for(params: ParamSet) -> float:
    return _soundness_terms(params.eps_sec, params.rho, params.block_bits, params.ell)


def soundness_bound(nu: int, c: int = DEFAULT_C, eps_sec: Optional[float] = None, rho: Optional[int] = None) -> float:
    """Decoding-failure bound evaluated at the derived parameters for ``(nu, c)``.

    The bound does not depend on the channel beyond the parameters, so
    ``delta = 1`` is used for the derivation.
    """
    return soundness_bound_for(derive_params(nu, c, 1.0, 1, eps_sec, rho))


def soundness_bound_closed_form(nu: int) -> float:
    """The simplified failure bound for ``c = 4``."""
    if nu < 2:
        raise ParameterError("message length must be at least 2 bits")
    lg = math.log2(nu)
    return 1 / (4 * nu ** 3 * lg) + 1 / (4 * math.sqrt(2) * nu * lg) + 1 / (16 * math.sqrt(2) * lg ** 2)


# -- exact enumeration ---------------------------------------------------------


def target_laws(params: ParamSet, exact: bool = True) -> list[list]:
    """Per-block law of the masked target: uniform over real bits, padding zero."""
    eta = params.block_bits
    laws = []
    for length in params.block_lengths():
        w = Fraction(1, 1 << length) if exact else 2.0 ** -length
        law = [0 * w] * (1 << eta)
        for v in range(1 << length):
            law[v << (eta - length)] = w
        laws.append(law)
    return laws


@dataclass
class _ContextLaw:
    weights: np.ndarray  # integer numerators (exact) or float probabilities
    denom: Optional[int]
    end_ids: np.ndarray
    end_ctxs: list


class BlockEnumerator:
    """Per-context block laws and per-seed hit statistics for one parameter set."""

    def __init__(self, params: ParamSet, c: ChannelModel, cap: int = DEFAULT_ENUMERATION_CAP):
        if c.size ** params.t > cap:
            raise EnumerationTooLarge(f"|alphabet|^t = {c.size}^{params.t} exceeds the cap of {cap}")
        if 1 << params.extractor.n > ENUMERATION_CAP:
            raise EnumerationTooLarge(f"extractor input of {params.extractor.n} bits is too long to tabulate")
        self.params = params
        self.channel = c
        self.exact = c.exact
        self.targets = target_laws(params, self.exact)
        self._blocks = all_blocks(c.size, params.t)
        self._laws: dict = {}

    def law(self, ctx: tuple) -> _ContextLaw:
        hit = self._laws.get(ctx)
        if hit is not None:
            return hit
        c, t = self.channel, self.params.t
        dist = marginal_block(c, ctx, t, cap=c.size ** t).dist
        if self.exact:
            weights, denom = integer_weights(dist)
        else:
            weights, denom = dist.as_array(), None
        r = c.order
        if r == 0:
            end_ids, end_ctxs = np.zeros(len(dist), dtype=np.int64), [()]
        else:
            ends = [c.context(ctx + tuple(row)) for row in self._blocks.tolist()]
            end_ctxs = sorted(set(ends))
            pos = {e: i for i, e in enumerate(end_ctxs)}
            end_ids = np.array([pos[e] for e in ends], dtype=np.int64)
        hit = _ContextLaw(weights, denom, end_ids, end_ctxs)
        self._laws[ctx] = hit
        return hit

    def seed_view(self, seed: ExtractorSeed) -> "SeedView":
        return SeedView(self, extract_all(self.params.extractor, seed))


class SeedView:
    """Hit probabilities and likelihood ratios for one fixed extractor seed."""

    def __init__(self, enum: BlockEnumerator, outputs: np.ndarray):
        self.enum = enum
        self.outputs = outputs
        self._joint: dict = {}
        self._ratios: dict = {}

    def joint(self, ctx: tuple):
        """``(q, joint)``: ``q[y] = Pr[f(C)=y]`` and ``joint[(y, end)]`` the mass per end context."""
        hit = self._joint.get(ctx)
        if hit is not None:
            return hit
        law = self.enum.law(ctx)
        size = 1 << self.enum.params.block_bits
        ends = len(law.end_ctxs)
        keys = self.outputs * ends + law.end_ids
        if law.denom is None:
            sums = np.bincount(keys, weights=law.weights, minlength=size * ends)
            conv = float
        elif law.denom < 1 << 53:
            # float sums of integers below 2**53 are exact
            sums = np.bincount(keys, weights=law.weights.astype(np.float64), minlength=size * ends)
            conv = lambda v: Fraction(int(v), law.denom)  # noqa: E731
        else:
            sums = np.zeros(size * ends, dtype=object)
            np.add.at(sums, keys, law.weights.astype(object))
            conv = lambda v: Fraction(int(v), law.denom)  # noqa: E731
        sums = sums.reshape(size, ends)
        q = [conv(v) for v in sums.sum(axis=1)]
        joint = {(y, law.end_ctxs[e]): conv(sums[y, e]) for y, e in zip(*np.nonzero(sums))}
        hit = (q, joint)
        self._joint[ctx] = hit
        return hit

    def ratios(self, ctx: tuple, i: int) -> list:
        key = (ctx, i)
        hit = self._ratios.get(key)
        if hit is None:
            q, _ = self.joint(ctx)
            hit = output_ratios(q, self.enum.targets[i], self.enum.params.rho)
            self._ratios[key] = hit
        return hit

    def distance(self, h: Sequence[int]) -> float:
        """Total-variation distance between stegotext and covertext after ``h``."""
        one = Fraction(1) if self.enum.exact else 1.0
        states = {(self.enum.channel.context(h), one): one}
        for i in range(self.enum.params.ell):
            nxt = defaultdict(lambda: 0 * one)
            for (ctx, r), w in states.items():
                _, joint = self.joint(ctx)
                g = self.ratios(ctx, i)
                for (y, end), mass in joint.items():
                    nxt[(end, r * g[y])] += w * mass
            states = nxt
        return sum(w * abs(r - 1) for (_, r), w in states.items()) / 2

    def likelihood_ratio(self, h: Sequence[int], symbols: Sequence[int]):
        """``Pr[stegotext = symbols] / Pr[covertext = symbols]`` after history ``h``."""
        p, c = self.enum.params, self.enum.channel
        ctx = c.context(h)
        r = Fraction(1) if self.enum.exact else 1.0
        for i in range(p.ell):
            blk = tuple(symbols[i * p.t:(i + 1) * p.t])
            idx = block_index(blk, c.size)
            r *= self.ratios(ctx, i)[int(self.outputs[idx])]
            ctx = c.context(ctx + blk)
        return r


def exact_stego_distance(
    params: ParamSet,
    key_seed: ExtractorSeed,
    c: ChannelModel,
    h: Sequence[int] = (),
    cap: int = DEFAULT_ENUMERATION_CAP,
):
    """Exact distance between the embedder's output (uniform pad) and ``C_h^lambda``."""
    h = check_history(c, h)
    return BlockEnumerator(params, c, cap).seed_view(key_seed).distance(h)


def seed_averaged_stego_distance(
    params: ParamSet,
    c: ChannelModel,
    h: Sequence[int] = (),
    max_seeds: int = 1 << 16,
    rng: Optional[np.random.Generator] = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> SeedAverage:
    """Mean of :func:`exact_stego_distance` over the extractor seed.

    All ``2**d`` seeds are enumerated when that is at most ``max_seeds``;
    otherwise ``max_seeds`` seeds are sampled and a 95% half-width reported.
    """
    h = check_history(c, h)
    enum = BlockEnumerator(params, c, cap)
    d = params.extractor.d
    if 1 << d <= max_seeds:
        seeds = (ExtractorSeed.from_int(v, d) for v in range(1 << d))
        values = [enum.seed_view(s).distance(h) for s in seeds]
        return SeedAverage(sum(values) / len(values), True, len(values), 0.0)
    rng = rng if rng is not None else np.random.default_rng()
    values = [float(enum.seed_view(ExtractorSeed.random(d, rng)).distance(h)) for _ in range(max_seeds)]
    arr = np.array(values)
    hw = Z95 * float(arr.std(ddof=1)) / math.sqrt(arr.size) if arr.size > 1 else math.inf
    return SeedAverage(float(arr.mean()), False, arr.size, hw)


def check_security(params: ParamSet, c: ChannelModel, h: Sequence[int] = (), **kw) -> BoundReport:
    """Seed-averaged exact distance against the security bound.

    With exhaustive seeds on an exact channel the comparison is against a
    rational lower bound of the (irrational) bound, so a pass is exact.
    """
    avg = seed_averaged_stego_distance(params, c, h, **kw)
    bound = security_bound(params)
    extras = {"seeds": avg.seeds_examined, "exhaustive": avg.exhaustive, "halfwidth": avg.halfwidth}
    if avg.exhaustive and isinstance(avg.value, Fraction):
        ok = avg.value <= security_bound_floor(params)
        extras["distance_exact"] = str(avg.value)
        return BoundReport(float(avg.value), bound, ok and float(avg.value) <= bound, 0.0,
                           vacuous=bound >= 1, exact=True, extras=extras)
    return BoundReport.check(float(avg.value), bound, avg.halfwidth, vacuous=bound >= 1, extras=extras)


# -- soundness -----------------------------------------------------------------


def measure_soundness(
    params: ParamSet,
    c: ChannelModel,
    trials: int,
    rng: np.random.Generator,
    h: Sequence[int] = (),
) -> BoundReport:
    """Round-trip random messages with fresh keys; pass allows three binomial standard errors."""
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    h = check_history(c, h)
    failures = 0
    draws = 0
    for _ in range(trials):
        key = keygen(params, rng)
        msg = random_bits(params.nu, rng)
        st = se_encode(key, msg, c, h, rng)
        draws += sum(st.draws)
        if not np.array_equal(sd_decode(key, st), msg):
            failures += 1
    rate = failures / trials
    sigma = math.sqrt(rate * (1 - rate) / trials)
    bound = soundness_bound_for(params)
    return BoundReport.check(
        rate, bound, 3 * sigma, trials=trials, vacuous=bound >= 1,
        extras={"failures": failures, "sigma": sigma, "mean_draws_per_block": draws / (trials * params.ell)},
    )


# -- warden game ---------------------------------------------------------------

Oracle = Callable[[Sequence[int]], int]


@dataclass(frozen=True)
class WardenView:
    symbols: tuple
    history: tuple
    message: np.ndarray
    theta: object
    seed: ExtractorSeed
    key: Optional[StegoKey] = None  # only for adversaries that ask for it


class Adversary(Protocol):
    wants_key: bool

    def choose(self, nu: int, oracle: Oracle) -> tuple: ...  # (message, theta, history)

    def distinguish(self, view: WardenView) -> int: ...  # 0 guesses stegotext, 1 covertext


class RandomAdversary:
    wants_key = False

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def choose(self, nu, oracle):
        return np.zeros(nu, dtype=np.uint8), None, ()

    def distinguish(self, view):
        return int(self.rng.integers(2))


class LikelihoodRatioAdversary:
    """Optimal warden for enumerable instances: compares the exact stego/cover likelihood ratio to 1."""

    wants_key = False

    def __init__(self, params: ParamSet, c: ChannelModel, rng: np.random.Generator, history: Sequence[int] = ()):
        self.enum = BlockEnumerator(params, c)
        self.history = check_history(c, history)
        self.rng = rng
        self._views: dict = {}

    def choose(self, nu, oracle):
        return np.zeros(nu, dtype=np.uint8), None, self.history

    def view_for(self, seed: ExtractorSeed) -> SeedView:
        v = self._views.get(seed)
        if v is None:
            v = self._views[seed] = self.enum.seed_view(seed)
        return v

    def distinguish(self, view):
        r = self.view_for(view.seed).likelihood_ratio(view.history, view.symbols)
        if r > 1:
            return 0
        if r < 1:
            return 1
        return int(self.rng.integers(2))


class KeyedAdversary:
    """Out-of-model reference: decodes with the real key and checks for the chosen message."""

    wants_key = True

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def choose(self, nu, oracle):
        return random_bits(nu, self.rng), None, ()

    def distinguish(self, view):
        from .otstego import Stegotext

        p = view.key.params
        got = sd_decode(view.key, Stegotext(view.symbols, p.ell, p.t))
        return 0 if np.array_equal(got, view.message) else 1


def run_warden_game(
    params: ParamSet,
    c: ChannelModel,
    adversary: Adversary,
    trials: int,
    rng: np.random.Generator,
) -> GameResult:
    """Play the stego-vs-cover game ``trials`` times with fresh keys."""
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    oracle = lambda hist: sample(c, hist, rng)  # noqa: E731
    successes = 0
    for _ in range(trials):
        key = keygen(params, rng)
        message, theta, h = adversary.choose(params.nu, oracle)
        message = as_bits(message)
        h = check_history(c, h)
        b = int(rng.integers(2))
        if b == 0:
            symbols = se_encode(key, message, c, h, rng).symbols
        else:
            symbols = sample_sequence(c, h, params.lam, rng)
        view = WardenView(tuple(symbols), h, message, theta, key.seed, key if adversary.wants_key else None)
        if adversary.distinguish(view) == b:
            successes += 1
    return GameResult.from_counts(trials, successes)


def game_report(result: GameResult, reference_distance: Optional[float] = None) -> BoundReport:
    """Advantage against ``0.5 * distance`` (within three standard errors), or against 0 (within the CI)."""
    if reference_distance is None:
        return BoundReport.check(result.advantage_estimate, 0.0, result.confidence_halfwidth,
                                 trials=result.trials, extras={"successes": result.successes})
    ref = 0.5 * float(reference_distance)
    gap = abs(result.advantage_estimate - ref)
    return BoundReport.check(gap, 0.0, 3 * result.sigma, trials=result.trials,
                             extras={"successes": result.successes, "advantage": result.advantage_estimate,
                                     "half_distance": ref})


# -- reports -------------------------------------------------------------------


def _plain(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (np.integer, np.floating)):
        return v.item()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def report_to_text(report: BoundReport, instance: str, runtime: float) -> str:
    """JSON report with stable field names: instance, measured, bound, pass, trials, runtime."""
    doc = {
        "instance": instance,
        "measured": _plain(report.measured),
        "bound": _plain(report.bound),
        "pass": report.passed,
        "trials": report.trials,
        "runtime": round(runtime, 6),
        "tolerance": _plain(report.tolerance),
        "vacuous": report.vacuous,
        "exact": report.exact,
        "extras": _plain(report.extras),
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
