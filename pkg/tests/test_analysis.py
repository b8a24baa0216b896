import itertools
import json
import math
from fractions import Fraction as F

import numpy as np
import pytest

from stegokit.analysis import (
    BlockEnumerator,
    BoundReport,
    GameResult,
    KeyedAdversary,
    LikelihoodRatioAdversary,
    RandomAdversary,
    check_security,
    exact_stego_distance,
    game_report,
    measure_soundness,
    report_to_text,
    run_warden_game,
    security_bound,
    security_bound_floor,
    seed_averaged_stego_distance,
    soundness_bound,
    soundness_bound_closed_form,
    soundness_bound_for,
    target_laws,
)
from stegokit.channel import marginal_block, markov, memoryless
from stegokit.errors import EnumerationTooLarge, ParameterError
from stegokit.extractor import ExtractorSeed
from stegokit.otstego import StegoKey, block_map, derive_params, keygen, masked_targets
from stegokit.probability import Distribution, statistical_distance
from stegokit.sampling import rejsam_exact_distribution

UNIFORM2 = memoryless([F(1, 2)] * 2)
C73 = memoryless([F(7, 10), F(3, 10)])
MK = markov({(): (F(1, 2), F(1, 2)), (0,): (F(3, 5), F(2, 5)), (1,): (F(9, 20), F(11, 20))}, order=1)


def tiny(c=C73, rho=8, eps=0.3):
    return derive_params(2, 1, c.min_entropy, 1, eps_sec=eps, rho=rho)


def brute_force_distance(p, seed, c, h):
    """Average the chained exact rejsam laws over every pad, then compare with C_h^lambda."""
    total = [F(0)] * (c.size ** p.lam)
    f = None
    for pad in itertools.product((0, 1), repeat=p.nu):
        key = StegoKey(np.array(pad, dtype=np.uint8), seed, p)
        f = block_map(key)
        targets = masked_targets(key, np.zeros(p.nu, dtype=np.uint8))

        def walk(i, hist, prob, idx):
            if i == p.ell:
                total[idx] += prob / 2 ** p.nu
                return
            law = rejsam_exact_distribution(p.rejsam_config, targets[i], c, hist, f).dist
            for j, m in enumerate(law.mass):
                if m:
                    blk = tuple((j // c.size ** (p.t - 1 - q)) % c.size for q in range(p.t))
                    walk(i + 1, hist + blk, prob * m, idx * c.size ** p.t + j)

        walk(0, tuple(h), F(1), 0)
    return statistical_distance(Distribution(tuple(total)), marginal_block(c, h, p.lam).dist)


class TestBounds:
    def test_security_bound_four_blocks(self):
        p = derive_params(16, c=1, eps_sec=2.0 ** -16)
        assert p.ell == 4
        assert security_bound(p) == pytest.approx(4 * (2 ** -8 + 2 * 2 ** -4)) == pytest.approx(0.515625)

    def test_security_floor_is_below_and_tight(self):
        for eps in (0.3, 2.0 ** -4, 2.0 ** -16, 1e-9):
            p = derive_params(4, c=1, eps_sec=eps)
            lo = security_bound_floor(p)
            assert isinstance(lo, F) and abs(float(lo) - security_bound(p)) < 1e-12
            # lo = ell * (x**2 + 2x) with x the largest multiple of 2**-64 whose fourth power is <= eps
            e = F(eps)
            x = F(round(float(e) ** 0.25 * 2**64), 2**64)
            while x**4 > e:
                x -= F(1, 2**64)
            while (x + F(1, 2**64)) ** 4 <= e:
                x += F(1, 2**64)
            assert lo == p.ell * (x * x + 2 * x)

    def test_security_bound_vanishes_with_eps(self):
        assert security_bound(derive_params(4, c=1, eps_sec=1e-300)) < 1e-70

    def test_closed_form_at_sixteen(self):
        expect = 1 / (4 * 16 ** 3 * 4) + 1 / (4 * math.sqrt(2) * 16 * 4) + 1 / (16 * math.sqrt(2) * 16)
        assert soundness_bound_closed_form(16) == pytest.approx(expect, rel=1e-15)
        with pytest.raises(ParameterError):
            soundness_bound_closed_form(1)

    def test_general_form_by_hand(self):
        p = derive_params(8, c=1, rho=48)
        e = p.eps_sec
        r = e ** 0.25
        hand = 3 * ((1 - r) * (1 - (1 / 8 - math.sqrt(e))) ** 48 + r + 3 * r)
        assert soundness_bound(8, 1, rho=48) == pytest.approx(hand, rel=1e-12)
        assert soundness_bound_for(p) == pytest.approx(hand, rel=1e-12)

    def test_general_form_limits(self):
        assert soundness_bound(4, 1, eps_sec=1e-300, rho=10**6) < 1e-70
        for nu, c in itertools.product((2, 5, 16, 64), (1, 2, 4)):
            assert soundness_bound(nu, c) >= 0


class TestExactDistance:
    def test_rho_zero_is_exactly_zero(self):
        p = tiny(rho=0)
        key = keygen(p, np.random.default_rng(0))
        assert exact_stego_distance(p, key.seed, C73) == 0

    def test_unbiased_map_is_exactly_zero(self):
        p = derive_params(2, 2, 1.0, 1, eps_sec=0.25, rho=5)  # one 2-bit block, t = 6
        rng = np.random.default_rng(1)
        for _ in range(5):
            seed = ExtractorSeed.random(p.extractor.d, rng)
            # a full-rank Toeplitz map of a uniform channel is exactly unbiased
            assert exact_stego_distance(p, seed, UNIFORM2) == 0

    def test_matches_brute_force_on_two_markov_blocks(self):
        p = derive_params(3, 1, MK.min_entropy, 1, eps_sec=0.45, rho=3)
        assert p.ell == 2 and p.block_lengths() == [2, 1]
        rng = np.random.default_rng(2)
        for h in [(), (1,), (0, 0)]:
            seed = ExtractorSeed.random(p.extractor.d, rng)
            assert exact_stego_distance(p, seed, MK, h) == brute_force_distance(p, seed, MK, h)

    def test_float_channel_agrees(self):
        p = tiny()
        seed = ExtractorSeed.random(p.extractor.d, np.random.default_rng(3))
        exact = exact_stego_distance(p, seed, C73)
        approx = exact_stego_distance(p, seed, memoryless([0.7, 0.3]))
        assert isinstance(approx, float) and approx == pytest.approx(float(exact), abs=1e-12)

    def test_fixed_seed_below_security_bound(self):
        p = tiny()
        seed = ExtractorSeed.random(p.extractor.d, np.random.default_rng(4))
        assert exact_stego_distance(p, seed, C73) <= security_bound_floor(p)

    def test_nonincreasing_in_rho_for_unbiased_maps(self):
        c = memoryless([F(1, 4)] * 4)
        prev = None
        for rho in (0, 1, 2, 4, 8):
            p = derive_params(2, 2, 2.0, 2, eps_sec=0.3, rho=rho)
            d = exact_stego_distance(p, ExtractorSeed.from_int(0b1011, p.extractor.d), c)
            assert prev is None or d <= prev
            prev = d

    def test_enumeration_cap(self):
        p = derive_params(2, 1, C73.min_entropy, 1, eps_sec=0.01)
        with pytest.raises(EnumerationTooLarge):
            exact_stego_distance(p, ExtractorSeed.from_int(0, p.extractor.d), C73)

    def test_target_laws_zero_padding(self):
        p = derive_params(5, c=1, eps_sec=0.25)
        laws = target_laws(p)
        assert laws[0] == [F(1, 8)] * 8
        assert laws[1] == [F(1, 4), 0, F(1, 4), 0, F(1, 4), 0, F(1, 4), 0]


class TestSeedAverage:
    def test_exhaustive_is_mean_of_seeds(self):
        p = derive_params(2, 1, C73.min_entropy, 1, eps_sec=0.45, rho=2)
        avg = seed_averaged_stego_distance(p, C73)
        assert avg.exhaustive and avg.seeds_examined == 2 ** p.extractor.d
        seeds = [ExtractorSeed.from_int(v, p.extractor.d) for v in range(2 ** p.extractor.d)]
        assert avg.value == sum(exact_stego_distance(p, s, C73) for s in seeds) / len(seeds)

    def test_sampled_seeds(self):
        p = tiny()
        full = seed_averaged_stego_distance(p, C73)
        est = seed_averaged_stego_distance(p, C73, max_seeds=256, rng=np.random.default_rng(5))
        assert not est.exhaustive and est.halfwidth > 0
        assert abs(est.value - float(full.value)) < 3 * est.halfwidth

    def test_check_security_is_exact(self):
        rep = check_security(tiny(), C73)
        assert rep.passed and rep.exact and rep.vacuous
        assert F(rep.extras["distance_exact"]) <= security_bound_floor(tiny())


class TestSoundness:
    def test_no_failures_with_large_rho_on_unbiased_instance(self):
        # one-bit blocks from 17 uniform bits: f is unbiased unless the key row is zero (2**-17)
        p = derive_params(2, 1, 1.0, 1, eps_sec=2.0 ** -8, rho=200)
        assert p.extractor.n == 17
        rep = measure_soundness(p, UNIFORM2, 10_000, np.random.default_rng(6))
        assert rep.extras["failures"] == 0 and rep.passed

    def test_rho_zero_is_a_coin_toss_per_bit(self):
        p = derive_params(4, 1, 1.0, 1, eps_sec=0.3, rho=0)  # blocks of 2 + 2 bits
        rep = measure_soundness(p, UNIFORM2, 4000, np.random.default_rng(7))
        expect = 1 - 2.0 ** -4
        assert abs(rep.measured - expect) <= 3 * math.sqrt(expect * (1 - expect) / 4000)

    def test_failure_rate_nonincreasing_in_rho(self):
        rates = []
        for rho in (0, 2, 8):
            p = derive_params(4, 1, C73.min_entropy, 1, eps_sec=0.3, rho=rho)
            rates.append(measure_soundness(p, C73, 1500, np.random.default_rng(8)).measured)
        assert rates[0] > rates[1] > rates[2]

    def test_zero_trials(self):
        with pytest.raises(ParameterError):
            measure_soundness(tiny(), C73, 0, np.random.default_rng(0))


class TestGame:
    def test_random_adversary(self):
        rng = np.random.default_rng(9)
        res = run_warden_game(tiny(), C73, RandomAdversary(rng), 3000, rng)
        assert res.trials == 3000 and abs(res.advantage_estimate) <= 4 * res.sigma

    def test_likelihood_ratio_adversary_matches_half_distance(self):
        p = tiny()
        ref = seed_averaged_stego_distance(p, C73).value
        rng = np.random.default_rng(10)
        res = run_warden_game(p, C73, LikelihoodRatioAdversary(p, C73, rng), 8000, rng)
        assert game_report(res, ref).passed

    def test_likelihood_ratio_is_exact_law_ratio(self):
        p = derive_params(2, 2, 1.0, 1, eps_sec=0.45, rho=2)
        c = memoryless([F(3, 5), F(2, 5)])
        p = derive_params(2, 2, c.min_entropy, 1, eps_sec=0.45, rho=2)
        seed = ExtractorSeed.from_int(0b1101, p.extractor.d)
        view = BlockEnumerator(p, c).seed_view(seed)
        cover = marginal_block(c, (), p.lam).dist
        key = StegoKey(np.zeros(2, dtype=np.uint8), seed, p)
        laws = []
        for pad in range(4):
            key = StegoKey(np.array([pad >> 1, pad & 1], dtype=np.uint8), seed, p)
            tgt = masked_targets(key, np.zeros(2, dtype=np.uint8))[0]
            laws.append(rejsam_exact_distribution(p.rejsam_config, tgt, c, (), block_map(key)).dist)
        stego = [sum(law.mass[i] for law in laws) / 4 for i in range(len(cover))]
        for i in range(len(cover)):
            blk = tuple((i >> (p.t - 1 - q)) & 1 for q in range(p.t))
            assert view.likelihood_ratio((), blk) == stego[i] / cover.mass[i]

    def test_keyed_adversary_near_reference(self):
        p = tiny(rho=64)
        rng = np.random.default_rng(11)
        res = run_warden_game(p, C73, KeyedAdversary(rng), 3000, rng)
        # decode(cover) equals m* with probability 2**-nu; decode(stego) fails rarely
        ref = 0.5 * (1 - 2.0 ** -p.nu)
        assert abs(res.advantage_estimate - ref) <= 4 * res.sigma + 0.01

    def test_result_invariants(self):
        r = GameResult.from_counts(100, 60)
        assert r.advantage_estimate == pytest.approx(0.1)
        assert r.confidence_halfwidth == pytest.approx(1.96 * math.sqrt(0.24 / 100))
        with pytest.raises(ValueError):
            GameResult(10, 11, 0.6, 0.1)


class TestReports:
    def test_pass_consistency(self):
        assert BoundReport.check(0.2, 0.1, 0.15).passed
        with pytest.raises(ValueError):
            BoundReport(0.2, 0.1, True)

    def test_text_fields(self):
        rep = BoundReport.check(F(1, 8), 0.5, trials=10, extras={"x": F(1, 2)})
        doc = json.loads(report_to_text(rep, "demo", 0.25))
        assert {"instance", "measured", "bound", "pass", "trials", "runtime"} <= set(doc)
        assert doc["measured"] == 0.125 and doc["pass"] is True and doc["extras"]["x"] == 0.5
