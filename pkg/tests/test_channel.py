import json
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import stats

from stegokit.channel import (
    all_blocks,
    block_index,
    block_indices,
    block_symbols,
    channel_to_dict,
    check_history,
    load_channel,
    load_channel_file,
    marginal_block,
    markov,
    memoryless,
    sample,
    sample_blocks,
    sample_sequence,
    symbols_to_bits,
)
from stegokit.errors import ChannelError, EnumerationTooLarge, PreconditionError
from stegokit.probability import min_entropy

AB_ROWS = {(): ("1/2", "1/2"), (0,): ("3/5", "2/5"), (1,): ("1/2", "1/2")}


def ab_markov():
    rows = {k: tuple(F(x) for x in v) for k, v in AB_ROWS.items()}
    return markov(rows, order=1, alphabet="ab")


class TestValidation:
    def test_uniform_four_symbols(self):
        c = memoryless([F(1, 4)] * 4, "abcd", min_entropy_bits=2)
        assert c.bits_per_symbol == 2
        assert all(min_entropy(r) == 2.0 for r in c.rows.values())

    def test_biased_row_below_declared_entropy(self):
        with pytest.raises(ChannelError, match="min-entropy"):
            memoryless([F(7, 10), F(3, 10)], "ab", min_entropy_bits=1)

    def test_markov_rows_above_half_bit(self):
        row = (F(3, 5), F(2, 5))
        c = markov({(): row, (0,): row, (1,): row}, order=1, alphabet="ab", min_entropy_bits=0.5)
        assert c.kind == "markov" and c.min_entropy == 0.5

    def test_alphabet_must_be_power_of_two(self):
        with pytest.raises(ChannelError, match="power of two"):
            memoryless([F(1, 3)] * 3)

    def test_missing_context_row(self):
        with pytest.raises(ChannelError, match="missing row"):
            markov({(): (F(1, 2), F(1, 2)), (0,): (F(1, 2), F(1, 2))}, order=1)

    def test_declared_entropy_above_symbol_width(self):
        with pytest.raises(ChannelError):
            memoryless([F(1, 2)] * 2, min_entropy_bits=1.5)

    def test_history_symbols_checked(self):
        with pytest.raises(PreconditionError):
            check_history(ab_markov(), (0, 2))


class TestJson:
    DOC = {
        "alphabet": ["a", "b"],
        "kind": "markov",
        "order": 1,
        "min_entropy": 0.7,
        "rows": {"": [0.5, 0.5], "a": [0.6, 0.4], "b": ["1/2", "1/2"]},
    }

    def test_decimal_floats_parse_exactly(self):
        c = load_channel(json.dumps(self.DOC))
        assert c.rows[(0,)].mass == (F(3, 5), F(2, 5))
        assert c.exact

    def test_round_trip(self, tmp_path):
        c = load_channel(self.DOC)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(channel_to_dict(c)))
        again = load_channel_file(path)
        assert again.rows == c.rows and again.order == 1 and again.alphabet == c.alphabet

    def test_multichar_symbols_use_spaces(self):
        doc = {"alphabet": ["lo", "hi"], "kind": "markov", "order": 2, "min_entropy": 1,
               "rows": {k: [0.5, 0.5] for k in ["", "lo", "hi", "lo lo", "lo hi", "hi lo", "hi hi"]}}
        c = load_channel(doc)
        assert (1, 0) in c.rows and c.format_context((1, 0)) == "hi lo"

    @pytest.mark.parametrize(
        "patch",
        [
            {"kind": "hidden"},
            {"rows": {"": [0.5, 0.5], "a": [0.6, 0.4]}},
            {"rows": {"": [0.5, 0.5], "a": [0.6, 0.5], "b": [0.5, 0.5]}},
            {"rows": {"": [0.5, 0.5], "a": [0.6, 0.4], "z": [0.5, 0.5]}},
            {"rows": {"": [0.5, 0.5], "a": ["x", 0.4], "b": [0.5, 0.5]}},
            {"order": 0},
        ],
    )
    def test_malformed(self, patch):
        with pytest.raises(ChannelError):
            load_channel({**self.DOC, **patch})

    def test_not_json(self):
        with pytest.raises(ChannelError):
            load_channel("{nope")


class TestSampling:
    def test_biased_frequency(self):
        c = memoryless([F(7, 10), F(3, 10)])
        rng = np.random.default_rng(1)
        draws = sample_blocks(c, (), 1, 100_000, rng)[:, 0]
        assert abs(np.mean(draws == 0) - 0.7) < 0.01

    def test_uniform_chi_square(self):
        c = memoryless([F(1, 4)] * 4)
        rng = np.random.default_rng(2)
        counts = np.bincount(sample_blocks(c, (), 1, 100_000, rng)[:, 0], minlength=4)
        assert stats.chisquare(counts).pvalue > 0.001

    def test_row_selected_by_last_symbol(self):
        c = ab_markov()
        rng = np.random.default_rng(3)
        draws = [sample(c, (1, 1, 0), rng) for _ in range(20_000)]
        assert abs(np.mean(np.array(draws) == 0) - 0.6) < 0.015

    def test_single_draw_matches_batch_law(self):
        c = memoryless([F(7, 10), F(3, 10)])
        rng = np.random.default_rng(4)
        draws = [sample(c, (), rng) for _ in range(20_000)]
        assert abs(np.mean(np.array(draws) == 0) - 0.7) < 0.015

    @pytest.mark.parametrize("h", [(), (0,), (1, 1)])
    def test_markov_blocks_follow_chain_rule(self, h):
        c = ab_markov()
        rng = np.random.default_rng(5)
        blocks = sample_blocks(c, h, 3, 100_000, rng)
        emp = np.bincount(block_indices(blocks, 2), minlength=8) / 100_000
        exact = marginal_block(c, h, 3).dist.as_array()
        assert np.abs(emp - exact).max() < 0.01

    def test_order_two_blocks_with_short_history(self):
        rows = {(): (F(1, 2), F(1, 2))}
        for ctx, p in [((0,), F(1, 4)), ((1,), F(3, 4)), ((0, 0), F(1, 5)), ((0, 1), F(2, 5)),
                       ((1, 0), F(3, 5)), ((1, 1), F(4, 5))]:
            rows[ctx] = (p, 1 - p)
        c = markov(rows, order=2)
        rng = np.random.default_rng(6)
        for h in [(), (1,), (0, 1, 1)]:
            blocks = sample_blocks(c, h, 3, 100_000, rng)
            emp = np.bincount(block_indices(blocks, 2), minlength=8) / 100_000
            assert np.abs(emp - marginal_block(c, h, 3).dist.as_array()).max() < 0.01

    def test_sequence_length(self):
        c = ab_markov()
        out = sample_sequence(c, (0,), 17, np.random.default_rng(0))
        assert len(out) == 17 and set(out) <= {0, 1}


class TestMarginalBlock:
    def test_memoryless_pair(self):
        c = memoryless([F(7, 10), F(3, 10)])
        assert marginal_block(c, (), 2).dist.mass == (F(49, 100), F(21, 100), F(21, 100), F(9, 100))

    def test_single_symbol_is_the_row(self):
        c = ab_markov()
        assert marginal_block(c, (1, 0), 1).dist == c.rows[(0,)]

    def test_markov_chain_rule_after_a(self):
        c = ab_markov()
        # oracle by hand: P(aa)=.6*.6, P(ab)=.6*.4, P(ba)=.4*.5, P(bb)=.4*.5
        assert marginal_block(c, (1, 0), 2).dist.mass == (F(36, 100), F(24, 100), F(20, 100), F(20, 100))

    def test_cap(self):
        with pytest.raises(EnumerationTooLarge):
            marginal_block(memoryless([F(1, 2)] * 2), (), 21)

    def test_float_channel(self):
        c = memoryless([0.7, 0.3])
        d = marginal_block(c, (), 3).dist
        assert not d.exact and abs(d[0] - 0.343) < 1e-12


class TestBlockIndexing:
    def test_first_symbol_most_significant(self):
        assert block_index((1, 0, 2), 4) == 18
        assert block_symbols(18, 3, 4) == (1, 0, 2)

    def test_vector_forms_agree(self):
        blocks = all_blocks(4, 3)
        assert block_indices(blocks, 4).tolist() == list(range(64))
        assert [block_index(b, 4) for b in blocks.tolist()] == list(range(64))

    def test_symbol_bits_match_index_bits(self):
        blocks = all_blocks(4, 3)
        bits = symbols_to_bits(blocks, 2)
        packed = bits @ (1 << np.arange(5, -1, -1))
        assert packed.tolist() == list(range(64))

    def test_index_overflow(self):
        with pytest.raises(EnumerationTooLarge):
            block_indices(np.zeros((1, 64), dtype=np.int64), 2)
