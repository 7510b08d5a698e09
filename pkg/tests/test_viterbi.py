import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convpuf.codec import CodeSpec, encode, lookup, random_info
from convpuf.viterbi import (
    Candidate,
    build_trellis,
    hard_decode,
    iter_candidates,
    list_decode,
    rank_by_likelihood,
    viterbi_decode,
)

from oracles import SMALL_CODES, Exhaustive

CODE_75 = CodeSpec(2, 2, (0o7, 0o5))


def _recompute(soft, code_bits, n):
    total = 0.0
    for r in range(len(code_bits) // n):
        seg = 0.0
        for j in range(n):
            v = soft[r * n + j]
            seg = seg - v if code_bits[r * n + j] else seg + v
        total = total + seg
    return total


class TestTrellis:
    def test_opening_and_funnel(self):
        tr = build_trellis(CODE_75, 4)
        assert [len(s) for s in tr.reachable] == [1, 2, 4, 4, 4, 2, 1]

    def test_edge_label(self):
        tr = build_trellis(CODE_75, 4)
        assert tr.output(0, 1) == (1, 1)
        assert tr.next_state(0, 1) == 0b10

    def test_full_segment_edges(self):
        for spec in (CODE_75, lookup(2, 6), lookup(3, 7)):
            tr = build_trellis(spec, 20)
            assert len(tr.edges(spec.mu + 2)) == 2 ** (spec.mu + 1)
            assert all(len(e) == 1 for e in [tr.inputs_allowed(tr.info_length + k) for k in range(spec.mu)])

    def test_labels_match_encoder(self):
        spec = lookup(2, 6)
        tr = build_trellis(spec, 10)
        rng = np.random.default_rng(0)
        info = random_info(rng, 10)
        code = encode(info, spec).reshape(-1, 2)
        state = 0
        for r, b in enumerate(np.concatenate([info, np.zeros(6, np.uint8)])):
            assert tr.output(state, int(b)) == tuple(code[r])
            state = tr.next_state(state, int(b))
        assert state == 0

    def test_incoming_degree(self):
        tr = build_trellis(CODE_75, 6)
        seg = 4
        incoming = {}
        for s, b, t, _ in tr.edges(seg):
            incoming[t] = incoming.get(t, 0) + 1
        assert set(incoming.values()) == {2}


class TestViterbi:
    def test_noiseless_any_magnitude(self, rng):
        spec = lookup(2, 7)
        tr = build_trellis(spec, 64)
        info = random_info(rng, 64)
        c = encode(info, spec)
        soft = (1 - 2.0 * c) * rng.uniform(0.01, 5, c.size)
        assert np.array_equal(viterbi_decode(soft, tr).info_estimate, info)

    def test_length_mismatch(self):
        tr = build_trellis(CODE_75, 8)
        with pytest.raises(ValueError):
            viterbi_decode(np.zeros(5), tr)
        with pytest.raises(ValueError):
            viterbi_decode(np.full(tr.codeword_length, np.nan), tr)

    @pytest.mark.parametrize("spec", SMALL_CODES, ids=lambda s: s.text)
    def test_brute_force_soft_and_hard(self, spec):
        L = 8
        ex = Exhaustive(spec, L)
        tr = build_trellis(spec, L)
        rng = np.random.default_rng(spec.mu * 7 + spec.n)
        for _ in range(150):
            soft = rng.normal(size=tr.codeword_length)
            assert np.array_equal(viterbi_decode(soft, tr).info_estimate, ex.ml(soft))
            hard = rng.integers(0, 2, tr.codeword_length)
            assert np.array_equal(hard_decode(hard, tr).info_estimate, ex.min_hamming(hard))

    def test_hard_single_error_corrected(self, rng):
        tr = build_trellis(CODE_75, 8)
        info = random_info(rng, 8)
        c = encode(info, CODE_75)
        for i in range(c.size):
            r = c.copy()
            r[i] ^= 1
            assert np.array_equal(hard_decode(r, tr).info_estimate, info)

    def test_hard_zero_errors(self, rng):
        spec = lookup(3, 9)
        tr = build_trellis(spec, 40)
        info = random_info(rng, 40)
        assert np.array_equal(hard_decode(encode(info, spec), tr).info_estimate, info)

    def test_equal_magnitudes_match_hamming(self, rng):
        spec = SMALL_CODES[2]
        ex = Exhaustive(spec, 7)
        tr = build_trellis(spec, 7)
        for _ in range(100):
            hard = rng.integers(0, 2, tr.codeword_length)
            soft = 0.375 * (1 - 2.0 * hard)  # dyadic, so ties stay exact
            assert np.array_equal(viterbi_decode(soft, tr).info_estimate, ex.min_hamming(hard))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(min_value=1e-3, max_value=1e3))
    def test_scale_invariance(self, seed, scale):
        tr = build_trellis(lookup(2, 6), 24)
        soft = np.random.default_rng(seed).normal(size=tr.codeword_length)
        a = viterbi_decode(soft, tr).info_estimate
        b = viterbi_decode(soft * scale, tr).info_estimate
        assert np.array_equal(a, b)

    def test_survivor_metric_self_consistent(self, rng):
        for spec in (lookup(2, 6), lookup(3, 8)):
            tr = build_trellis(spec, 50)
            soft = rng.normal(size=tr.codeword_length) * 3
            res = viterbi_decode(soft, tr)
            code = encode(res.info_estimate, spec)
            assert res.path_metric == _recompute(soft, code, spec.n)


class TestListDecoding:
    def test_single_equals_viterbi(self, rng):
        tr = build_trellis(lookup(2, 6), 40)
        soft = rng.normal(size=tr.codeword_length)
        a = viterbi_decode(soft, tr)
        b = list_decode(soft, tr, 1)
        assert np.array_equal(a.info_estimate, b.info_estimate)
        assert a.path_metric == b.path_metric

    @pytest.mark.parametrize("hard", [False, True])
    def test_full_ranking_75(self, rng, hard):
        L = 6
        ex = Exhaustive(CODE_75, L)
        tr = build_trellis(CODE_75, L)
        for _ in range(20):
            if hard:
                soft = 1 - 2.0 * rng.integers(0, 2, tr.codeword_length)
            else:
                soft = rng.normal(size=tr.codeword_length)
            res = list_decode(soft, tr, 2**L)
            got = np.array([c.metric for c in res.candidates])
            assert np.array_equal(got, np.sort(ex.metrics(soft))[::-1])
            assert len({c.key for c in res.candidates}) == 2**L
            assert np.array_equal(res.candidates[0].info, viterbi_decode(soft, tr).info_estimate)

    def test_truncated_when_list_exceeds_codewords(self, rng):
        tr = build_trellis(CODE_75, 3)
        res = list_decode(rng.normal(size=tr.codeword_length), tr, 100)
        assert len(res.candidates) == 8

    def test_list_properties(self, rng):
        spec = lookup(2, 6)
        tr = build_trellis(spec, 30)
        for _ in range(10):
            soft = rng.normal(size=tr.codeword_length)
            cands = list_decode(soft, tr, 25).candidates
            m = [c.metric for c in cands]
            assert all(a >= b for a, b in zip(m, m[1:]))
            assert len({c.key for c in cands}) == 25
            for c in cands:
                assert c.metric == _recompute(soft, encode(c.info, spec), 2)

    def test_top_k_matches_brute_force(self, rng):
        spec = SMALL_CODES[5]
        L = 9
        ex = Exhaustive(spec, L)
        tr = build_trellis(spec, L)
        for _ in range(20):
            soft = rng.normal(size=tr.codeword_length)
            cands = list_decode(soft, tr, 10).candidates
            assert np.allclose([c.metric for c in cands], np.sort(ex.metrics(soft))[::-1][:10], rtol=0, atol=1e-12)

    def test_lazy_iterator(self, rng):
        tr = build_trellis(CODE_75, 5)
        soft = rng.normal(size=tr.codeword_length)
        assert len(list(iter_candidates(soft, tr))) == 32

    def test_list_size_validation(self):
        tr = build_trellis(CODE_75, 4)
        with pytest.raises(ValueError):
            list_decode(np.zeros(tr.codeword_length), tr, 0)


class TestLikelihoodRanking:
    def test_single(self, rng):
        spec = CODE_75
        info = random_info(rng, 4)
        c = Candidate(info, 0.0)
        r = encode(info, spec)
        out = rank_by_likelihood([c], np.full(r.size, 0.2), r, spec)
        assert out[0].ratio_to_best == 1.0

    def test_ratio_nine(self):
        spec = CODE_75
        a = np.array([0, 0, 0, 0], np.uint8)
        b = np.array([1, 0, 0, 0], np.uint8)
        ca, cb = encode(a, spec), encode(b, spec)
        diff = np.flatnonzero(ca != cb)
        p = np.full(ca.size, 0.5)
        p[diff[0]] = 0.1
        out = rank_by_likelihood([Candidate(b, 0.0), Candidate(a, 0.0)], p, ca, spec)
        assert np.array_equal(out[0].candidate.info, a)
        assert out[1].ratio_to_best == pytest.approx(9.0, rel=1e-12)

    def test_consistent_with_list_order(self, rng):
        spec = lookup(2, 6)
        tr = build_trellis(spec, 20)
        for _ in range(100):
            soft = rng.normal(scale=2.0, size=tr.codeword_length)
            cands = list_decode(soft, tr, 4).candidates
            p = 1.0 / (1.0 + np.exp(np.abs(soft)))
            received = (soft < 0).astype(np.uint8)
            ranked = rank_by_likelihood(cands, p, received, spec)
            assert [r.candidate.key for r in ranked] == [c.key for c in cands]
            ll = [r.log_likelihood for r in ranked]
            assert all(x >= y for x, y in zip(ll, ll[1:]))

    def test_empty(self):
        with pytest.raises(ValueError):
            rank_by_likelihood([], [], [], CODE_75)
