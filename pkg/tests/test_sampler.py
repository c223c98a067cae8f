import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusmix.corpus import Corpus, CorpusManifest, Document, build_manifest
from corpusmix.sampler import (
    SamplerConfig,
    assemble_dataset,
    build_plan,
    counter_uniforms,
    minmax_normalize,
    read_plan,
    sampling_frequencies,
    sampling_weights,
    stochastic_round,
    target_doc_count,
    write_plan,
)

from conftest import synthetic_documents


class TestMinMax:
    def test_affine(self):
        np.testing.assert_allclose(minmax_normalize([2, 4, 6]), [0, 0.5, 1])

    def test_constant_maps_to_midpoint(self):
        np.testing.assert_array_equal(minmax_normalize([5, 5, 5]), [0.5, 0.5, 0.5])

    def test_order_preserved_and_bounds_hit(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal(1000) * 40 + 3
        out = minmax_normalize(v)
        assert out.min() == 0.0 and out.max() == 1.0
        # rank correlation 1: ordering is untouched
        np.testing.assert_array_equal(np.argsort(out, kind="stable"), np.argsort(v, kind="stable"))

    def test_errors(self):
        with pytest.raises(ValueError, match="non-empty"):
            minmax_normalize([])
        with pytest.raises(ValueError, match="non-finite"):
            minmax_normalize([1.0, np.inf])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=100))
    @settings(max_examples=150)
    def test_always_lands_in_unit_interval(self, values):
        out = minmax_normalize(values)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestWeights:
    def test_quality_only_endpoint(self):
        d = np.array([0.1, 0.9])
        q = np.array([0.4, 0.2])
        np.testing.assert_array_equal(sampling_weights(d, q, alpha=0.0), q)

    def test_diversity_only_endpoint(self):
        d = np.array([0.1, 0.9])
        q = np.array([0.4, 0.2])
        np.testing.assert_array_equal(sampling_weights(d, q, alpha=1.0), d)

    def test_direct_arithmetic(self):
        out = sampling_weights([0.5], [0.25], alpha=0.8)
        assert out[0] == pytest.approx(0.45, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError, match="length mismatch"):
            sampling_weights([0.5], [0.5, 0.5], alpha=0.5)
        with pytest.raises(ValueError, match="alpha"):
            sampling_weights([0.5], [0.5], alpha=1.5)
        with pytest.raises(ValueError, match=r"d_norm must lie"):
            sampling_weights([1.5], [0.5], alpha=0.5)


class TestTargetDocCount:
    def test_paper_scale_ratio(self):
        m = CorpusManifest(total_docs=503, total_tokens=500)
        assert target_doc_count(100, m) == 100.6

    def test_identity_budget(self):
        m = CorpusManifest(total_docs=777, total_tokens=12345)
        assert target_doc_count(12345, m) == 777.0

    def test_quarter_scale(self):
        m = CorpusManifest(total_docs=100, total_tokens=1000)
        assert target_doc_count(250, m) == 25.0

    def test_zero_tokens_rejected(self):
        with pytest.raises(ValueError, match="zero total tokens"):
            target_doc_count(10, CorpusManifest(total_docs=5, total_tokens=0))


class TestFrequencies:
    def test_uniform_weights_split_evenly(self):
        c = sampling_frequencies(np.full(8, 0.37), tau=0.2, target_docs=100.0)
        np.testing.assert_allclose(c, np.full(8, 12.5), rtol=1e-12)

    def test_two_point_closed_form(self):
        target = 1000.0
        c = sampling_frequencies(np.array([1.0, 0.0]), tau=0.2, target_docs=target)
        e5 = math.exp(5.0)
        np.testing.assert_allclose(
            c, [target * e5 / (e5 + 1.0), target * 1.0 / (e5 + 1.0)], rtol=1e-9
        )
        assert c[0] / c[1] == pytest.approx(e5, rel=1e-9)

    def test_huge_temperature_approaches_uniform(self):
        rng = np.random.default_rng(1)
        p = rng.random(50)
        c = sampling_frequencies(p, tau=1e6, target_docs=50.0)
        np.testing.assert_allclose(c, np.ones(50), atol=1e-4)

    def test_sum_equals_target(self):
        rng = np.random.default_rng(2)
        p = rng.random(10_000)
        c = sampling_frequencies(p, tau=0.2, target_docs=3210.5)
        assert c.sum() == pytest.approx(3210.5, rel=1e-6)

    def test_strictly_increasing_in_weight(self):
        p = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        c = sampling_frequencies(p, tau=0.2, target_docs=10.0)
        assert np.all(np.diff(c) > 0)

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(3)
        p = rng.random(200)
        base = sampling_frequencies(p, tau=0.2, target_docs=77.0)
        shifted = sampling_frequencies(p + 0.313, tau=0.2, target_docs=77.0)
        np.testing.assert_allclose(shifted, base, rtol=1e-9)

    def test_raising_one_weight_raises_its_frequency(self):
        p = np.array([0.2, 0.5, 0.8])
        base = sampling_frequencies(p, tau=0.2, target_docs=30.0)
        p2 = p.copy()
        p2[0] += 0.1
        bumped = sampling_frequencies(p2, tau=0.2, target_docs=30.0)
        assert bumped[0] > base[0]
        assert bumped[1] < base[1] and bumped[2] < base[2]

    def test_errors(self):
        with pytest.raises(ValueError, match="non-empty"):
            sampling_frequencies([], tau=0.2, target_docs=1.0)
        with pytest.raises(ValueError, match="positive"):
            sampling_frequencies([0.5], tau=0.0, target_docs=1.0)


class TestStochasticRound:
    def test_worked_example_point_three(self):
        counts = stochastic_round(np.full(100_000, 2.3), seed=11)
        assert set(np.unique(counts)) <= {2, 3}
        frac3 = np.mean(counts == 3)
        assert abs(frac3 - 0.3) < 0.01

    def test_integer_frequency_never_rounds(self):
        counts = stochastic_round(np.full(1000, 4.0), seed=0)
        np.testing.assert_array_equal(counts, np.full(1000, 4))

    def test_binomial_concentration_half(self):
        counts = stochastic_round(np.full(100_000, 0.5), seed=7)
        sigma = math.sqrt(100_000 * 0.25)
        assert abs(counts.sum() - 50_000) <= 3 * sigma

    def test_counts_bracket_frequency(self):
        rng = np.random.default_rng(5)
        c = rng.random(5000) * 6
        counts = stochastic_round(c, seed=3)
        np.testing.assert_array_equal(
            np.minimum(np.maximum(counts, np.floor(c)), np.floor(c) + 1), counts
        )

    def test_deterministic_per_seed(self):
        c = np.random.default_rng(0).random(100)
        np.testing.assert_array_equal(
            stochastic_round(c, seed=9), stochastic_round(c, seed=9)
        )
        assert not np.array_equal(stochastic_round(c, seed=9), stochastic_round(c, seed=10))

    def test_draws_keyed_by_index_not_iteration_order(self):
        # rounding a shard must agree with rounding the whole vector
        c = np.random.default_rng(1).random(1000) * 3
        whole = stochastic_round(c, seed=21)
        parts = np.concatenate(
            [
                stochastic_round(c[:137], seed=21, start=0),
                stochastic_round(c[137:600], seed=21, start=137),
                stochastic_round(c[600:], seed=21, start=600),
            ]
        )
        np.testing.assert_array_equal(whole, parts)

    def test_uniform_stream_slices_agree(self):
        full = counter_uniforms(99, 0, 512)
        for split in (1, 2, 3, 4, 5, 100, 511):
            glued = np.concatenate(
                [counter_uniforms(99, 0, split), counter_uniforms(99, split, 512 - split)]
            )
            np.testing.assert_array_equal(full, glued)

    def test_negative_frequency_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            stochastic_round([-0.1], seed=0)


class TestBuildPlan:
    def _corpus(self, n=400, seed=0):
        docs = synthetic_documents(n, ["web", "books"], seed=seed, token_range=(5, 50))
        rng = np.random.default_rng(seed + 1)
        for doc in docs:
            doc.quality_score = int(rng.integers(0, 11))
            doc.diversity_raw = float(rng.random())
        return Corpus(docs)

    def test_alpha_endpoints_match_single_measure(self):
        corpus = self._corpus()
        q = np.array([float(d.quality_score) for d in corpus])
        d = np.array([d.diversity_raw for d in corpus])
        base = dict(target_tokens=2000, seed=4)

        plan_q = build_plan(corpus, SamplerConfig(alpha=0.0, **base))
        np.testing.assert_array_equal(plan_q.weight, minmax_normalize(q))
        plan_d = build_plan(corpus, SamplerConfig(alpha=1.0, **base))
        np.testing.assert_array_equal(plan_d.weight, minmax_normalize(d))

    def test_plan_conserves_target_docs(self):
        corpus = self._corpus()
        plan = build_plan(corpus, SamplerConfig(target_tokens=3000, seed=1))
        manifest = build_manifest(corpus)
        expected = target_doc_count(3000, manifest)
        assert plan.frequency.sum() == pytest.approx(expected, rel=1e-6)
        assert plan.target_docs == expected

    def test_expected_tokens_identity(self):
        corpus = self._corpus()
        plan = build_plan(corpus, SamplerConfig(target_tokens=3000, seed=1))
        tokens = corpus.token_counts()
        assert plan.expected_tokens == pytest.approx(float(plan.frequency @ tokens))
        assert plan.realized_tokens == int(plan.count @ tokens)

    def test_missing_annotations_reported(self):
        docs = synthetic_documents(5, ["web"], seed=0)
        corpus = Corpus(docs)
        with pytest.raises(ValueError, match="lack a quality annotation"):
            build_plan(corpus, SamplerConfig(target_tokens=10))

    def test_zero_token_documents_rejected(self):
        docs = synthetic_documents(3, ["web"], seed=0)
        docs[1].token_count = 0
        for d in docs:
            d.quality_score, d.diversity_raw = 5, 0.5
        with pytest.raises(ValueError, match="zero tokens"):
            build_plan(Corpus(docs), SamplerConfig(target_tokens=10))

    def test_plan_roundtrips_through_file(self, tmp_path):
        corpus = self._corpus(100)
        plan = build_plan(corpus, SamplerConfig(target_tokens=500, seed=2))
        write_plan(plan, tmp_path / "plan.jsonl")
        back = read_plan(tmp_path / "plan.jsonl")
        assert back.doc_ids == plan.doc_ids
        np.testing.assert_array_equal(back.count, plan.count)
        np.testing.assert_allclose(back.weight, plan.weight, atol=1e-15)
        np.testing.assert_allclose(back.frequency, plan.frequency, atol=1e-15)


class TestAssemble:
    def _annotated(self, n=50):
        docs = synthetic_documents(n, ["web", "books"], seed=3, token_range=(2, 9))
        corpus = Corpus(docs)
        for d in corpus:
            d.weight = 0.5
        return corpus

    def test_identity_mix_is_a_copy(self, tmp_path):
        corpus = self._annotated()
        out = tmp_path / "data.jsonl"
        summary = assemble_dataset(corpus, np.ones(len(corpus), dtype=int), out)
        records = [json.loads(ln) for ln in out.read_text().splitlines()]
        assert [r["id"] for r in records] == corpus.ids()
        assert all(r["replica"] == 0 for r in records)
        assert summary.realized_docs == len(corpus)
        assert summary.realized_tokens == int(corpus.token_counts().sum())
        # emergent shares equal source proportions
        manifest = build_manifest(corpus)
        for domain, share in summary.domain_token_shares.items():
            source = manifest.per_domain[domain]["tokens"] / manifest.total_tokens
            assert share == pytest.approx(source)

    def test_zero_counts_writes_empty_dataset(self, tmp_path, caplog):
        corpus = self._annotated()
        out = tmp_path / "data.jsonl"
        with caplog.at_level("WARNING"):
            summary = assemble_dataset(corpus, np.zeros(len(corpus), dtype=int), out)
        assert out.read_text() == ""
        assert summary.realized_docs == 0
        assert summary.discarded_fraction == 1.0
        assert any("empty dataset" in r.message for r in caplog.records)

    def test_replicas_get_suffixed_ids(self, tmp_path):
        docs = [Document(doc_id="x", domain="web", text="hi there", token_count=2)]
        corpus = Corpus(docs)
        out = tmp_path / "data.jsonl"
        assemble_dataset(corpus, np.array([3]), out)
        records = [json.loads(ln) for ln in out.read_text().splitlines()]
        assert [r["id"] for r in records] == ["x", "x#1", "x#2"]
        assert [r["replica"] for r in records] == [0, 1, 2]
        assert all(r["text"] == "hi there" and r["tokens"] == 2 for r in records)

    def test_misaligned_counts_rejected(self, tmp_path):
        corpus = self._annotated()
        with pytest.raises(ValueError, match="counts cover"):
            assemble_dataset(corpus, np.ones(3), tmp_path / "d.jsonl")

    def test_discarded_stats(self, tmp_path):
        corpus = self._annotated(10)
        weights = np.linspace(0.0, 0.9, 10)
        for i, doc in enumerate(corpus):
            doc.weight = float(weights[i])
        counts = np.array([0, 0, 0, 1, 1, 1, 1, 2, 2, 3])
        summary = assemble_dataset(corpus, counts, tmp_path / "d.jsonl")
        assert summary.discarded_docs == 3
        assert summary.discarded_fraction == pytest.approx(0.3)
        assert summary.discarded_mean_weight == pytest.approx(weights[:3].mean())
        assert summary.count_histogram == {0: 3, 1: 4, 2: 2, 3: 1}


class TestPipelineProperties:
    def test_realized_tokens_concentrate_around_expectation(self):
        docs = synthetic_documents(20_000, ["a", "b"], seed=9, token_range=(50, 2000))
        corpus = Corpus(docs)
        rng = np.random.default_rng(10)
        for d in corpus:
            d.quality_score = int(rng.integers(0, 11))
            d.diversity_raw = float(rng.random())
        manifest = build_manifest(corpus)
        config = SamplerConfig(target_tokens=manifest.total_tokens // 2, seed=0)
        plan = build_plan(corpus, config, manifest=manifest)
        assert abs(plan.realized_tokens - plan.expected_tokens) / plan.expected_tokens < 0.02

    def test_endpoint_pipelines_agree_elementwise(self):
        docs = synthetic_documents(500, ["a"], seed=2, token_range=(5, 20))
        corpus = Corpus(docs)
        rng = np.random.default_rng(3)
        q = rng.integers(0, 11, size=500)
        dv = rng.random(500)
        for i, d in enumerate(corpus):
            d.quality_score = int(q[i])
            d.diversity_raw = float(dv[i])
        plan0 = build_plan(corpus, SamplerConfig(alpha=0.0, target_tokens=1000, seed=5))
        quality_only = build_plan(
            corpus,
            SamplerConfig(alpha=0.0, target_tokens=1000, seed=5),
            diversity=np.zeros(500),
        )
        np.testing.assert_array_equal(plan0.weight, quality_only.weight)
        np.testing.assert_array_equal(plan0.count, quality_only.count)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="alpha"):
            SamplerConfig(target_tokens=10, alpha=-0.1)
        with pytest.raises(ValueError, match="tau"):
            SamplerConfig(target_tokens=10, tau=0.0)
        with pytest.raises(ValueError, match="target_tokens"):
            SamplerConfig(target_tokens=0)
