"""Tests for perplexity, coherence, and the hyperparameter grid search."""

import math

import numpy as np
import pytest

from topicloop.corpus import PreprocessConfig, RawRecord, permute, preprocess
from topicloop.lda import LdaConfig, LdaModel, fit
from topicloop.metrics import (
    DEFAULT_GRID,
    GRID_VALUES,
    MetricsError,
    perplexity,
    tune_hyperparams,
    umass_coherence,
)

BASIC = PreprocessConfig(stopwords=frozenset(), code_keywords=())


def manual_model(beta, terms, alpha=0.1):
    """Single-purpose model with hand-set topic rows."""
    beta = np.asarray(beta, dtype=np.float64)
    k = beta.shape[0]
    return LdaModel(
        theta=np.full((1, k), 1.0 / k),
        beta=beta,
        assignments=((),),
        config=LdaConfig(k=k, alpha=alpha),
        corpus_fingerprint="manual",
        doc_ids=("d0",),
        terms=tuple(terms),
    )


def corpus_of(texts):
    return preprocess([RawRecord(id=f"q{i}", text=t) for i, t in enumerate(texts)], BASIC)


class TestPerplexity:
    def test_uniform_single_topic_equals_vocab_size(self):
        terms = [f"t{i}" for i in range(7)]
        model = manual_model([np.full(7, 1.0 / 7)], terms)
        held_out = corpus_of(["t0 t1 t2", "t3 t4 t5 t6", "t0 t0 t6"])
        result = perplexity(model, held_out)
        # K=1 fold-in puts all mass on the single topic, so every token
        # scores exactly 1/V
        assert result.value == pytest.approx(7.0, rel=1e-9)
        assert result.held_out_tokens == 10
        assert result.oov_dropped == 0

    def test_degenerate_single_word_vocabulary(self):
        model = manual_model([[1.0]], ["only"])
        result = perplexity(model, corpus_of(["only only only"]))
        assert result.value == pytest.approx(1.0, rel=1e-12)
        assert result.log_likelihood == pytest.approx(0.0, abs=1e-12)

    def test_three_token_hand_computation(self):
        model = manual_model([[0.5, 0.25, 0.25]], ["a", "b", "c"])
        result = perplexity(model, corpus_of(["a b c"]))
        expected = math.exp(-(math.log(0.5) + 2 * math.log(0.25)) / 3)
        assert expected == pytest.approx(3.1748, abs=1e-3)
        assert result.value == pytest.approx(expected, rel=1e-9)

    def test_value_formula_identity(self):
        model = fit(corpus_of([f"w{i % 5} w{(i + 1) % 5} shared" for i in range(8)]), LdaConfig(k=2, sweeps=20, burn_in=10))
        held_out = corpus_of(["w0 w3 shared", "w1 w2"])
        result = perplexity(model, held_out)
        assert result.value == pytest.approx(math.exp(-result.log_likelihood / result.held_out_tokens))
        assert result.value >= 1.0  # per-token probabilities never exceed 1

    def test_invariant_under_document_order(self):
        train = corpus_of([f"w{i % 6} w{(i + 2) % 6} w{(i + 4) % 6}" for i in range(10)])
        model = fit(train, LdaConfig(k=3, sweeps=30, burn_in=15, seed=2))
        texts = ["w0 w1 w2", "w3 w4", "w5 w0 w0 w1", "w2 w3"]
        forward = corpus_of(texts)
        records = [RawRecord(id=f"q{i}", text=t) for i, t in enumerate(texts)]
        backward = preprocess(list(reversed(records)), BASIC)
        shuffled = permute(forward, seed=99)
        a = perplexity(model, forward)
        b = perplexity(model, backward)
        c = perplexity(model, shuffled)
        assert a == b == c

    def test_oov_tokens_dropped_and_counted(self):
        model = manual_model([[0.5, 0.5]], ["a", "b"])
        result = perplexity(model, corpus_of(["a b zzz", "qqq a"]))
        assert result.oov_dropped == 2
        assert result.held_out_tokens == 3

    def test_all_oov_is_an_error(self):
        model = manual_model([[0.5, 0.5]], ["a", "b"])
        with pytest.raises(MetricsError, match="out of vocabulary"):
            perplexity(model, corpus_of(["zzz qqq"]))

    def test_sweep_validation(self):
        model = manual_model([[1.0]], ["a"])
        with pytest.raises(MetricsError, match="sweeps >= burn_in"):
            perplexity(model, corpus_of(["a"]), sweeps=5, burn_in=6)

    def test_deterministic_under_seed(self):
        train = corpus_of([f"w{i % 4} w{(i + 1) % 4}" for i in range(8)])
        model = fit(train, LdaConfig(k=2, sweeps=20, burn_in=10))
        held_out = corpus_of(["w0 w1 w2", "w3 w0"])
        assert perplexity(model, held_out, seed=5) == perplexity(model, held_out, seed=5)


class TestUmassCoherence:
    def test_always_cooccurring_pair_is_positive(self):
        corpus = corpus_of(["north south"] * 4)
        model = manual_model([[0.7, 0.3]], ["north", "south"])
        result = umass_coherence(model, corpus, top_m=2)
        assert result.per_topic[0] == pytest.approx(math.log(5 / 4))
        assert result.per_topic[0] > 0

    def test_never_cooccurring_pair_is_nonpositive(self):
        corpus = corpus_of(["north", "north", "north", "south", "south"])
        model = manual_model([[0.7, 0.3]], ["north", "south"])
        result = umass_coherence(model, corpus, top_m=2)
        assert result.per_topic[0] == pytest.approx(math.log(1 / 3))
        assert result.per_topic[0] <= 0

    def test_aggregate_is_mean(self):
        corpus = corpus_of([f"w{i % 4} w{(i + 1) % 4} w{(i + 2) % 4}" for i in range(12)])
        model = fit(corpus, LdaConfig(k=3, sweeps=20, burn_in=10, seed=1))
        result = umass_coherence(model, corpus, top_m=3)
        assert len(result.per_topic) == 3
        assert result.aggregate == pytest.approx(sum(result.per_topic) / 3)

    def test_matches_bruteforce_oracle(self):
        corpus = corpus_of([f"w{i % 7} w{(i + 3) % 7} w{(i * 2) % 7} shared{i % 2}" for i in range(20)])
        model = fit(corpus, LdaConfig(k=3, sweeps=30, burn_in=15, seed=4))
        result = umass_coherence(model, corpus, top_m=5)

        doc_terms = [{corpus.vocabulary.terms[t] for t in d.tokens} for d in corpus.documents]
        for topic in range(model.k):
            row = model.beta[topic]
            order = sorted(range(len(row)), key=lambda i: (-row[i], i))[:5]
            words = [model.terms[i] for i in order]
            expected = 0.0
            for i in range(1, len(words)):
                for j in range(i):
                    d_j = sum(1 for dt in doc_terms if words[j] in dt)
                    co = sum(1 for dt in doc_terms if words[j] in dt and words[i] in dt)
                    expected += math.log((co + 1) / d_j)
            assert result.per_topic[topic] == pytest.approx(expected, abs=1e-12)

    def test_top_m_clamped_to_vocabulary(self):
        corpus = corpus_of(["a b", "b a", "a b"])
        model = manual_model([[0.6, 0.4]], ["a", "b"])
        big = umass_coherence(model, corpus, top_m=50)
        small = umass_coherence(model, corpus, top_m=2)
        assert big == small

    def test_top_m_validation(self):
        model = manual_model([[0.6, 0.4]], ["a", "b"])
        with pytest.raises(MetricsError, match="top_m"):
            umass_coherence(model, corpus_of(["a b"]), top_m=1)

    def test_unseen_top_word_is_an_error(self):
        # "ghost" dominates the topic but never appears in the reference corpus
        model = manual_model([[0.8, 0.2]], ["ghost", "real"])
        with pytest.raises(MetricsError, match="never occurs"):
            umass_coherence(model, corpus_of(["real real", "real"]), top_m=2)


class TestTuneHyperparams:
    def make_corpus(self):
        return corpus_of([f"w{i % 5} w{(i + 1) % 5} w{(i + 2) % 5}" for i in range(10)])

    def test_single_point_grid(self):
        result = tune_hyperparams(self.make_corpus(), k=2, grid=((0.3, 0.7),), template=LdaConfig(sweeps=10, burn_in=5))
        assert (result.alpha, result.eta) == (0.3, 0.7)
        assert len(result.table) == 1

    def test_matches_independent_evaluation(self):
        corpus = self.make_corpus()
        template = LdaConfig(sweeps=15, burn_in=5, seed=3)
        from dataclasses import replace

        grid = ((0.01, 0.01), (0.1, 0.5), (0.9, 0.9), (0.5, 0.1))
        scores = []
        for a, e in grid:
            model = fit(corpus, replace(template, k=2, alpha=a, eta=e))
            scores.append(umass_coherence(model, corpus, top_m=4).aggregate)
        expected = grid[max(range(len(grid)), key=lambda i: (scores[i], -i))]
        result = tune_hyperparams(corpus, k=2, grid=grid, template=template, top_m=4)
        assert (result.alpha, result.eta) == expected
        assert [row[2] for row in result.table] == [pytest.approx(s) for s in scores]

    def test_result_is_a_grid_member(self):
        corpus = self.make_corpus()
        grid = ((0.1, 0.1), (0.5, 0.5), (1.0, 1.0))
        result = tune_hyperparams(corpus, k=2, grid=grid, template=LdaConfig(sweeps=10, burn_in=5))
        assert (result.alpha, result.eta) in grid

    def test_tie_goes_to_earliest_point(self):
        # single-word vocabulary: every topic has one top word, no pairs,
        # so every grid point scores exactly 0.0
        corpus = corpus_of(["solo", "solo solo", "solo"])
        grid = ((0.9, 0.9), (0.01, 0.01), (0.5, 0.5))
        result = tune_hyperparams(corpus, k=1, grid=grid, template=LdaConfig(sweeps=5, burn_in=2))
        assert set(score for _, _, score in result.table) == {0.0}
        assert (result.alpha, result.eta) == (0.9, 0.9)

    def test_deterministic(self):
        corpus = self.make_corpus()
        grid = ((0.1, 0.1), (0.5, 0.5))
        template = LdaConfig(sweeps=10, burn_in=5, seed=8)
        a = tune_hyperparams(corpus, k=2, grid=grid, template=template)
        b = tune_hyperparams(corpus, k=2, grid=grid, template=template)
        assert a == b

    def test_parallel_matches_serial(self):
        corpus = self.make_corpus()
        grid = ((0.1, 0.1), (0.5, 0.5), (0.9, 0.3))
        template = LdaConfig(sweeps=10, burn_in=5, seed=8)
        serial = tune_hyperparams(corpus, k=2, grid=grid, template=template)
        parallel = tune_hyperparams(corpus, k=2, grid=grid, template=template, parallelism=3)
        assert serial == parallel

    def test_validation(self):
        corpus = self.make_corpus()
        with pytest.raises(MetricsError, match="non-empty"):
            tune_hyperparams(corpus, k=2, grid=())
        with pytest.raises(MetricsError, match="non-positive"):
            tune_hyperparams(corpus, k=2, grid=((0.0, 0.5),))

    def test_default_grid_shape(self):
        assert len(DEFAULT_GRID) == len(GRID_VALUES) ** 2
        assert all(0 < a <= 1 and 0 < e <= 1 for a, e in DEFAULT_GRID)
        assert DEFAULT_GRID[0] == (GRID_VALUES[0], GRID_VALUES[0])
        assert DEFAULT_GRID[1] == (GRID_VALUES[0], GRID_VALUES[1])
