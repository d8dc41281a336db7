"""Tests for truncated HDP fitting and threshold escalation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topicloop.corpus import PreprocessConfig, RawRecord, preprocess
from topicloop.hdp import Escalation, HdpConfig, HdpError, HdpEstimate, escalate, fit_hdp

BASIC = PreprocessConfig(stopwords=frozenset(), code_keywords=())


def escalate_oracle(weights, n):
    """Straight-line reimplementation of the threshold chain."""
    counts, thresholds, flags = [], [], []
    bound = 1.0 / n
    stopped = False
    for _ in range(3):
        if stopped:
            counts.append(1)
            thresholds.append(None)
            flags.append(True)
            continue
        thresholds.append(bound)
        raw = sum(1 for w in weights if w > bound)
        if raw == 0:
            counts.append(1)
            flags.append(True)
            stopped = True
        else:
            counts.append(raw)
            flags.append(False)
            bound = 1.0 / raw
    return counts, thresholds, flags


class TestEscalate:
    def test_uniform_ten_topics(self):
        # 0.1 is not > 0.1, so the second stage finds nothing
        esc = escalate([0.1] * 10, 100)
        assert (esc.hdp1, esc.hdp2, esc.hdp3) == (10, 1, 1)
        assert esc.thresholds == (0.01, 0.1, None)
        assert esc.degenerate_flags == (False, True, True)

    def test_hand_computed_chain(self):
        esc = escalate([0.5, 0.3, 0.1, 0.05, 0.05], 100)
        assert (esc.hdp1, esc.hdp2, esc.hdp3) == (5, 2, 1)
        assert esc.thresholds == (0.01, 0.2, 0.5)
        assert esc.degenerate_flags == (False, False, True)

    def test_first_stage_degenerate_stops_chain(self):
        esc = escalate([0.5, 0.5], 2)
        assert (esc.hdp1, esc.hdp2, esc.hdp3) == (1, 1, 1)
        assert esc.thresholds == (0.5, None, None)
        assert esc.degenerate_flags == (True, True, True)

    def test_single_topic_vector(self):
        esc = escalate([1.0], 100)
        assert (esc.hdp1, esc.hdp2, esc.hdp3) == (1, 1, 1)
        assert esc.thresholds == (0.01, 1.0, None)
        assert esc.degenerate_flags == (False, True, True)

    def test_full_chain_without_degeneracy(self):
        # hdp1=4 (>0.001), hdp2=2 (>0.25), hdp3=1 (>0.5)
        esc = escalate([0.6, 0.3, 0.06, 0.04], 1000)
        assert (esc.hdp1, esc.hdp2, esc.hdp3) == (4, 2, 1)
        assert esc.thresholds == (0.001, 0.25, 0.5)
        assert esc.degenerate_flags == (False, False, False)

    def test_validation(self):
        with pytest.raises(HdpError, match="probability vector"):
            escalate([0.5, 0.6], 10)
        with pytest.raises(HdpError, match="probability vector"):
            escalate([1.1, -0.1], 10)
        with pytest.raises(HdpError, match="non-empty"):
            escalate([], 10)
        with pytest.raises(HdpError, match="non-empty"):
            escalate([[0.5, 0.5]], 10)
        with pytest.raises(HdpError, match="corpus_size"):
            escalate([1.0], 0)

    def test_matches_oracle_on_fixed_vectors(self):
        cases = [
            ([0.25, 0.25, 0.25, 0.25], 4),
            ([0.9, 0.05, 0.03, 0.02], 50),
            ([1 / 7] * 7, 7),
            ([0.4, 0.2, 0.2, 0.1, 0.1], 3),
        ]
        for weights, n in cases:
            esc = escalate(weights, n)
            counts, thresholds, flags = escalate_oracle(weights, n)
            assert [esc.hdp1, esc.hdp2, esc.hdp3] == counts
            assert list(esc.thresholds) == thresholds
            assert list(esc.degenerate_flags) == flags

    @settings(max_examples=300, deadline=None)
    @given(
        raw=st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=1, max_size=40),
        n=st.integers(min_value=1, max_value=5000),
    )
    def test_monotone_and_oracle_property(self, raw, n):
        weights = np.asarray(raw) / np.sum(raw)
        esc = escalate(weights, n)
        assert 1 <= esc.hdp3 <= esc.hdp2 <= esc.hdp1 <= len(weights)
        counts, thresholds, flags = escalate_oracle(weights, n)
        assert [esc.hdp1, esc.hdp2, esc.hdp3] == counts
        assert list(esc.thresholds) == thresholds
        assert list(esc.degenerate_flags) == flags


def repeated_corpus(n_docs=12):
    records = [RawRecord(id=f"q{i}", text="stack push pop peek stack push") for i in range(n_docs)]
    return preprocess(records, BASIC)


def mixed_corpus(n_docs=16):
    texts = ["stack push pop", "tree node leaf", "sort merge swap", "graph edge path"]
    records = [RawRecord(id=f"q{i}", text=texts[i % 4] + f" extra{i % 8}") for i in range(n_docs)]
    return preprocess(records, BASIC)


class TestConfig:
    def test_validation(self):
        with pytest.raises(HdpError, match="concentrations"):
            HdpConfig(gamma=0.0)
        with pytest.raises(HdpError, match="concentrations"):
            HdpConfig(eta_doc=-1.0)
        with pytest.raises(HdpError, match="concentrations"):
            HdpConfig(beta_prior=0.0)
        with pytest.raises(HdpError, match="truncation"):
            HdpConfig(truncation=0)
        with pytest.raises(HdpError, match="sweeps >= burn_in"):
            HdpConfig(sweeps=5, burn_in=9)

    def test_dict_round_trip(self):
        config = HdpConfig(gamma=0.5, eta_doc=2.0, beta_prior=0.2, truncation=30, sweeps=40, burn_in=10, seed=3)
        assert HdpConfig.from_dict(config.to_dict()) == config


class TestFitHdp:
    def test_identical_documents_concentrate_one_topic(self):
        corpus = repeated_corpus()
        est = fit_hdp(corpus, HdpConfig(gamma=0.1, sweeps=60, burn_in=30, seed=0))
        assert est.topic_weights[0] > 0.5
        assert est.hdp1 == 1

    def test_weights_are_sorted_probability_vector(self):
        est = fit_hdp(mixed_corpus(), HdpConfig(sweeps=40, burn_in=20, seed=1))
        w = est.topic_weights
        assert np.all(w >= 0)
        assert abs(float(w.sum()) - 1.0) < 1e-9
        assert np.all(np.diff(w) <= 0)

    def test_truncation_defaults_to_corpus_size(self):
        corpus = mixed_corpus(n_docs=16)
        est = fit_hdp(corpus, HdpConfig(sweeps=20, burn_in=10))
        assert est.topic_weights.shape[0] == 16
        assert est.config.truncation is None

    def test_explicit_truncation_respected(self):
        est = fit_hdp(mixed_corpus(), HdpConfig(truncation=5, sweeps=20, burn_in=10))
        assert est.topic_weights.shape[0] == 5
        assert est.hdp1 <= 5

    def test_counts_consistent_with_weights(self):
        corpus = mixed_corpus()
        est = fit_hdp(corpus, HdpConfig(sweeps=40, burn_in=20, seed=2))
        counts, thresholds, flags = escalate_oracle(est.topic_weights, corpus.n_documents)
        assert [est.hdp1, est.hdp2, est.hdp3] == counts
        assert list(est.degenerate_flags) == flags

    def test_same_seed_is_byte_identical(self):
        corpus = mixed_corpus()
        config = HdpConfig(sweeps=30, burn_in=15, seed=9)
        assert fit_hdp(corpus, config).to_json() == fit_hdp(corpus, config).to_json()

    def test_different_seeds_diverge(self):
        corpus = mixed_corpus()
        a = fit_hdp(corpus, HdpConfig(sweeps=30, burn_in=15, seed=0))
        b = fit_hdp(corpus, HdpConfig(sweeps=30, burn_in=15, seed=1))
        assert not np.array_equal(a.topic_weights, b.topic_weights)

    def test_refit_escalation_is_deterministic(self):
        corpus = mixed_corpus()
        config = HdpConfig(sweeps=30, burn_in=15, seed=4)
        base = fit_hdp(corpus, config)
        refit_a = fit_hdp(corpus, config, refit_escalation=True)
        refit_b = fit_hdp(corpus, config, refit_escalation=True)
        assert refit_a.to_json() == refit_b.to_json()
        # stage one thresholds the same first fit either way
        assert refit_a.hdp1 == base.hdp1
        assert refit_a.hdp2 >= 1 and refit_a.hdp3 >= 1

    def test_json_round_trip_with_none_thresholds(self):
        est = fit_hdp(repeated_corpus(), HdpConfig(gamma=0.1, sweeps=30, burn_in=15, seed=0))
        assert None in est.thresholds
        again = HdpEstimate.from_json(est.to_json())
        assert again.to_json() == est.to_json()
        # values survive at the 12-decimal serialization precision
        for a, b in zip(again.thresholds, est.thresholds):
            if b is None:
                assert a is None
            else:
                assert a == pytest.approx(b, abs=1e-12)
        assert isinstance(again, HdpEstimate)


class TestEscalationType:
    def test_fields(self):
        esc = Escalation(hdp1=5, hdp2=2, hdp3=1, thresholds=(0.01, 0.2, 0.5), degenerate_flags=(False, False, True))
        assert esc.hdp1 == 5
        assert esc.thresholds[2] == 0.5
