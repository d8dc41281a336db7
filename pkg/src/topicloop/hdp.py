"""Truncated Hierarchical Dirichlet Process topic-count estimation.

The nonparametric model is approximated with a finite symmetric truncation:
top-level topic proportions drawn from Dir(gamma/T), per-document topic
distributions from Dir(eta_doc * top_level), topic-word rows from
Dir(beta_prior). Inference alternates a collapsed token pass, auxiliary
table counts, and a resample of the top-level proportions. The posterior
mean of the top-level proportions, sorted descending, is the topic-weight
distribution; escalating significance thresholds (1/n, then 1/count)
convert it into the significant-topic counts hdp1 >= hdp2 >= hdp3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .corpus import Corpus
from .util import ToolError, canonical_json, derive_seed, sha256_hex


class HdpError(ToolError):
    """Raised for invalid configurations or unusable weight vectors."""


@dataclass(frozen=True)
class HdpConfig:
    """Hyperparameters for the truncated HDP fit.

    ``truncation=None`` means "use the corpus size", the conventional
    ceiling: the model cannot need more topics than documents.
    """

    gamma: float = 1.0
    eta_doc: float = 1.0
    beta_prior: float = 0.1
    truncation: int | None = None
    sweeps: int = 100
    burn_in: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.gamma <= 0 or self.eta_doc <= 0 or self.beta_prior <= 0:
            raise HdpError("all concentrations must be > 0")
        if self.truncation is not None and self.truncation < 1:
            raise HdpError(f"truncation must be >= 1, got {self.truncation}")
        if self.burn_in < 0 or self.sweeps < self.burn_in:
            raise HdpError(f"need sweeps >= burn_in >= 0, got sweeps={self.sweeps} burn_in={self.burn_in}")

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "eta_doc": self.eta_doc,
            "beta_prior": self.beta_prior,
            "truncation": self.truncation,
            "sweeps": self.sweeps,
            "burn_in": self.burn_in,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HdpConfig":
        return cls(
            gamma=data.get("gamma", 1.0),
            eta_doc=data.get("eta_doc", 1.0),
            beta_prior=data.get("beta_prior", 0.1),
            truncation=data.get("truncation"),
            sweeps=data.get("sweeps", 100),
            burn_in=data.get("burn_in", 50),
            seed=data.get("seed", 0),
        )


@dataclass(frozen=True)
class Escalation:
    """Significant-topic counts under the three escalating thresholds.

    ``thresholds[i]`` is None when the chain stopped before computing it.
    ``degenerate_flags[i]`` is True when count i was forced to 1 because the
    raw count was zero (or the chain had already stopped).
    """

    hdp1: int
    hdp2: int
    hdp3: int
    thresholds: tuple[float | None, float | None, float | None]
    degenerate_flags: tuple[bool, bool, bool]


@dataclass(frozen=True, eq=False)
class HdpEstimate:
    """Topic-weight distribution plus the escalated significant-topic counts."""

    topic_weights: np.ndarray  # length T, sorted descending, sums to 1
    hdp1: int
    hdp2: int
    hdp3: int
    thresholds: tuple[float | None, float | None, float | None]
    degenerate_flags: tuple[bool, bool, bool]
    config: HdpConfig
    corpus_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "topic_weights": [round(float(w), 12) for w in self.topic_weights],
            "hdp1": self.hdp1,
            "hdp2": self.hdp2,
            "hdp3": self.hdp3,
            "thresholds": [None if t is None else round(float(t), 12) for t in self.thresholds],
            "degenerate_flags": list(self.degenerate_flags),
            "config": self.config.to_dict(),
            "corpus_fingerprint": self.corpus_fingerprint,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "HdpEstimate":
        return cls(
            topic_weights=np.asarray(data["topic_weights"], dtype=np.float64),
            hdp1=data["hdp1"],
            hdp2=data["hdp2"],
            hdp3=data["hdp3"],
            thresholds=tuple(data["thresholds"]),
            degenerate_flags=tuple(data["degenerate_flags"]),
            config=HdpConfig.from_dict(data["config"]),
            corpus_fingerprint=data["corpus_fingerprint"],
        )

    @classmethod
    def from_json(cls, text: str) -> "HdpEstimate":
        return cls.from_dict(json.loads(text))

    def fingerprint(self) -> str:
        return sha256_hex(self.to_json())


def escalate(topic_weights, corpus_size: int) -> Escalation:
    """Apply the escalating significance thresholds to a weight vector.

    threshold_1 = 1/corpus_size, hdp1 = |{w : w > threshold_1}|, then
    threshold_2 = 1/hdp1 and threshold_3 = 1/hdp2 in the same pattern.
    Comparison is strict: a weight exactly equal to the threshold does not
    count. A zero count stops the chain; it and every later count become 1
    with the degeneracy flag set.
    """
    weights = np.asarray(topic_weights, dtype=np.float64)
    if weights.ndim != 1 or weights.size == 0:
        raise HdpError("topic_weights must be a non-empty 1-d vector")
    if np.any(weights < 0) or not math.isclose(float(weights.sum()), 1.0, abs_tol=1e-6):
        raise HdpError("topic_weights must be a probability vector")
    if corpus_size < 1:
        raise HdpError(f"corpus_size must be >= 1, got {corpus_size}")

    counts: list[int] = []
    thresholds: list[float | None] = []
    flags: list[bool] = []
    bound: float | None = 1.0 / corpus_size
    stopped = False
    for _ in range(3):
        if stopped:
            counts.append(1)
            thresholds.append(None)
            flags.append(True)
            continue
        thresholds.append(bound)
        raw = int(np.count_nonzero(weights > bound))
        if raw == 0:
            counts.append(1)
            flags.append(True)
            stopped = True
        else:
            counts.append(raw)
            flags.append(False)
            bound = 1.0 / raw
    return Escalation(
        hdp1=counts[0],
        hdp2=counts[1],
        hdp3=counts[2],
        thresholds=(thresholds[0], thresholds[1], thresholds[2]),
        degenerate_flags=(flags[0], flags[1], flags[2]),
    )


def _sample_weights(corpus: Corpus, config: HdpConfig, truncation: int, seed: int) -> np.ndarray:
    """One full sampler run; returns the posterior-mean top-level proportions."""
    tokens, doc_of = corpus.flatten()
    n_tokens = tokens.shape[0]
    n_docs, n_vocab = corpus.n_documents, corpus.n_vocab
    t = truncation

    rng = np.random.default_rng(seed)
    z = rng.integers(0, t, size=n_tokens).astype(np.int64)
    n_dk, n_kw, n_k = kernels.build_counts(tokens, doc_of, z, n_docs, t, n_vocab)
    alpha_top = np.full(t, 1.0 / t, dtype=np.float64)
    base_conc = config.gamma / t
    word_conc_total = n_vocab * config.beta_prior

    acc = np.zeros(t, dtype=np.float64)
    samples = 0
    for sweep in range(config.sweeps):
        doc_prior = config.eta_doc * alpha_top
        uniforms = rng.random(n_tokens)
        kernels.gibbs_sweep(
            tokens, doc_of, z, n_dk, n_kw, n_k, doc_prior, config.beta_prior, word_conc_total, uniforms
        )
        # Auxiliary table counts feed the top-level resample: every occupied
        # (doc, topic) cell contributes Bernoulli successes at rate a/(a+i).
        m = np.zeros(t, dtype=np.int64)
        table_uniforms = rng.random(n_tokens)
        kernels.antoniak_counts(n_dk, doc_prior, table_uniforms, m)
        gammas = rng.standard_gamma(base_conc + m)
        total = gammas.sum()
        if total > 0.0:
            alpha_top = gammas / total
        if sweep >= config.burn_in:
            acc += alpha_top
            samples += 1
    if samples == 0:
        acc = alpha_top.copy()
        samples = 1
    weights = acc / samples
    weights = np.sort(weights)[::-1]
    # Exact normalization so the escalate() precondition holds bit-for-bit.
    return weights / weights.sum()


def fit_hdp(corpus: Corpus, config: HdpConfig, refit_escalation: bool = False) -> HdpEstimate:
    """Estimate topic weights and the escalated counts for a corpus.

    With ``refit_escalation=True`` each escalation stage re-runs the sampler
    on a fresh derived seed and applies its threshold to the new weight
    vector, instead of re-thresholding the first fit's weights.
    """
    n = corpus.n_documents
    truncation = config.truncation if config.truncation is not None else n
    if truncation < 1:
        raise HdpError(f"truncation must be >= 1, got {truncation}")

    weights = _sample_weights(corpus, config, truncation, derive_seed(config.seed, "hdp-fit"))
    if not refit_escalation:
        esc = escalate(weights, n)
    else:
        esc = _escalate_with_refits(corpus, config, truncation, weights, n)
    return HdpEstimate(
        topic_weights=weights,
        hdp1=esc.hdp1,
        hdp2=esc.hdp2,
        hdp3=esc.hdp3,
        thresholds=esc.thresholds,
        degenerate_flags=esc.degenerate_flags,
        config=config,
        corpus_fingerprint=corpus.fingerprint(),
    )


def _escalate_with_refits(
    corpus: Corpus, config: HdpConfig, truncation: int, first_weights: np.ndarray, n: int
) -> Escalation:
    counts: list[int] = []
    thresholds: list[float | None] = []
    flags: list[bool] = []
    stage_weights = first_weights
    bound: float | None = 1.0 / n
    stopped = False
    for stage in range(3):
        if stopped:
            counts.append(1)
            thresholds.append(None)
            flags.append(True)
            continue
        if stage > 0:
            stage_weights = _sample_weights(
                corpus, config, truncation, derive_seed(config.seed, "hdp-refit", stage)
            )
        thresholds.append(bound)
        raw = int(np.count_nonzero(stage_weights > bound))
        if raw == 0:
            counts.append(1)
            flags.append(True)
            stopped = True
        else:
            counts.append(raw)
            flags.append(False)
            bound = 1.0 / raw
    return Escalation(
        hdp1=counts[0],
        hdp2=counts[1],
        hdp3=counts[2],
        thresholds=(thresholds[0], thresholds[1], thresholds[2]),
        degenerate_flags=(flags[0], flags[1], flags[2]),
    )
