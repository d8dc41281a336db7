"""Latent Dirichlet Allocation fit with a fixed topic count.

Inference is collapsed Gibbs sampling: each token's topic is resampled from

    p(z = k | rest) ∝ (n_dk + alpha) * (n_kw + eta) / (n_k + V * eta)

Document-topic and topic-word distributions are estimated from count
matrices averaged over the post-burn-in sweeps, which keeps the rows exact
probability vectors while lowering the variance of the effective-topic
count the recursion layer consumes. Fits are deterministic given the
corpus, the config, and the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .corpus import Corpus
from .util import ToolError, canonical_json, derive_seed, sha256_hex


class LdaError(ToolError):
    """Raised for invalid configurations or degenerate fit requests."""


@dataclass(frozen=True)
class LdaConfig:
    """Hyperparameters for one LDA fit.

    ``k=None`` marks a template (the recursion layer fills the topic count
    per step); fitting requires a concrete k.
    """

    k: int | None = None
    alpha: float = 0.1
    eta: float = 0.1
    sweeps: int = 200
    burn_in: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise LdaError(f"topic count must be >= 1, got {self.k}")
        if self.alpha <= 0:
            raise LdaError(f"alpha must be > 0, got {self.alpha}")
        if self.eta <= 0:
            raise LdaError(f"eta must be > 0, got {self.eta}")
        if self.burn_in < 0 or self.sweeps < self.burn_in:
            raise LdaError(f"need sweeps >= burn_in >= 0, got sweeps={self.sweeps} burn_in={self.burn_in}")

    def with_k(self, k: int) -> "LdaConfig":
        return replace(self, k=k)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "eta": self.eta,
            "sweeps": self.sweeps,
            "burn_in": self.burn_in,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LdaConfig":
        return cls(
            k=data.get("k"),
            alpha=data.get("alpha", 0.1),
            eta=data.get("eta", 0.1),
            sweeps=data.get("sweeps", 200),
            burn_in=data.get("burn_in", 100),
            seed=data.get("seed", 0),
        )


@dataclass(frozen=True, eq=False)
class LdaModel:
    """A fitted model: distributions, final-sweep assignments, provenance."""

    theta: np.ndarray  # D x K, rows sum to 1
    beta: np.ndarray  # K x V, rows sum to 1
    assignments: tuple[tuple[int, ...], ...]  # final-sweep topic label per token
    config: LdaConfig
    corpus_fingerprint: str
    doc_ids: tuple[str, ...]
    terms: tuple[str, ...]

    @property
    def n_documents(self) -> int:
        return self.theta.shape[0]

    @property
    def k(self) -> int:
        return self.theta.shape[1]

    @property
    def n_vocab(self) -> int:
        return self.beta.shape[1]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "theta": [[round(float(x), 12) for x in row] for row in self.theta],
            "beta": [[round(float(x), 12) for x in row] for row in self.beta],
            "assignments": [list(a) for a in self.assignments],
            "corpus_fingerprint": self.corpus_fingerprint,
            "doc_ids": list(self.doc_ids),
            "terms": list(self.terms),
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "LdaModel":
        return cls(
            theta=np.asarray(data["theta"], dtype=np.float64),
            beta=np.asarray(data["beta"], dtype=np.float64),
            assignments=tuple(tuple(a) for a in data["assignments"]),
            config=LdaConfig.from_dict(data["config"]),
            corpus_fingerprint=data["corpus_fingerprint"],
            doc_ids=tuple(data["doc_ids"]),
            terms=tuple(data["terms"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "LdaModel":
        return cls.from_dict(json.loads(text))

    def fingerprint(self) -> str:
        return sha256_hex(self.to_json())


@dataclass(frozen=True)
class TopicAssignment:
    """Hard cluster assignment for one document."""

    doc_id: str
    dominant_topic: int
    contribution: float  # the dominant topic's share of the theta row
    top_keywords: tuple[str, ...]


@dataclass(frozen=True)
class KeywordRanking:
    """Ranked terms for a topic; truncated=True means m exceeded V."""

    terms: tuple[str, ...]
    truncated: bool


def fit(corpus: Corpus, config: LdaConfig, sweep_callback=None) -> LdaModel:
    """Run collapsed Gibbs sampling and return the fitted model.

    ``sweep_callback(sweep_index, n_dk, n_kw, n_k, z)``, when given, is
    invoked after every sweep with live count state. It exists for
    diagnostics and tests; mutating the arrays is undefined behavior.
    """
    if config.k is None:
        raise LdaError("config.k is unset; fit requires a concrete topic count")
    tokens, doc_of = corpus.flatten()
    n_tokens = tokens.shape[0]
    if config.k > n_tokens:
        raise LdaError(f"more topics than tokens ({config.k} > {n_tokens})")
    n_docs, k, n_vocab = corpus.n_documents, config.k, corpus.n_vocab

    rng = np.random.default_rng(derive_seed(config.seed, "lda-fit"))
    z = rng.integers(0, k, size=n_tokens).astype(np.int64)
    n_dk, n_kw, n_k = kernels.build_counts(tokens, doc_of, z, n_docs, k, n_vocab)
    doc_prior = np.full(k, config.alpha, dtype=np.float64)
    word_conc_total = n_vocab * config.eta

    acc_dk = np.zeros((n_docs, k), dtype=np.float64)
    acc_kw = np.zeros((k, n_vocab), dtype=np.float64)
    samples = 0
    for sweep in range(config.sweeps):
        uniforms = rng.random(n_tokens)
        kernels.gibbs_sweep(tokens, doc_of, z, n_dk, n_kw, n_k, doc_prior, config.eta, word_conc_total, uniforms)
        if sweep >= config.burn_in:
            acc_dk += n_dk
            acc_kw += n_kw
            samples += 1
        if sweep_callback is not None:
            sweep_callback(sweep, n_dk, n_kw, n_k, z)
    if samples == 0:
        # sweeps == burn_in (or zero sweeps): estimate from the final state.
        acc_dk = n_dk.astype(np.float64)
        acc_kw = n_kw.astype(np.float64)
        samples = 1

    mean_dk = acc_dk / samples
    mean_kw = acc_kw / samples
    doc_len = corpus.doc_lengths().astype(np.float64)
    theta = (mean_dk + config.alpha) / (doc_len[:, None] + k * config.alpha)
    mean_k = mean_kw.sum(axis=1)
    beta = (mean_kw + config.eta) / (mean_k[:, None] + word_conc_total)

    assignments = []
    pos = 0
    for d in corpus.documents:
        assignments.append(tuple(int(t) for t in z[pos : pos + len(d.tokens)]))
        pos += len(d.tokens)

    return LdaModel(
        theta=theta,
        beta=beta,
        assignments=tuple(assignments),
        config=config,
        corpus_fingerprint=corpus.fingerprint(),
        doc_ids=tuple(d.id for d in corpus.documents),
        terms=tuple(corpus.vocabulary.terms),
    )


def top_keywords(model: LdaModel, topic: int, m: int) -> KeywordRanking:
    """The m highest-weight terms of a topic, ties broken by term id."""
    if not (0 <= topic < model.k):
        raise LdaError(f"topic {topic} out of range [0, {model.k})")
    if m < 1:
        raise LdaError(f"keyword count must be >= 1, got {m}")
    row = model.beta[topic]
    # Stable sort on the negated row keeps ascending term-id order on ties.
    order = np.argsort(-row, kind="stable")
    take = min(m, row.shape[0])
    terms = tuple(model.terms[i] for i in order[:take])
    return KeywordRanking(terms=terms, truncated=m > row.shape[0])


def dominant_topics(model: LdaModel, top_m: int = 10) -> list[TopicAssignment]:
    """Hard assignment per document: argmax of theta, ties to the lowest index."""
    winners = np.argmax(model.theta, axis=1)  # first index wins ties
    keyword_cache: dict[int, tuple[str, ...]] = {}
    out = []
    for d, doc_id in enumerate(model.doc_ids):
        k = int(winners[d])
        if k not in keyword_cache:
            keyword_cache[k] = top_keywords(model, k, min(top_m, model.n_vocab)).terms
        out.append(
            TopicAssignment(
                doc_id=doc_id,
                dominant_topic=k,
                contribution=float(model.theta[d, k]),
                top_keywords=keyword_cache[k],
            )
        )
    return out


def effective_topic_count(model: LdaModel) -> int:
    """Number of distinct topics that dominate at least one document."""
    winners = np.argmax(model.theta, axis=1)
    return int(np.unique(winners).shape[0])
