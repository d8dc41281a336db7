"""Model-quality metrics: held-out perplexity, topic coherence, tuning.

Perplexity folds held-out documents into a fitted model (topic-word rows
frozen, only per-document topic counts resampled) and reports
exp(-log_likelihood / token_count). Coherence is the co-occurrence score
over each topic's top words, computed from document frequencies in a
reference corpus; the hyperparameter tuner picks the (alpha, eta) grid
point whose fitted model maximizes aggregate coherence.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .corpus import Corpus
from .lda import LdaConfig, LdaModel, fit, top_keywords
from .util import ToolError, derive_seed


class MetricsError(ToolError):
    """Raised for unusable metric inputs."""


GRID_VALUES = (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
DEFAULT_GRID = tuple((a, e) for a in GRID_VALUES for e in GRID_VALUES)


@dataclass(frozen=True)
class PerplexityResult:
    value: float
    held_out_tokens: int
    log_likelihood: float
    oov_dropped: int  # held-out tokens outside the training vocabulary

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "held_out_tokens": self.held_out_tokens,
            "log_likelihood": self.log_likelihood,
            "oov_dropped": self.oov_dropped,
        }


@dataclass(frozen=True)
class CoherenceResult:
    per_topic: tuple[float, ...]
    aggregate: float  # arithmetic mean of per_topic

    def to_dict(self) -> dict:
        return {"per_topic": list(self.per_topic), "aggregate": self.aggregate}


@dataclass(frozen=True)
class TuningResult:
    alpha: float
    eta: float
    coherence: CoherenceResult
    table: tuple[tuple[float, float, float], ...]  # (alpha, eta, aggregate) per grid point


def perplexity(
    model: LdaModel,
    held_out: Corpus,
    sweeps: int = 50,
    burn_in: int = 25,
    seed: int = 0,
) -> PerplexityResult:
    """Held-out perplexity exp(-log p(tokens)/count) via fold-in estimation.

    Held-out terms are matched to the training vocabulary by string;
    out-of-vocabulary tokens are dropped and counted, never scored.
    Documents are processed in sorted-id order internally, which makes the
    result exactly invariant under held-out document order.
    """
    if burn_in < 0 or sweeps < burn_in:
        raise MetricsError(f"need sweeps >= burn_in >= 0, got sweeps={sweeps} burn_in={burn_in}")
    index = {t: i for i, t in enumerate(model.terms)}
    k = model.k

    token_list: list[int] = []
    doc_of_list: list[int] = []
    doc_lengths: list[int] = []
    oov = 0
    n_kept_docs = 0
    for doc in sorted(held_out.documents, key=lambda d: d.id):
        kept = []
        for t in doc.tokens:
            term = held_out.vocabulary.terms[t]
            w = index.get(term)
            if w is None:
                oov += 1
            else:
                kept.append(w)
        if kept:
            token_list.extend(kept)
            doc_of_list.extend([n_kept_docs] * len(kept))
            doc_lengths.append(len(kept))
            n_kept_docs += 1
    if not token_list:
        raise MetricsError("all held-out tokens are out of vocabulary")

    tokens = np.asarray(token_list, dtype=np.int64)
    doc_of = np.asarray(doc_of_list, dtype=np.int64)
    lengths = np.asarray(doc_lengths, dtype=np.float64)
    n_tokens = tokens.shape[0]
    beta = np.ascontiguousarray(model.beta, dtype=np.float64)
    alpha = model.config.alpha

    rng = np.random.default_rng(derive_seed(seed, "perplexity-foldin"))
    z = rng.integers(0, k, size=n_tokens).astype(np.int64)
    n_dk = np.zeros((n_kept_docs, k), dtype=np.int64)
    np.add.at(n_dk, (doc_of, z), 1)

    acc = np.zeros((n_kept_docs, k), dtype=np.float64)
    samples = 0
    for sweep in range(sweeps):
        uniforms = rng.random(n_tokens)
        kernels.foldin_sweep(tokens, doc_of, z, n_dk, beta, alpha, uniforms)
        if sweep >= burn_in:
            acc += n_dk
            samples += 1
    if samples == 0:
        acc = n_dk.astype(np.float64)
        samples = 1
    theta = (acc / samples + alpha) / (lengths[:, None] + k * alpha)

    # p(token) mixes the frozen topic rows by the folded-in proportions.
    token_probs = np.einsum("ik,ki->i", theta[doc_of], beta[:, tokens])
    log_likelihood = float(np.log(token_probs).sum())
    value = math.exp(-log_likelihood / n_tokens)
    return PerplexityResult(
        value=value,
        held_out_tokens=n_tokens,
        log_likelihood=log_likelihood,
        oov_dropped=oov,
    )


def umass_coherence(model: LdaModel, corpus: Corpus, top_m: int = 10) -> CoherenceResult:
    """Co-occurrence coherence of each topic's top_m words.

    For the ranked top words, every ordered pair (w_i, w_j) with i > j
    contributes log((D(w_i, w_j) + 1) / D(w_j)), where D counts documents
    containing the word(s) in *corpus*.
    """
    if top_m < 2:
        raise MetricsError(f"top_m must be >= 2, got {top_m}")
    doc_sets: dict[str, set[int]] = {}
    for d, doc in enumerate(corpus.documents):
        for t in set(doc.tokens):
            doc_sets.setdefault(corpus.vocabulary.terms[t], set()).add(d)

    per_topic: list[float] = []
    for topic in range(model.k):
        words = top_keywords(model, topic, min(top_m, model.n_vocab)).terms
        score = 0.0
        for i in range(1, len(words)):
            set_i = doc_sets.get(words[i], set())
            for j in range(i):
                set_j = doc_sets.get(words[j], set())
                d_j = len(set_j)
                if d_j == 0:
                    raise MetricsError(
                        f"top word {words[j]!r} of topic {topic} never occurs in the reference corpus"
                    )
                co = len(set_i & set_j)
                score += math.log((co + 1) / d_j)
        per_topic.append(score)
    aggregate = float(sum(per_topic) / len(per_topic))
    return CoherenceResult(per_topic=tuple(per_topic), aggregate=aggregate)


def tune_hyperparams(
    corpus: Corpus,
    k: int,
    grid: tuple[tuple[float, float], ...] = DEFAULT_GRID,
    template: LdaConfig | None = None,
    top_m: int = 10,
    parallelism: int = 1,
) -> TuningResult:
    """Fit one LDA per (alpha, eta) grid point and keep the coherence argmax.

    Every point uses the same seed (from the template) so the comparison
    isolates the hyperparameters. Ties go to the earliest grid point.
    """
    if not grid:
        raise MetricsError("grid must be non-empty")
    for a, e in grid:
        if a <= 0 or e <= 0:
            raise MetricsError(f"grid point ({a}, {e}) has a non-positive concentration")
    if template is None:
        template = LdaConfig()

    def evaluate(point: tuple[float, float]) -> float:
        a, e = point
        model = fit(corpus, replace(template, k=k, alpha=a, eta=e))
        return umass_coherence(model, corpus, top_m=top_m).aggregate

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            scores = list(pool.map(evaluate, grid))
    else:
        scores = [evaluate(p) for p in grid]

    best = max(range(len(grid)), key=lambda i: (scores[i], -i))
    alpha, eta = grid[best]
    best_model = fit(corpus, replace(template, k=k, alpha=alpha, eta=eta))
    coherence = umass_coherence(best_model, corpus, top_m=top_m)
    table = tuple((grid[i][0], grid[i][1], scores[i]) for i in range(len(grid)))
    return TuningResult(alpha=alpha, eta=eta, coherence=coherence, table=table)
