"""Synthetic corpus generation with known ground-truth topic count.

Documents are drawn from the standard generative model: topic-word rows
from a symmetric Dirichlet, per-document topic mixtures from a symmetric
Dirichlet, then each token picks a topic and a word. Terms are synthetic
("w0000", "w0001", ...) and already clean, so the preprocessing pipeline
passes them through unchanged. Used by tests and the `synth` subcommand in
place of private datasets.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document, Provenance, Vocabulary
from .util import ToolError, derive_seed


class SynthError(ToolError):
    """Raised for unusable generator settings."""


@dataclass(frozen=True)
class SynthConfig:
    true_k: int = 8
    n_docs: int = 500
    vocab_size: int = 200
    doc_len: int = 40
    alpha: float = 0.1  # document-topic concentration of the generator
    eta: float = 0.05  # topic-word concentration; small = well-separated topics
    seed: int = 0

    def __post_init__(self):
        if self.true_k < 1:
            raise SynthError(f"true_k must be >= 1, got {self.true_k}")
        if self.n_docs < 1 or self.vocab_size < 1 or self.doc_len < 1:
            raise SynthError("n_docs, vocab_size, and doc_len must all be >= 1")
        if self.alpha <= 0 or self.eta <= 0:
            raise SynthError("generator concentrations must be > 0")


def _term(i: int, width: int) -> str:
    return f"w{i:0{width}d}"


def generate_corpus(config: SynthConfig) -> Corpus:
    """Sample a corpus; ground truth is config.true_k topics."""
    rng = np.random.default_rng(derive_seed(config.seed, "synth"))
    k, v = config.true_k, config.vocab_size

    # Symmetric Dirichlet rows via normalized gammas.
    beta = rng.standard_gamma(config.eta, size=(k, v))
    beta /= beta.sum(axis=1, keepdims=True)
    theta = rng.standard_gamma(config.alpha, size=(config.n_docs, k))
    theta /= theta.sum(axis=1, keepdims=True)

    width = max(4, len(str(v - 1)))
    terms = tuple(_term(i, width) for i in range(v))
    id_width = max(4, len(str(config.n_docs)))
    docs = []
    for d in range(config.n_docs):
        z = rng.choice(k, size=config.doc_len, p=theta[d])
        tokens = tuple(int(rng.choice(v, p=beta[zi])) for zi in z)
        docs.append(Document(id=f"d{d + 1:0{id_width}d}", tokens=tokens))
    prov = Provenance(source=f"synth(true_k={k}, docs={config.n_docs}, seed={config.seed})")
    return Corpus(documents=tuple(docs), vocabulary=Vocabulary(terms=terms), provenance=prov)


def render_csv(corpus: Corpus, id_col: str = "id", text_col: str = "question") -> str:
    """Render a corpus as an ingestible CSV (documents as space-joined terms)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([id_col, text_col])
    terms = corpus.vocabulary.terms
    for doc in corpus.documents:
        writer.writerow([doc.id, " ".join(terms[t] for t in doc.tokens)])
    return buf.getvalue()
