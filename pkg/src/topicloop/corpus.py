"""Corpus ingestion, preprocessing, and subset construction.

Raw question records come in from CSV or blank-line-separated text blocks.
Preprocessing runs a fixed seven-step pipeline (code-keyword tagging,
lowercasing, punctuation stripping, whitespace tokenization, stopword
removal, empty-document dropping, vocabulary construction) and yields an
immutable :class:`Corpus`. Permutation and prefix subsetting produce new
corpora for the experiment harness.
"""

from __future__ import annotations

import csv
import string
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .util import ToolError, canonical_json, read_json, sha256_hex


class CorpusError(ToolError):
    """Raised for unusable input data: bad files, bad columns, empty corpora."""


DEFAULT_CODE_KEYWORDS = ("BigO", "Modulo", "for", "if", "while", "else", "print")

# Common English function words. Words that collide with the default code
# keywords (for, if, while, else) are deliberately absent so that tag tokens
# prepended in step 1 survive stopword removal in step 5.
DEFAULT_STOPWORDS = frozenset(
    """
    a about above after again all am an and any are as at be because been
    before being below between both but by can did do does doing down during
    each few from further had has have having he her here hers him his how i
    in into is it its itself just me more most my no nor not now of off on
    once only or other our ours out over own same she should so some such than
    that the their theirs them then there these they this those through to too
    under until up very was we were what when where which who whom why will
    with would you your yours
    """.split()
)

DEFAULT_PUNCTUATION = string.punctuation


@dataclass(frozen=True)
class PreprocessConfig:
    """Knobs for the cleaning pipeline; all three sets are overridable."""

    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    code_keywords: tuple[str, ...] = DEFAULT_CODE_KEYWORDS
    punctuation: str = DEFAULT_PUNCTUATION

    @classmethod
    def from_dict(cls, data: dict) -> "PreprocessConfig":
        kwargs = {}
        if "stopwords" in data:
            kwargs["stopwords"] = frozenset(data["stopwords"])
        if "code_keywords" in data:
            kwargs["code_keywords"] = tuple(data["code_keywords"])
        if "punctuation" in data:
            kwargs["punctuation"] = str(data["punctuation"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "PreprocessConfig":
        data = read_json(path)
        if not isinstance(data, dict):
            raise CorpusError(f"config file {path}: expected a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class RawRecord:
    """One source row: an id, the question text, and any extra columns."""

    id: str
    text: str
    extras: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Document:
    """A tokenized question: ordered token ids into the shared vocabulary."""

    id: str
    tokens: tuple[int, ...]


@dataclass(frozen=True)
class Vocabulary:
    """Ordered unique terms; ids are dense 0..V-1 in first-occurrence order."""

    terms: tuple[str, ...]

    @cached_property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class Provenance:
    """Where a corpus came from and how it was reshaped."""

    source: str
    permutation_seed: int | None = None
    prefix_length: int | None = None

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "permutation_seed": self.permutation_seed,
            "prefix_length": self.prefix_length,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Provenance":
        return cls(
            source=data["source"],
            permutation_seed=data.get("permutation_seed"),
            prefix_length=data.get("prefix_length"),
        )


@dataclass(frozen=True)
class Corpus:
    """Ordered documents over one shared vocabulary.

    Document order is significant: permutations are distinct corpora.
    Instances are immutable and safe to share between threads.
    """

    documents: tuple[Document, ...]
    vocabulary: Vocabulary
    provenance: Provenance = field(default_factory=lambda: Provenance(source="unknown"))

    def __post_init__(self):
        if not self.documents:
            raise CorpusError("empty corpus")
        v = len(self.vocabulary)
        for doc in self.documents:
            if not doc.tokens:
                raise CorpusError(f"document {doc.id!r} has no tokens")
            for t in doc.tokens:
                if not (0 <= t < v):
                    raise CorpusError(f"document {doc.id!r}: token id {t} outside vocabulary of size {v}")

    @property
    def n_documents(self) -> int:
        return len(self.documents)

    @property
    def n_vocab(self) -> int:
        return len(self.vocabulary)

    @property
    def total_tokens(self) -> int:
        return sum(len(d.tokens) for d in self.documents)

    def flatten(self) -> tuple[np.ndarray, np.ndarray]:
        """Parallel int64 arrays (token ids, owning document index) for the kernels."""
        tokens = np.fromiter(
            (t for d in self.documents for t in d.tokens), dtype=np.int64, count=self.total_tokens
        )
        doc_of = np.fromiter(
            (i for i, d in enumerate(self.documents) for _ in d.tokens), dtype=np.int64, count=self.total_tokens
        )
        return tokens, doc_of

    def doc_lengths(self) -> np.ndarray:
        return np.array([len(d.tokens) for d in self.documents], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance.to_dict(),
            "vocabulary": list(self.vocabulary.terms),
            "documents": [{"id": d.id, "tokens": list(d.tokens)} for d in self.documents],
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Corpus":
        try:
            vocab = Vocabulary(terms=tuple(data["vocabulary"]))
            docs = tuple(Document(id=d["id"], tokens=tuple(d["tokens"])) for d in data["documents"])
            prov = Provenance.from_dict(data["provenance"])
        except (KeyError, TypeError) as exc:
            raise CorpusError(f"malformed corpus snapshot: {exc}") from exc
        return cls(documents=docs, vocabulary=vocab, provenance=prov)

    @classmethod
    def from_json(cls, text: str) -> "Corpus":
        import json

        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"corpus snapshot is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def fingerprint(self) -> str:
        # Content hash over vocabulary + documents only. Provenance is
        # metadata and must not change the identity of the token data.
        payload = {
            "vocabulary": list(self.vocabulary.terms),
            "documents": [{"id": d.id, "tokens": list(d.tokens)} for d in self.documents],
        }
        return sha256_hex(canonical_json(payload))


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def ingest(
    path: str | Path,
    format: str = "csv",
    id_col: str = "id",
    text_col: str = "question",
) -> list[RawRecord]:
    """Read raw records from *path*, preserving file order.

    ``format="csv"`` expects a header row naming *id_col* and *text_col*;
    other columns are carried along in ``extras`` and ignored downstream.
    ``format="text"`` treats the file as blank-line-separated blocks, one
    question per block, with sequential ids ``q1, q2, ...``.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"input file not found: {path}")
    if format == "csv":
        return _ingest_csv(path, id_col, text_col)
    if format == "text":
        return _ingest_text(path)
    raise CorpusError(f"unknown ingest format: {format!r}")


def _ingest_csv(path: Path, id_col: str, text_col: str) -> list[RawRecord]:
    records: list[RawRecord] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise CorpusError(f"{path}: empty file, no CSV header")
        for col in (id_col, text_col):
            if col not in reader.fieldnames:
                raise CorpusError(f"{path}: missing required column {col!r}")
        try:
            for row in reader:
                rownum = reader.line_num
                rec_id = row.get(id_col)
                text = row.get(text_col)
                if rec_id is None or text is None or None in row.values():
                    raise CorpusError(f"{path}: malformed CSV row {rownum}")
                if rec_id == "":
                    raise CorpusError(f"{path}: empty id at row {rownum}")
                if rec_id in seen:
                    raise CorpusError(f"{path}: duplicate id {rec_id!r} at row {rownum}")
                seen.add(rec_id)
                extras = tuple(
                    (k, v) for k, v in row.items() if k not in (id_col, text_col) and k is not None
                )
                records.append(RawRecord(id=rec_id, text=text, extras=extras))
        except csv.Error as exc:
            raise CorpusError(f"{path}: malformed CSV row {reader.line_num}: {exc}") from exc
    return records


def _ingest_text(path: Path) -> list[RawRecord]:
    blocks: list[str] = []
    current: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                current.append(line.strip())
            elif current:
                blocks.append(" ".join(current))
                current = []
    if current:
        blocks.append(" ".join(current))
    return [RawRecord(id=f"q{i + 1}", text=block) for i, block in enumerate(blocks)]


# ---------------------------------------------------------------------------
# preprocessing pipeline
# ---------------------------------------------------------------------------


def _clean_tokens(text: str, config: PreprocessConfig) -> list[str]:
    """Steps 1-5 on a single record's text."""
    # Step 1: code-keyword scan. Case-sensitive whole-token match against the
    # raw text; each matched keyword prepends its lowercased tag once.
    raw_tokens = set(text.split())
    tags = [kw.lower() for kw in config.code_keywords if kw in raw_tokens]
    if tags:
        text = " ".join(tags) + " " + text
    # Step 2: lowercase.
    text = text.lower()
    # Step 3: punctuation characters become spaces (hyphens included).
    if config.punctuation:
        text = text.translate(str.maketrans(config.punctuation, " " * len(config.punctuation)))
    # Step 4: whitespace tokenize.
    tokens = text.split()
    # Step 5: stopword removal.
    return [t for t in tokens if t not in config.stopwords]


def preprocess(
    records: list[RawRecord],
    config: PreprocessConfig | None = None,
    source: str = "records",
) -> Corpus:
    """Apply the seven-step cleaning pipeline and build a corpus."""
    if config is None:
        config = PreprocessConfig()
    kept: list[tuple[str, list[str]]] = []
    for rec in records:
        tokens = _clean_tokens(rec.text, config)
        # Step 6: drop documents that cleaned down to nothing.
        if tokens:
            kept.append((rec.id, tokens))
    if not kept:
        raise CorpusError("empty corpus")
    # Step 7: vocabulary in first-occurrence order, dense ids.
    index: dict[str, int] = {}
    for _, tokens in kept:
        for t in tokens:
            if t not in index:
                index[t] = len(index)
    vocab = Vocabulary(terms=tuple(index.keys()))
    docs = tuple(Document(id=doc_id, tokens=tuple(index[t] for t in tokens)) for doc_id, tokens in kept)
    return Corpus(documents=docs, vocabulary=vocab, provenance=Provenance(source=source))


# ---------------------------------------------------------------------------
# subset construction
# ---------------------------------------------------------------------------


def permute(corpus: Corpus, seed: int) -> Corpus:
    """Deterministic seeded shuffle of document order; vocabulary unchanged."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(corpus.n_documents)
    docs = tuple(corpus.documents[i] for i in order)
    prov = replace(corpus.provenance, permutation_seed=int(seed))
    return Corpus(documents=docs, vocabulary=corpus.vocabulary, provenance=prov)


def prefix(corpus: Corpus, k: int) -> Corpus:
    """First *k* documents in current order, vocabulary rebuilt for the subset."""
    n = corpus.n_documents
    if not (1 <= k <= n):
        raise CorpusError(f"prefix length {k} out of range [1, {n}]")
    prov = replace(corpus.provenance, prefix_length=int(k))
    if k == n:
        # Full-length prefix keeps the corpus intact apart from provenance.
        return Corpus(documents=corpus.documents, vocabulary=corpus.vocabulary, provenance=prov)
    head = corpus.documents[:k]
    # Rebuild the vocabulary so unused terms don't inflate V for the
    # 1/n-style significance thresholds downstream.
    index: dict[str, int] = {}
    old_terms = corpus.vocabulary.terms
    for doc in head:
        for t in doc.tokens:
            term = old_terms[t]
            if term not in index:
                index[term] = len(index)
    vocab = Vocabulary(terms=tuple(index.keys()))
    docs = tuple(
        Document(id=d.id, tokens=tuple(index[old_terms[t]] for t in d.tokens)) for d in head
    )
    return Corpus(documents=docs, vocabulary=vocab, provenance=prov)
