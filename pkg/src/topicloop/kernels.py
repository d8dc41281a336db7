"""Hot sampling kernels with a numba fast path and a pure-numpy fallback.

Every kernel exists twice:

* a plain-loop version compiled with ``@njit(cache=True, nogil=True)``
* a numpy version that keeps the token loop in Python but vectorizes the
  per-topic work

Both consume the same pre-drawn uniform stream and are written so the
floating-point operations happen in the same order, which makes their
outputs bit-identical. Setting ``TOPICLOOP_NUMBA=0`` (or running without
numba installed) selects the numpy path; the module-level names
``gibbs_sweep``, ``antoniak_counts`` and ``foldin_sweep`` always point at
the active implementation. ``benchmarks/bench_kernels.py`` times the two
paths against each other.

State layout shared by all kernels: a corpus is flattened to parallel
int64 arrays ``tokens`` (vocabulary ids) and ``doc_of`` (document index
per token). Count matrices are int64: ``n_dk`` (docs x topics), ``n_kw``
(topics x vocab), ``n_k`` (topics). All kernels mutate counts and the
assignment vector ``z`` in place.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "TOPICLOOP_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_ENV_FLAG, "1").strip().lower() not in ("0", "false", "off")


# ---------------------------------------------------------------------------
# loop bodies (compiled with numba when available)
# ---------------------------------------------------------------------------


def _gibbs_sweep_loop(tokens, doc_of, z, n_dk, n_kw, n_k, doc_prior, word_conc, word_conc_total, uniforms):
    # One full collapsed-Gibbs pass. For token i in document d currently
    # holding word w: remove it from the counts, then resample its topic from
    #   p(k) ~ (n_dk[d,k] + doc_prior[k]) * (n_kw[k,w] + word_conc)
    #                                      / (n_k[k] + word_conc_total)
    # doc_prior is a per-topic vector: a constant alpha for flat-prior LDA,
    # or concentration * top-level weights for the hierarchical model.
    n_topics = n_k.shape[0]
    probs = np.empty(n_topics, dtype=np.float64)
    for i in range(tokens.shape[0]):
        w = tokens[i]
        d = doc_of[i]
        k = z[i]
        n_dk[d, k] -= 1
        n_kw[k, w] -= 1
        n_k[k] -= 1
        total = 0.0
        for j in range(n_topics):
            p = (n_dk[d, j] + doc_prior[j]) * (n_kw[j, w] + word_conc) / (n_k[j] + word_conc_total)
            probs[j] = p
            total += p
        if total > 0.0:
            r = uniforms[i] * total
            k_new = n_topics - 1
            acc = 0.0
            for j in range(n_topics):
                acc += probs[j]
                if r < acc:
                    k_new = j
                    break
        else:
            k_new = k
        z[i] = k_new
        n_dk[d, k_new] += 1
        n_kw[k_new, w] += 1
        n_k[k_new] += 1


def _foldin_sweep_loop(tokens, doc_of, z, n_dk, beta_kw, doc_conc, uniforms):
    # Fold-in pass for held-out documents: topic-word rows are frozen at
    # beta_kw, only the per-document topic counts move.
    n_topics = n_dk.shape[1]
    probs = np.empty(n_topics, dtype=np.float64)
    for i in range(tokens.shape[0]):
        w = tokens[i]
        d = doc_of[i]
        k = z[i]
        n_dk[d, k] -= 1
        total = 0.0
        for j in range(n_topics):
            p = (n_dk[d, j] + doc_conc) * beta_kw[j, w]
            probs[j] = p
            total += p
        if total > 0.0:
            r = uniforms[i] * total
            k_new = n_topics - 1
            acc = 0.0
            for j in range(n_topics):
                acc += probs[j]
                if r < acc:
                    k_new = j
                    break
        else:
            k_new = k
        z[i] = k_new
        n_dk[d, k_new] += 1


def _antoniak_counts_loop(n_dk, scale, uniforms, m_out):
    # Auxiliary table counts for the hierarchical model: for every cell with
    # c assigned tokens and concentration a = scale[k], draw
    #   m = sum_{i=0}^{c-1} Bernoulli(a / (a + i))
    # and add it to m_out[k]. Consumes exactly one uniform per token so the
    # stream stays aligned across implementations. Returns uniforms consumed.
    ptr = 0
    for d in range(n_dk.shape[0]):
        for k in range(n_dk.shape[1]):
            c = n_dk[d, k]
            if c <= 0:
                continue
            a = scale[k]
            if a <= 0.0:
                ptr += c
                continue
            m = 0
            for i in range(c):
                if uniforms[ptr + i] < a / (a + i):
                    m += 1
            ptr += c
            m_out[k] += m
    return ptr


# ---------------------------------------------------------------------------
# numpy fallback (token loop in Python, topic axis vectorized)
# ---------------------------------------------------------------------------


def _gibbs_sweep_numpy(tokens, doc_of, z, n_dk, n_kw, n_k, doc_prior, word_conc, word_conc_total, uniforms):
    n_topics = n_k.shape[0]
    for i in range(tokens.shape[0]):
        w = tokens[i]
        d = doc_of[i]
        k = z[i]
        n_dk[d, k] -= 1
        n_kw[k, w] -= 1
        n_k[k] -= 1
        probs = (n_dk[d] + doc_prior) * (n_kw[:, w] + word_conc) / (n_k + word_conc_total)
        cum = np.cumsum(probs)
        if cum[-1] > 0.0:
            r = uniforms[i] * cum[-1]
            k_new = int(np.searchsorted(cum, r, side="right"))
            if k_new >= n_topics:
                k_new = n_topics - 1
        else:
            k_new = int(k)
        z[i] = k_new
        n_dk[d, k_new] += 1
        n_kw[k_new, w] += 1
        n_k[k_new] += 1


def _foldin_sweep_numpy(tokens, doc_of, z, n_dk, beta_kw, doc_conc, uniforms):
    n_topics = n_dk.shape[1]
    for i in range(tokens.shape[0]):
        w = tokens[i]
        d = doc_of[i]
        k = z[i]
        n_dk[d, k] -= 1
        probs = (n_dk[d] + doc_conc) * beta_kw[:, w]
        cum = np.cumsum(probs)
        if cum[-1] > 0.0:
            r = uniforms[i] * cum[-1]
            k_new = int(np.searchsorted(cum, r, side="right"))
            if k_new >= n_topics:
                k_new = n_topics - 1
        else:
            k_new = int(k)
        z[i] = k_new
        n_dk[d, k_new] += 1


def _antoniak_counts_numpy(n_dk, scale, uniforms, m_out):
    ptr = 0
    for d in range(n_dk.shape[0]):
        row = n_dk[d]
        for k in np.nonzero(row > 0)[0]:
            c = int(row[k])
            a = scale[k]
            if a <= 0.0:
                ptr += c
                continue
            u = uniforms[ptr : ptr + c]
            m_out[k] += int(np.count_nonzero(u < a / (a + np.arange(c))))
            ptr += c
    return ptr


# ---------------------------------------------------------------------------
# shared helpers (cheap, always numpy)
# ---------------------------------------------------------------------------


def build_counts(tokens, doc_of, z, n_docs: int, n_topics: int, n_vocab: int):
    """Count matrices for an assignment vector: (n_dk, n_kw, n_k)."""
    n_dk = np.zeros((n_docs, n_topics), dtype=np.int64)
    n_kw = np.zeros((n_topics, n_vocab), dtype=np.int64)
    np.add.at(n_dk, (doc_of, z), 1)
    np.add.at(n_kw, (z, tokens), 1)
    return n_dk, n_kw, n_kw.sum(axis=1)


# ---------------------------------------------------------------------------
# implementation selection
# ---------------------------------------------------------------------------

NUMBA_ENABLED = False
gibbs_sweep_numba = None
foldin_sweep_numba = None
antoniak_counts_numba = None

if _numba_requested():
    try:
        from numba import njit
    except ImportError:
        pass
    else:
        _jit = njit(cache=True, nogil=True)
        gibbs_sweep_numba = _jit(_gibbs_sweep_loop)
        foldin_sweep_numba = _jit(_foldin_sweep_loop)
        antoniak_counts_numba = _jit(_antoniak_counts_loop)
        NUMBA_ENABLED = True

gibbs_sweep_numpy = _gibbs_sweep_numpy
foldin_sweep_numpy = _foldin_sweep_numpy
antoniak_counts_numpy = _antoniak_counts_numpy

if NUMBA_ENABLED:
    gibbs_sweep = gibbs_sweep_numba
    foldin_sweep = foldin_sweep_numba
    antoniak_counts = antoniak_counts_numba
else:
    gibbs_sweep = gibbs_sweep_numpy
    foldin_sweep = foldin_sweep_numpy
    antoniak_counts = antoniak_counts_numpy
