"""Benchmark the compiled sampler kernels against the plain-numpy fallback.

Both implementations consume identical pre-drawn uniform streams from the
same initial state, so besides timing them this script cross-checks that
their final states agree bit for bit.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --docs 1000 --k 128 --sweeps 20
"""

import argparse
import time

import numpy as np

from topicloop import kernels
from topicloop.synth import SynthConfig, generate_corpus


def build_workload(args):
    corpus = generate_corpus(
        SynthConfig(
            true_k=8,
            n_docs=args.docs,
            vocab_size=args.vocab,
            doc_len=args.doc_len,
            seed=args.seed,
        )
    )
    tokens, doc_of = corpus.flatten()
    rng = np.random.default_rng(args.seed)
    z0 = rng.integers(0, args.k, size=tokens.shape[0]).astype(np.int64)
    uniforms = rng.random((args.sweeps, tokens.shape[0]))
    beta = rng.random((args.k, corpus.n_vocab)) + 0.1
    beta /= beta.sum(axis=1, keepdims=True)
    return corpus, tokens, doc_of, z0, uniforms, beta


def run_gibbs(fn, tokens, doc_of, z0, uniforms, k, n_docs, n_vocab):
    z = z0.copy()
    n_dk, n_kw, n_k = kernels.build_counts(tokens, doc_of, z, n_docs, k, n_vocab)
    doc_prior = np.full(k, 0.1)
    start = time.perf_counter()
    for row in uniforms:
        fn(tokens, doc_of, z, n_dk, n_kw, n_k, doc_prior, 0.1, n_vocab * 0.1, row)
    return time.perf_counter() - start, (z, n_dk, n_kw, n_k)


def run_foldin(fn, tokens, doc_of, z0, uniforms, beta, k, n_docs):
    z = z0.copy()
    n_dk = np.zeros((n_docs, k), dtype=np.int64)
    np.add.at(n_dk, (doc_of, z), 1)
    start = time.perf_counter()
    for row in uniforms:
        fn(tokens, doc_of, z, n_dk, beta, 0.1, row)
    return time.perf_counter() - start, (z, n_dk)


def run_antoniak(fn, n_dk, uniforms, k):
    scale = np.full(k, 1.0 / k)
    m = np.zeros(k, dtype=np.int64)
    start = time.perf_counter()
    for row in uniforms:
        m[:] = 0
        fn(n_dk, scale, row, m)
    return time.perf_counter() - start, (m.copy(),)


def states_equal(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--docs", type=int, default=500)
    parser.add_argument("--vocab", type=int, default=200)
    parser.add_argument("--doc-len", type=int, default=40)
    parser.add_argument("--k", type=int, default=64)
    parser.add_argument("--sweeps", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    corpus, tokens, doc_of, z0, uniforms, beta = build_workload(args)
    n_docs, n_vocab = corpus.n_documents, corpus.n_vocab
    print(
        f"workload: {n_docs} docs, {tokens.shape[0]} tokens, vocab {n_vocab}, "
        f"k={args.k}, {args.sweeps} sweeps, best of {args.repeat}"
    )
    if not kernels.NUMBA_ENABLED:
        print("compiled path disabled (TOPICLOOP_NUMBA=0 or numba missing); timing numpy only")

    cases = {
        "gibbs_sweep": lambda fn: run_gibbs(
            fn, tokens, doc_of, z0, uniforms, args.k, n_docs, n_vocab
        ),
        "foldin_sweep": lambda fn: run_foldin(
            fn, tokens, doc_of, z0, uniforms, beta, args.k, n_docs
        ),
    }
    # Antoniak draws run against realistic occupancy: the counts left by a
    # full set of gibbs sweeps rather than the random initial state.
    _, (_, n_dk_final, _, _) = run_gibbs(
        kernels.gibbs_sweep, tokens, doc_of, z0, uniforms, args.k, n_docs, n_vocab
    )
    cases["antoniak_counts"] = lambda fn: run_antoniak(fn, n_dk_final, uniforms, args.k)

    header = f"{'kernel':<18} {'numpy (s)':>10} {'numba (s)':>10} {'speedup':>8}   match"
    print(header)
    print("-" * len(header))
    for name, runner in cases.items():
        numpy_fn = getattr(kernels, f"{name}_numpy")
        numba_fn = getattr(kernels, f"{name}_numba")
        if numba_fn is not None:
            runner(numba_fn)  # one warm-up call so JIT compilation is not timed
        t_numpy, state_numpy = min(
            (runner(numpy_fn) for _ in range(args.repeat)), key=lambda r: r[0]
        )
        if numba_fn is None:
            print(f"{name:<18} {t_numpy:>10.4f} {'-':>10} {'-':>8}   -")
            continue
        t_numba, state_numba = min(
            (runner(numba_fn) for _ in range(args.repeat)), key=lambda r: r[0]
        )
        match = "yes" if states_equal(state_numpy, state_numba) else "NO"
        print(f"{name:<18} {t_numpy:>10.4f} {t_numba:>10.4f} {t_numpy / t_numba:>7.1f}x   {match}")


if __name__ == "__main__":
    main()
