"""Command-line entry point for the whole pipeline.

Subcommands map one-to-one onto the library modules: synth, preprocess,
permute, hdp, fit, recurse, tune, perplexity, experiment, export-clusters.
Exit codes: 0 success, 1 usage error, 2 data error, 3 a recursion that
ended in a failure outcome (distinct so scripts can detect it). All
artifacts land under --output-dir with deterministic names; --seed fully
determines every stochastic output.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from . import metrics, synth
from .corpus import Corpus, CorpusError, PreprocessConfig, ingest, permute, prefix, preprocess
from .hdp import HdpConfig, HdpEstimate, fit_hdp
from .lda import LdaConfig, LdaModel, dominant_topics, effective_topic_count, fit
from .recursion import RecursionConfig, run_recursion
from .util import ToolError, write_text

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RECURSION_FAILURE = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors by default; the contract here
    # reserves 2 for data errors, so usage problems must exit 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_corpus(path: str) -> Corpus:
    p = Path(path)
    if not p.exists():
        raise CorpusError(f"corpus file not found: {p}")
    return Corpus.from_json(p.read_text(encoding="utf-8"))


def _load_model(path: str) -> LdaModel:
    p = Path(path)
    if not p.exists():
        raise ToolError(f"model file not found: {p}")
    return LdaModel.from_json(p.read_text(encoding="utf-8"))


def _out(args) -> Path:
    return Path(args.output_dir)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        true_k=args.true_k,
        n_docs=args.docs,
        vocab_size=args.vocab,
        doc_len=args.doc_len,
        alpha=args.alpha,
        eta=args.eta,
        seed=args.seed,
    )
    corpus = synth.generate_corpus(cfg)
    path = write_text(_out(args) / "synthetic_questions.csv", synth.render_csv(corpus))
    print(f"wrote {corpus.n_documents} synthetic questions (true k={cfg.true_k}) to {path}")
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    pp = PreprocessConfig.from_file(args.config) if args.config else PreprocessConfig()
    records = ingest(args.input, format=args.format, id_col=args.id_col, text_col=args.text_col)
    corpus = preprocess(records, pp, source=str(args.input))
    path = write_text(_out(args) / "corpus.json", corpus.to_json())
    print(
        f"wrote corpus: {corpus.n_documents} documents, vocabulary {corpus.n_vocab}, "
        f"{corpus.total_tokens} tokens -> {path}"
    )
    return EXIT_OK


def _cmd_permute(args) -> int:
    corpus = _load_corpus(args.corpus)
    shuffled = permute(corpus, args.seed)
    path = write_text(_out(args) / f"corpus_perm{args.seed}.json", shuffled.to_json())
    print(f"wrote permuted corpus (seed {args.seed}) to {path}")
    return EXIT_OK


def _cmd_hdp(args) -> int:
    corpus = _load_corpus(args.corpus)
    if args.prefix is not None:
        corpus = prefix(corpus, args.prefix)
    cfg = HdpConfig(
        gamma=args.gamma,
        eta_doc=args.eta_doc,
        beta_prior=args.beta_prior,
        truncation=args.truncation,
        sweeps=args.sweeps,
        burn_in=args.burn_in,
        seed=args.seed,
    )
    estimate = fit_hdp(corpus, cfg, refit_escalation=args.refit_escalation)
    path = write_text(_out(args) / "hdp_estimate.json", estimate.to_json())
    print(f"hdp1={estimate.hdp1} hdp2={estimate.hdp2} hdp3={estimate.hdp3} -> {path}")
    return EXIT_OK


def _lda_config_from(args, k=None) -> LdaConfig:
    return LdaConfig(
        k=k, alpha=args.alpha, eta=args.eta, sweeps=args.sweeps, burn_in=args.burn_in, seed=args.seed
    )


def _cmd_fit(args) -> int:
    corpus = _load_corpus(args.corpus)
    model = fit(corpus, _lda_config_from(args, k=args.k))
    path = write_text(_out(args) / "lda_model.json", model.to_json())
    print(f"fitted k={args.k}, effective topics {effective_topic_count(model)} -> {path}")
    return EXIT_OK


def _resolve_init_k(args, corpus: Corpus) -> int:
    spec = args.init_k
    if spec not in ("hdp1", "hdp2"):
        try:
            k = int(spec)
        except ValueError:
            raise ToolError(f"--init-k must be an integer, 'hdp1', or 'hdp2', got {spec!r}")
        return k
    if args.hdp_estimate:
        est = HdpEstimate.from_json(Path(args.hdp_estimate).read_text(encoding="utf-8"))
    else:
        est = fit_hdp(corpus, HdpConfig(seed=args.seed))
    return est.hdp1 if spec == "hdp1" else est.hdp2


def _cmd_recurse(args) -> int:
    corpus = _load_corpus(args.corpus)
    initial_k = _resolve_init_k(args, corpus)
    cfg = RecursionConfig(
        max_ratio_drop=args.max_ratio_drop,
        max_decline_run=args.max_decline_run,
        max_steps=args.max_steps,
        lda_template=_lda_config_from(args),
        base_seed=args.seed,
    )
    trace = run_recursion(corpus, cfg, initial_k)
    trace_path = write_text(_out(args) / "recursion_trace.jsonl", trace.to_jsonl())
    print(f"outcome {trace.outcome.value} after {len(trace.steps)} steps, final k={trace.final_k}")
    print(f"trace -> {trace_path}")
    if trace.final_model is not None:
        model_path = write_text(_out(args) / "recursion_final_model.json", trace.final_model.to_json())
        print(f"final model -> {model_path}")
    return EXIT_RECURSION_FAILURE if trace.outcome.is_failure else EXIT_OK


def _cmd_tune(args) -> int:
    corpus = _load_corpus(args.corpus)
    grid = metrics.DEFAULT_GRID
    if args.grid_values:
        values = tuple(float(v) for v in args.grid_values.split(","))
        grid = tuple((a, e) for a in values for e in values)
    template = LdaConfig(sweeps=args.sweeps, burn_in=args.burn_in, seed=args.seed)
    result = metrics.tune_hyperparams(
        corpus, args.k, grid=grid, template=template, top_m=args.top_m, parallelism=args.parallelism
    )
    lines = ["alpha,eta,aggregate_coherence"]
    for a, e, score in result.table:
        lines.append(f"{a},{e},{score:.6f}")
    csv_path = write_text(_out(args) / "tuning.csv", "\n".join(lines) + "\n")
    best = {"alpha": result.alpha, "eta": result.eta, "aggregate_coherence": result.coherence.aggregate}
    from .util import canonical_json

    best_path = write_text(_out(args) / "tuning_best.json", canonical_json(best))
    print(f"best alpha={result.alpha} eta={result.eta} coherence={result.coherence.aggregate:.6f}")
    print(f"grid -> {csv_path}, best -> {best_path}")
    return EXIT_OK


def _cmd_perplexity(args) -> int:
    model = _load_model(args.model)
    held_out = _load_corpus(args.held_out)
    result = metrics.perplexity(model, held_out, sweeps=args.sweeps, burn_in=args.burn_in, seed=args.seed)
    from .util import canonical_json

    path = write_text(_out(args) / "perplexity.json", canonical_json(result.to_dict()))
    print(
        f"perplexity {result.value:.6f} over {result.held_out_tokens} tokens "
        f"({result.oov_dropped} OOV dropped) -> {path}"
    )
    return EXIT_OK


def _cmd_experiment(args) -> int:
    plan_path = Path(args.plan)
    if not plan_path.exists():
        raise ToolError(f"plan file not found: {plan_path}")
    plan = ex.ExperimentPlan.from_json(plan_path.read_text(encoding="utf-8"))
    source = Path(plan.corpus_source)
    if not source.is_absolute():
        # Relative corpus paths are anchored at the plan file, so plans are
        # portable alongside their data.
        source = plan_path.parent / source
    corpus = _load_corpus(str(source))
    report = ex.run_plan(corpus, plan, parallelism=args.parallelism)
    out_dir = _out(args)
    report_path = write_text(out_dir / "experiment_report.json", ex.report_to_json(report))
    csv_paths = ex.write_report_csvs(report, out_dir)
    print(f"ran {len(report.cells)} cells, {len(report.failed_cells)} failed -> {report_path}")
    for p in csv_paths:
        print(f"csv -> {p}")
    return EXIT_OK


def _cmd_export_clusters(args) -> int:
    model = _load_model(args.model)
    assignments = dominant_topics(model, top_m=args.top_m)
    lines = ["doc_id,dominant_topic,contribution,keywords"]
    for a in assignments:
        lines.append(f"{a.doc_id},{a.dominant_topic},{a.contribution:.6f},{'|'.join(a.top_keywords)}")
    path = write_text(_out(args) / "clusters.csv", "\n".join(lines) + "\n")
    print(f"wrote {len(assignments)} cluster assignments -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser construction
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base RNG seed (default 0)")
    common.add_argument("--config", default=None, help="JSON config file (preprocess settings)")
    common.add_argument("--output-dir", default=".", help="directory for artifacts (default .)")
    common.add_argument("--parallelism", type=int, default=1, help="worker threads where supported")

    parser = _Parser(prog="topicloop", description="Short-text topic clustering pipeline")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus CSV")
    p.add_argument("--true-k", type=int, default=8)
    p.add_argument("--docs", type=int, default=500)
    p.add_argument("--vocab", type=int, default=200)
    p.add_argument("--doc-len", type=int, default=40)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.05)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("preprocess", parents=[common], help="ingest and clean raw questions")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["csv", "text"], default="csv")
    p.add_argument("--id-col", default="id")
    p.add_argument("--text-col", default="question")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("permute", parents=[common], help="shuffle document order with a seed")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=_cmd_permute)

    p = sub.add_parser("hdp", parents=[common], help="estimate topic counts hdp1/hdp2/hdp3")
    p.add_argument("--corpus", required=True)
    p.add_argument("--prefix", type=int, default=None, help="use only the first N documents")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--eta-doc", type=float, default=1.0)
    p.add_argument("--beta-prior", type=float, default=0.1)
    p.add_argument("--truncation", type=int, default=None)
    p.add_argument("--sweeps", type=int, default=100)
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--refit-escalation", action="store_true")
    p.set_defaults(func=_cmd_hdp)

    p = sub.add_parser("fit", parents=[common], help="fit LDA with a fixed topic count")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--burn-in", type=int, default=100)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("recurse", parents=[common], help="recursive refinement to the effective count")
    p.add_argument("--corpus", required=True)
    p.add_argument("--init-k", required=True, help="integer, 'hdp1', or 'hdp2'")
    p.add_argument("--hdp-estimate", default=None, help="reuse a saved estimate for --init-k hdp1/hdp2")
    p.add_argument("--max-ratio-drop", type=float, default=0.2)
    p.add_argument("--max-decline-run", type=int, default=3)
    p.add_argument("--max-steps", type=int, default=50)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--burn-in", type=int, default=100)
    p.set_defaults(func=_cmd_recurse)

    p = sub.add_parser("tune", parents=[common], help="coherence grid search over alpha/eta")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--grid-values", default=None, help="comma-separated values for both axes")
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--top-m", type=int, default=10)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("perplexity", parents=[common], help="held-out perplexity of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--held-out", required=True)
    p.add_argument("--sweeps", type=int, default=50)
    p.add_argument("--burn-in", type=int, default=25)
    p.set_defaults(func=_cmd_perplexity)

    p = sub.add_parser("experiment", parents=[common], help="run a multi-cell experiment plan")
    p.add_argument("--plan", required=True)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("export-clusters", parents=[common], help="dominant topics and keywords as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--top-m", type=int, default=10)
    p.set_defaults(func=_cmd_export_clusters)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ToolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
