"""Short-text topic clustering toolkit.

Pipeline: preprocess a question corpus, estimate how many topics it needs
with a truncated hierarchical Dirichlet process under escalating
significance thresholds, then recursively re-fit LDA on the effective
topic count until the efficiency ratio reaches exactly 1. Evaluation
metrics (held-out perplexity, co-occurrence coherence), a multi-run
experiment harness, and a CLI round out the package.
"""

from .corpus import (
    Corpus,
    CorpusError,
    Document,
    PreprocessConfig,
    Provenance,
    RawRecord,
    Vocabulary,
    ingest,
    permute,
    prefix,
    preprocess,
)
from .experiments import (
    CellReport,
    ExperimentPlan,
    ExperimentReport,
    emit_histogram_data,
    mean_mode,
    run_plan,
)
from .hdp import Escalation, HdpConfig, HdpEstimate, HdpError, escalate, fit_hdp
from .lda import (
    KeywordRanking,
    LdaConfig,
    LdaError,
    LdaModel,
    TopicAssignment,
    dominant_topics,
    effective_topic_count,
    fit,
    top_keywords,
)
from .metrics import (
    CoherenceResult,
    MetricsError,
    PerplexityResult,
    TuningResult,
    perplexity,
    tune_hyperparams,
    umass_coherence,
)
from .recursion import (
    Outcome,
    RecursionConfig,
    RecursionStep,
    RecursionTrace,
    RecursorError,
    classify_outcome,
    run_recursion,
)
from .synth import SynthConfig, generate_corpus, render_csv
from .util import ToolError

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusError",
    "Document",
    "PreprocessConfig",
    "Provenance",
    "RawRecord",
    "Vocabulary",
    "ingest",
    "permute",
    "prefix",
    "preprocess",
    "CellReport",
    "ExperimentPlan",
    "ExperimentReport",
    "emit_histogram_data",
    "mean_mode",
    "run_plan",
    "Escalation",
    "HdpConfig",
    "HdpEstimate",
    "HdpError",
    "escalate",
    "fit_hdp",
    "KeywordRanking",
    "LdaConfig",
    "LdaError",
    "LdaModel",
    "TopicAssignment",
    "dominant_topics",
    "effective_topic_count",
    "fit",
    "top_keywords",
    "CoherenceResult",
    "MetricsError",
    "PerplexityResult",
    "TuningResult",
    "perplexity",
    "tune_hyperparams",
    "umass_coherence",
    "Outcome",
    "RecursionConfig",
    "RecursionStep",
    "RecursionTrace",
    "RecursorError",
    "classify_outcome",
    "run_recursion",
    "SynthConfig",
    "generate_corpus",
    "render_csv",
    "ToolError",
    "__version__",
]
