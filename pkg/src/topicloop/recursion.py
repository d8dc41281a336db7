"""Recursive LDA refinement driven by the efficiency ratio.

Each step fits LDA with the current topic count K, measures how many topics
actually dominate at least one document, and feeds that effective count back
in as the next K. The loop succeeds when effective equals specified (ratio
exactly 1, integer equality). Three guards bound the loop: a maximum
single-step drop in the ratio, a maximum run of consecutive strictly
decreasing ratios, and an absolute step cap. Guard arithmetic uses exact
rationals; floats are display-only.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .corpus import Corpus
from .lda import LdaConfig, LdaModel, effective_topic_count, fit
from .util import ToolError, canonical_json, derive_seed, sha256_hex


class RecursorError(ToolError):
    """Raised for invalid inputs or internally inconsistent traces."""


class Outcome(enum.Enum):
    SUCCESS = "Success"
    FAILURE_RATIO_DROP = "FailureRatioDrop"
    FAILURE_STEADY_DECREASE = "FailureSteadyDecrease"
    FAILURE_STEP_CAP = "FailureStepCap"

    @property
    def is_failure(self) -> bool:
        return self is not Outcome.SUCCESS


@dataclass(frozen=True)
class RecursionConfig:
    """Guard parameters and the LDA template for one recursion.

    ``max_ratio_drop``: largest tolerated single-step decrease of the
    efficiency ratio. ``max_decline_run``: largest tolerated count of
    consecutive strictly decreasing steps. ``max_steps``: absolute cap.
    ``lda_template`` must leave ``k`` unset; each step fills it and a seed
    derived from ``base_seed`` and the step index.
    """

    max_ratio_drop: float = 0.2
    max_decline_run: int = 3
    max_steps: int = 50
    lda_template: LdaConfig = field(default_factory=LdaConfig)
    base_seed: int = 0

    def __post_init__(self):
        if not (0 < self.max_ratio_drop <= 1):
            raise RecursorError(f"max_ratio_drop must be in (0, 1], got {self.max_ratio_drop}")
        if self.max_decline_run < 1:
            raise RecursorError(f"max_decline_run must be >= 1, got {self.max_decline_run}")
        if self.max_steps < 1:
            raise RecursorError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.lda_template.k is not None:
            raise RecursorError("lda_template must leave k unset; the recursion assigns it per step")

    def to_dict(self) -> dict:
        return {
            "max_ratio_drop": self.max_ratio_drop,
            "max_decline_run": self.max_decline_run,
            "max_steps": self.max_steps,
            "lda_template": self.lda_template.to_dict(),
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RecursionConfig":
        return cls(
            max_ratio_drop=data.get("max_ratio_drop", 0.2),
            max_decline_run=data.get("max_decline_run", 3),
            max_steps=data.get("max_steps", 50),
            lda_template=LdaConfig.from_dict(data.get("lda_template", {})),
            base_seed=data.get("base_seed", 0),
        )


@dataclass(frozen=True)
class RecursionStep:
    """One fit: the specified K, the effective count, and their exact ratio."""

    step_index: int
    k_specified: int
    k_effective: int
    ratio_numerator: int
    ratio_denominator: int
    efficiency_ratio: float
    model_fingerprint: str

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.ratio_numerator, self.ratio_denominator)

    def to_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "k_specified": self.k_specified,
            "k_effective": self.k_effective,
            "ratio_numerator": self.ratio_numerator,
            "ratio_denominator": self.ratio_denominator,
            "efficiency_ratio": round(self.efficiency_ratio, 12),
            "model_fingerprint": self.model_fingerprint,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RecursionStep":
        return cls(
            step_index=data["step_index"],
            k_specified=data["k_specified"],
            k_effective=data["k_effective"],
            ratio_numerator=data["ratio_numerator"],
            ratio_denominator=data["ratio_denominator"],
            efficiency_ratio=data["efficiency_ratio"],
            model_fingerprint=data["model_fingerprint"],
        )


@dataclass(frozen=True)
class RecursionTrace:
    """Ordered steps plus the terminal outcome; final model kept on success."""

    steps: tuple[RecursionStep, ...]
    outcome: Outcome
    config: RecursionConfig
    final_model: LdaModel | None = None

    @property
    def final_k(self) -> int:
        return self.steps[-1].k_effective

    def to_jsonl(self) -> str:
        """One JSON line per step, then a terminal outcome record."""
        lines = [canonical_json(s.to_dict()) for s in self.steps]
        lines.append(
            canonical_json(
                {
                    "outcome": self.outcome.value,
                    "n_steps": len(self.steps),
                    "final_k": self.final_k,
                    "config": self.config.to_dict(),
                }
            )
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "RecursionTrace":
        """Rebuild a trace from its line stream. Models are not in the
        stream, so ``final_model`` is always None on the loaded trace."""
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if len(lines) < 2:
            raise RecursorError("trace stream needs at least one step and a terminal record")
        try:
            records = [json.loads(ln) for ln in lines]
        except json.JSONDecodeError as exc:
            raise RecursorError(f"trace stream is not valid JSON lines: {exc}") from exc
        terminal = records[-1]
        if "outcome" not in terminal:
            raise RecursorError("trace stream missing terminal outcome record")
        steps = tuple(RecursionStep.from_dict(r) for r in records[:-1])
        if terminal.get("n_steps") != len(steps):
            raise RecursorError(
                f"terminal record claims {terminal.get('n_steps')} steps, stream has {len(steps)}"
            )
        return cls(
            steps=steps,
            outcome=Outcome(terminal["outcome"]),
            config=RecursionConfig.from_dict(terminal["config"]),
            final_model=None,
        )


def _first_exit(pairs: list[tuple[int, int]], config: RecursionConfig) -> tuple[Outcome | None, int]:
    """Walk (k_specified, k_effective) pairs through the guard state machine.

    Returns (outcome, index of the step where the loop exits), or
    (None, len(pairs)) when no exit condition has fired yet. Exact rational
    arithmetic throughout; the drop limit is the exact binary value of the
    configured float.
    """
    drop_limit = Fraction(config.max_ratio_drop)
    prev: Fraction | None = None
    decline_run = 0
    for i, (k_spec, k_eff) in enumerate(pairs):
        ratio = Fraction(k_eff, k_spec)
        if prev is not None:
            decline_run = decline_run + 1 if ratio < prev else 0
        if ratio == 1:
            return Outcome.SUCCESS, i
        if prev is not None and prev - ratio > drop_limit:
            return Outcome.FAILURE_RATIO_DROP, i
        if decline_run > config.max_decline_run:
            return Outcome.FAILURE_STEADY_DECREASE, i
        if i + 1 == config.max_steps:
            return Outcome.FAILURE_STEP_CAP, i
        prev = ratio
    return None, len(pairs)


def run_recursion(
    corpus: Corpus | None,
    config: RecursionConfig,
    initial_k: int,
    step_fn=None,
) -> RecursionTrace:
    """Run the refinement loop from ``initial_k`` until an exit fires.

    ``step_fn(step_index, k_specified, seed)`` may replace the real fitter;
    it must return ``(k_effective, model_or_None)``. The default fits LDA
    from ``config.lda_template`` on *corpus* and measures the dominant-topic
    count. Per-step seeds derive from ``config.base_seed`` and the step
    index, so a whole trace reproduces from one number.
    """
    if initial_k < 1:
        raise RecursorError(f"initial topic count must be >= 1, got {initial_k}")
    if step_fn is None:
        if corpus is None:
            raise RecursorError("corpus is required when no step_fn is given")

        def step_fn(step_index: int, k_specified: int, seed: int):
            model = fit(corpus, replace(config.lda_template, k=k_specified, seed=seed))
            return effective_topic_count(model), model

    steps: list[RecursionStep] = []
    pairs: list[tuple[int, int]] = []
    k = initial_k
    final_model: LdaModel | None = None
    while True:
        idx = len(steps)
        seed = derive_seed(config.base_seed, "recursion-step", idx)
        k_eff, model = step_fn(idx, k, seed)
        k_eff = int(k_eff)
        if not (1 <= k_eff <= k):
            raise RecursorError(f"step {idx}: effective count {k_eff} outside [1, {k}]")
        ratio = Fraction(k_eff, k)
        if model is not None:
            fingerprint = model.fingerprint()
        else:
            fingerprint = sha256_hex(f"scripted-step:{idx}:{k}->{k_eff}")
        steps.append(
            RecursionStep(
                step_index=idx,
                k_specified=k,
                k_effective=k_eff,
                ratio_numerator=ratio.numerator,
                ratio_denominator=ratio.denominator,
                efficiency_ratio=float(ratio),
                model_fingerprint=fingerprint,
            )
        )
        pairs.append((k, k_eff))
        outcome, exit_idx = _first_exit(pairs, config)
        if outcome is not None:
            if exit_idx != idx:  # the machine can only fire on the newest step
                raise RecursorError(f"guard fired at step {exit_idx}, expected {idx}")
            if outcome is Outcome.SUCCESS:
                final_model = model
            return RecursionTrace(steps=tuple(steps), outcome=outcome, config=config, final_model=final_model)
        k = k_eff


def classify_outcome(trace: RecursionTrace) -> Outcome:
    """Re-derive the outcome from the step list alone.

    Cross-checks the stored outcome: validates the chaining invariant
    (k_specified of step t+1 equals k_effective of step t), per-step bounds,
    and that the guards fire exactly at the final step.
    """
    if not trace.steps:
        raise RecursorError("empty trace")
    pairs: list[tuple[int, int]] = []
    prev_eff: int | None = None
    for step in trace.steps:
        if not (1 <= step.k_effective <= step.k_specified):
            raise RecursorError(
                f"step {step.step_index}: effective {step.k_effective} outside [1, {step.k_specified}]"
            )
        if prev_eff is not None and step.k_specified != prev_eff:
            raise RecursorError(
                f"step {step.step_index}: k_specified {step.k_specified} breaks the chain "
                f"(previous effective count was {prev_eff})"
            )
        expected = Fraction(step.k_effective, step.k_specified)
        if Fraction(step.ratio_numerator, step.ratio_denominator) != expected:
            raise RecursorError(f"step {step.step_index}: stored ratio disagrees with counts")
        pairs.append((step.k_specified, step.k_effective))
        prev_eff = step.k_effective
    outcome, exit_idx = _first_exit(pairs, trace.config)
    if outcome is None:
        raise RecursorError("trace ends without any exit condition firing")
    if exit_idx != len(pairs) - 1:
        raise RecursorError(f"exit condition fires at step {exit_idx}, but trace has {len(pairs)} steps")
    return outcome
