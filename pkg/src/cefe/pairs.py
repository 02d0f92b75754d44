"""Binary training corpora for fine-grained error types.

Two constructions are supported:

* Wrong-Correct: an erroneous sentence (label 1) against its own correction
  (label 0).
* Variant-Error: sentences carrying the target error (label 1) against
  sentences carrying other error types (label 0), sampled to a 1:1 ratio.

Each example is a single-text classification row; ``text_b`` stays empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptyPool, SchemaError
from .types import MISORDER, REDUNDANCY_OTHER

# CLI aliases for the two fine-grained targets
TARGET_ALIASES = {"misorder": MISORDER, "redu-other": REDUNDANCY_OTHER}


class Strategy(str, Enum):
    WrongCorrect = "WrongCorrect"
    VariantError = "VariantError"


@dataclass(frozen=True)
class PairExample:
    text_a: str
    label: int
    strategy: Strategy
    target_fine: str
    text_b: str | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise SchemaError(f"label must be 0 or 1, got {self.label!r}")

    def to_record(self) -> dict:
        return {
            "text_a": self.text_a,
            "text_b": self.text_b,
            "label": self.label,
            "strategy": self.strategy.value,
            "target_fine": self.target_fine,
        }


@dataclass
class PairBuild:
    examples: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def counts(self) -> dict:
        pos = sum(e.label for e in self.examples)
        return {"0": len(self.examples) - pos, "1": pos}

    def report(self) -> dict:
        return {"counts": self.counts(), "skipped": self.skipped}


def _get(pair, key):
    if isinstance(pair, dict):
        return pair.get(key)
    return getattr(pair, key, None)


def build_wrong_correct(pairs, target_fine: str) -> PairBuild:
    """Emit (wrong, 1) and (correct, 0) for every usable pair.

    Pairs with a missing side, identical sides, or a text that already
    appeared under the opposite label are skipped and reported, so the
    result stays exactly balanced and free of label conflicts.
    """
    out = PairBuild()
    positives, negatives = set(), set()
    for i, pair in enumerate(pairs):
        wrong, correct = _get(pair, "wrong"), _get(pair, "correct")
        reason = None
        if not wrong or not correct:
            reason = "missing counterpart"
        elif wrong == correct:
            reason = "wrong equals correct"
        elif wrong in negatives or correct in positives:
            reason = "label conflict"
        if reason:
            out.skipped.append({"index": i, "reason": reason})
            continue
        positives.add(wrong)
        negatives.add(correct)
        out.examples.append(PairExample(wrong, 1, Strategy.WrongCorrect, target_fine))
        out.examples.append(PairExample(correct, 0, Strategy.WrongCorrect, target_fine))
    return out


def build_variant_error(target, others, rng: np.random.Generator, target_fine: str) -> PairBuild:
    """Target-error sentences (1) against sampled other-error sentences (0).

    Negatives are drawn without replacement. Positives are all kept while
    the other pool can match them to within one; a larger target pool is
    subsampled to ``len(others) + 1``.
    """
    target = list(target)
    if not target or not others:
        raise EmptyPool("both the target and the other-error pools must be non-empty")
    out = PairBuild()
    target_set = set(target)
    pool = []
    for i, s in enumerate(others):
        if s in target_set:
            out.skipped.append({"index": i, "reason": "label conflict"})
        else:
            pool.append(s)
    if not pool:
        raise EmptyPool("every other-error sentence also carries the target error")

    n_pos = min(len(target), len(pool) + 1)
    if n_pos < len(target):
        keep = np.sort(rng.choice(len(target), size=n_pos, replace=False))
        for i in sorted(set(range(len(target))) - set(keep.tolist())):
            out.skipped.append({"index": i, "reason": "positive subsampled"})
        target = [target[i] for i in keep]
    n_neg = min(len(pool), n_pos)
    neg_idx = np.sort(rng.choice(len(pool), size=n_neg, replace=False))

    out.examples.extend(PairExample(s, 1, Strategy.VariantError, target_fine) for s in target)
    out.examples.extend(PairExample(pool[i], 0, Strategy.VariantError, target_fine) for i in neg_idx)
    return out
