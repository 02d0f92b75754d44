"""Combine coarse-grained and fine-grained error predictions per sentence.

A coarse label is kept when its probability reaches ``coarse_threshold``.
A fine label is kept when its probability reaches ``fine_threshold`` and,
if ``fine_requires_coarse`` is set, its coarse parent was kept as well.
Fine types whose parent is a pseudo-coarse bucket (no coarse model scores
it) pass the gate on their own.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import AlignmentError, ConfigError, SchemaError
from .types import DEFAULT_CATEGORY_MAP, CategoryMap, Coarse, ErrorCategory


@dataclass
class FusionConfig:
    coarse_threshold: float = 0.5
    fine_threshold: float = 0.5
    fine_requires_coarse: bool = True

    def __post_init__(self):
        for name in ("coarse_threshold", "fine_threshold"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie strictly between 0 and 1, got {v}")


def _check_probs(probs: dict, what: str) -> dict:
    for k, v in probs.items():
        if not 0.0 <= float(v) <= 1.0:
            raise SchemaError(f"{what} probability for {k!r} outside [0, 1]: {v}")
    return probs


@dataclass
class CoarsePrediction:
    probs: dict  # Coarse name -> P(error present)

    def __post_init__(self):
        _check_probs(self.probs, "coarse")
        unknown = set(self.probs) - set(Coarse.__members__)
        if unknown:
            raise SchemaError(f"unknown coarse categories {sorted(unknown)}")


@dataclass
class FinePrediction:
    probs: dict  # fine type -> P(error present)
    strategy: str | None = None

    def __post_init__(self):
        _check_probs(self.probs, "fine")


def fuse(coarse: CoarsePrediction, fine: FinePrediction, cfg: FusionConfig = FusionConfig(),
         category_map: CategoryMap = DEFAULT_CATEGORY_MAP) -> frozenset:
    """Set of ErrorCategory labels for one sentence; thresholds are inclusive."""
    kept = {name for name, p in coarse.probs.items() if p >= cfg.coarse_threshold}
    labels = {ErrorCategory(name) for name in kept}
    for name, p in fine.probs.items():
        if p < cfg.fine_threshold:
            continue
        parent = category_map.parent(name)
        if cfg.fine_requires_coarse and not category_map.is_pseudo(parent) and parent not in kept:
            continue
        labels.add(ErrorCategory(parent, name))
    return frozenset(labels)


def _sorted_labels(labels):
    return sorted(labels, key=lambda c: (c.coarse, c.fine or ""))


@dataclass
class FusionResult:
    items: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def fuse_corpus(coarse_items, fine_items, cfg: FusionConfig = FusionConfig(),
                category_map: CategoryMap = DEFAULT_CATEGORY_MAP) -> FusionResult:
    """Fuse aligned prediction records.

    Both inputs are sequences of dicts ``{"id", "probs": {...}}`` (fine
    records may carry ``"strategy"``); ids must match one to one. Output
    records follow the labelled-sentence layout ``{"id", "labels": [...]}``
    in coarse-input order.
    """
    coarse_items, fine_items = list(coarse_items), list(fine_items)
    fine_by_id = {}
    for rec in fine_items:
        if rec["id"] in fine_by_id:
            raise AlignmentError(f"duplicate fine prediction id {rec['id']!r}")
        fine_by_id[rec["id"]] = rec
    coarse_ids = [rec["id"] for rec in coarse_items]
    if len(set(coarse_ids)) != len(coarse_ids):
        raise AlignmentError("duplicate coarse prediction ids")
    if set(coarse_ids) != set(fine_by_id):
        missing = sorted(set(coarse_ids) ^ set(fine_by_id))
        raise AlignmentError(f"coarse and fine predictions are not aligned; unmatched ids: {missing[:10]}")

    out = FusionResult()
    counts = Counter()
    for rec in coarse_items:
        f = fine_by_id[rec["id"]]
        labels = fuse(CoarsePrediction(rec["probs"]), FinePrediction(f["probs"], f.get("strategy")), cfg, category_map)
        item = {"id": rec["id"], "labels": [c.to_record() for c in _sorted_labels(labels)]}
        if "text" in rec:
            item["text"] = rec["text"]
        out.items.append(item)
        counts.update(c.name for c in labels)
    out.summary = {"n_items": len(out.items), "label_counts": dict(sorted(counts.items()))}
    return out
