"""Multi-error pseudo-data generation.

Clean sentences are corrupted with one to four errors of distinct types.
The number of errors per sentence follows

    P(i errors) = C(3, i-1) * (1-p)**(4-i) * p**(i-1),   i = 1..4

i.e. ``1 + Binomial(3, p)``. Each corruption is recorded as an ``ErrorOp``
that rewrites a character span, so the corrupted text can be replayed from
the source.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from math import comb

import numpy as np

from ._script import derived_rng, is_content_char, random_same_script
from .errors import ConfigError, DomainError, EmptyInput, InjectionInfeasible
from .types import DEFAULT_CATEGORY_MAP, MISORDER, Coarse, ErrorCategory, Sentence

MAX_ERRORS = 4


class OpKind(str, Enum):
    CharReplace = "CharReplace"
    CharDelete = "CharDelete"
    CharInsert = "CharInsert"
    SpanDelete = "SpanDelete"
    SpanDuplicate = "SpanDuplicate"
    WordSwap = "WordSwap"
    AdjacentSegmentSwap = "AdjacentSegmentSwap"


@dataclass(frozen=True)
class ErrorOp:
    """Replace ``text[start:end]`` with ``replacement``.

    ``start``/``end`` index the text the op was applied to, i.e. the output
    of all previous ops of the same sentence.
    """

    category: ErrorCategory
    kind: OpKind
    start: int
    end: int
    replacement: str = ""

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def apply(self, text: str) -> str:
        if not 0 <= self.start <= self.end <= len(text):
            raise ValueError(f"span {self.span} out of bounds for text of length {len(text)}")
        return text[: self.start] + self.replacement + text[self.end :]

    def to_record(self) -> dict:
        return {
            "category": self.category.to_record(),
            "kind": self.kind.value,
            "span": [self.start, self.end],
            "replacement": self.replacement,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ErrorOp":
        start, end = rec["span"]
        return cls(ErrorCategory.from_record(rec["category"]), OpKind(rec["kind"]), start, end, rec.get("replacement") or "")


def replay(ops, text: str) -> str:
    for op in ops:
        text = op.apply(text)
    return text


@dataclass(frozen=True)
class InjectedSentence:
    source: Sentence
    corrupted: str
    ops: tuple
    error_count: int

    def to_record(self) -> dict:
        # correction-pair layout: erroneous text as source, clean text as target
        return {
            "id": self.source.id,
            "source": self.corrupted,
            "target": self.source.text,
            "error_count": self.error_count,
            "ops": [op.to_record() for op in self.ops],
        }


def default_categories(category_map=DEFAULT_CATEGORY_MAP) -> tuple:
    return tuple(ErrorCategory(c.value) for c in Coarse) + (category_map.category(MISORDER),)


@dataclass
class CascadeConfig:
    p: float = 0.2
    max_errors: int = MAX_ERRORS
    seed: int = 0
    category_weights: dict = field(default_factory=lambda: {c: 1.0 for c in default_categories()})

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")
        if self.max_errors != MAX_ERRORS:
            raise ConfigError(f"max_errors is fixed at {MAX_ERRORS}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        weights = list(self.category_weights.values())
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ConfigError("category weights must be non-negative with a positive sum")
        if sum(1 for w in weights if w > 0) < MAX_ERRORS:
            raise ConfigError(f"need at least {MAX_ERRORS} categories with positive weight")


def expected_proportions(p: float) -> np.ndarray:
    """Share of sentences carrying 1, 2, 3 and 4 errors."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    return np.array([comb(3, i - 1) * (1 - p) ** (4 - i) * p ** (i - 1) for i in range(1, 5)])


def sample_error_count(cfg: CascadeConfig, rng: np.random.Generator) -> int:
    return 1 + int(rng.binomial(MAX_ERRORS - 1, cfg.p))


# ---------------------------------------------------------------------------
# single-error operators; each returns an ErrorOp or None when not applicable


def _content_positions(text):
    pos = [i for i, ch in enumerate(text) if is_content_char(ch)]
    return pos or list(range(len(text)))


def _char_replace(text, cat, rng):
    i = int(rng.choice(_content_positions(text)))
    return ErrorOp(cat, OpKind.CharReplace, i, i + 1, random_same_script(text[i], rng))


def char_delete_op(category, index):
    return ErrorOp(category, OpKind.CharDelete, index, index + 1)


def _char_delete(text, cat, rng):
    if len(text) < 2:
        return None
    return char_delete_op(cat, int(rng.choice(_content_positions(text))))


def _char_insert(text, cat, rng):
    i = int(rng.choice(_content_positions(text)))
    return ErrorOp(cat, OpKind.CharInsert, i + 1, i + 1, text[i])


def _span_delete(text, cat, rng):
    # drop a 1-3 character span at the start of the sentence (a missing subject)
    if len(text) < 2:
        return None
    k = int(rng.integers(1, min(3, len(text) - 1) + 1))
    return ErrorOp(cat, OpKind.SpanDelete, 0, k)


def _span_duplicate(text, cat, rng):
    k = int(rng.integers(1, min(3, len(text)) + 1))
    b = int(rng.integers(0, len(text) - k + 1))
    return ErrorOp(cat, OpKind.SpanDuplicate, b + k, b + k, text[b : b + k])


def _word_swap(text, cat, rng):
    n = len(text)
    if n < 3:
        return None
    for _ in range(16):
        i, j = sorted(int(x) for x in rng.integers(n, size=2))
        if j - i >= 2 and text[i] != text[j]:
            break
    else:
        pairs = [(i, j) for i in range(n) for j in range(i + 2, n) if text[i] != text[j]]
        if not pairs:
            return None
        i, j = pairs[int(rng.integers(len(pairs)))]
    return ErrorOp(cat, OpKind.WordSwap, i, j + 1, text[j] + text[i + 1 : j] + text[i])


def segment_swap_op(category, text, start, pivot, end):
    """Swap ``text[start:pivot]`` and ``text[pivot:end]``."""
    return ErrorOp(category, OpKind.AdjacentSegmentSwap, start, end, text[pivot:end] + text[start:pivot])


def _segment_swap(text, cat, rng):
    # adjacent segments of 1-4 characters each
    n = len(text)
    if n < 2:
        return None
    for _ in range(8):
        m = int(rng.integers(1, n))
        a = m - int(rng.integers(1, min(4, m) + 1))
        b = m + int(rng.integers(1, min(4, n - m) + 1))
        op = segment_swap_op(cat, text, a, m, b)
        if op.replacement != text[a:b]:
            return op
    return None


_KIND_OPS = {
    OpKind.CharReplace: _char_replace,
    OpKind.CharDelete: _char_delete,
    OpKind.CharInsert: _char_insert,
    OpKind.SpanDelete: _span_delete,
    OpKind.SpanDuplicate: _span_duplicate,
    OpKind.WordSwap: _word_swap,
    OpKind.AdjacentSegmentSwap: _segment_swap,
}

_CATEGORY_KINDS = {
    Coarse.Char.value: (OpKind.CharReplace, OpKind.CharDelete, OpKind.CharInsert),
    Coarse.Miss.value: (OpKind.SpanDelete,),
    Coarse.Redu.value: (OpKind.SpanDuplicate,),
    Coarse.Coll.value: (OpKind.WordSwap,),
    MISORDER: (OpKind.AdjacentSegmentSwap,),
}


def kinds_for(category: ErrorCategory) -> tuple:
    try:
        return _CATEGORY_KINDS[category.name]
    except KeyError:
        raise ConfigError(f"no corruption operator for category {category.name!r}") from None


def apply_kind(text: str, category: ErrorCategory, kind: OpKind, rng: np.random.Generator) -> ErrorOp:
    """Build one op of an explicit kind; raises InjectionInfeasible if it cannot change ``text``."""
    if not text:
        raise InjectionInfeasible("empty text")
    op = _KIND_OPS[kind](text, category, rng)
    if op is None or op.apply(text) == text:
        raise InjectionInfeasible(f"{kind.value} cannot alter {text!r}")
    return op


def inject_single(s, category: ErrorCategory, rng: np.random.Generator) -> tuple[ErrorOp, str]:
    """Corrupt ``s`` (a Sentence or a string) with one error of ``category``."""
    text = s.text if isinstance(s, Sentence) else s
    kinds = list(kinds_for(category))
    order = rng.permutation(len(kinds)) if len(kinds) > 1 else [0]
    for k in order:
        try:
            op = apply_kind(text, category, kinds[int(k)], rng)
        except InjectionInfeasible:
            continue
        return op, op.apply(text)
    raise InjectionInfeasible(f"no {category.name} operator applies to {text!r}")


# ---------------------------------------------------------------------------
# cascade


@dataclass
class InjectionReport:
    n_input: int = 0
    n_output: int = 0
    histogram: dict = field(default_factory=lambda: {i: 0 for i in range(1, MAX_ERRORS + 1)})
    skipped: dict = field(default_factory=Counter)
    skipped_ids: list = field(default_factory=list)

    def to_dict(self, p=None) -> dict:
        out = {
            "n_input": self.n_input,
            "n_output": self.n_output,
            "histogram": {str(k): v for k, v in self.histogram.items()},
            "proportions": {str(k): (v / self.n_output if self.n_output else 0.0) for k, v in self.histogram.items()},
            "skipped": dict(sorted(self.skipped.items())),
            "skipped_ids": list(self.skipped_ids),
        }
        if p is not None:
            out["expected_proportions"] = {str(i + 1): float(v) for i, v in enumerate(expected_proportions(p))}
        return out


def inject_sentence(s: Sentence, cfg: CascadeConfig, attempts: int = 5) -> InjectedSentence:
    """Corrupt one sentence using its own RNG stream (seeded by cfg.seed and s.id)."""
    rng = derived_rng(cfg.seed, s.id)
    count = sample_error_count(cfg, rng)
    cats = [c for c, w in cfg.category_weights.items() if w > 0]
    w = np.array([cfg.category_weights[c] for c in cats], dtype=float)

    for _ in range(attempts):
        # weighted order without replacement (exponential-race keys)
        order = np.argsort(rng.exponential(size=len(cats)) / w, kind="stable")
        text, ops, used = s.text, [], set()
        for idx in order:
            if len(ops) == count:
                break
            cat = cats[int(idx)]
            if cat.name in used:
                continue
            try:
                op, text = inject_single(text, cat, rng)
            except InjectionInfeasible:
                continue
            ops.append(op)
            used.add(cat.name)
        if len(ops) < count:
            raise InjectionInfeasible(f"only {len(ops)} of {count} error types apply to {s.id!r}")
        # later ops can undo earlier ones (e.g. a duplicated prefix then deleted)
        if text != s.text:
            return InjectedSentence(s, text, tuple(ops), count)
    raise InjectionInfeasible(f"errors cancelled out on {s.id!r}")


def generate_multi_error(corpus, cfg: CascadeConfig, jobs: int = 1) -> tuple[list, InjectionReport]:
    """Corrupt every sentence of ``corpus``; infeasible items are skipped and reported.

    Output order follows input order and does not depend on ``jobs``.
    """
    corpus = list(corpus)
    if not corpus:
        raise EmptyInput("corpus is empty")
    report = InjectionReport(n_input=len(corpus))

    def work(s):
        try:
            return inject_sentence(s, cfg)
        except InjectionInfeasible as exc:
            return exc

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(work, corpus))
    else:
        results = [work(s) for s in corpus]

    out = []
    for s, res in zip(corpus, results):
        if isinstance(res, InjectionInfeasible):
            report.skipped["infeasible"] += 1
            report.skipped_ids.append(s.id)
            continue
        out.append(res)
        report.histogram[res.error_count] += 1
    report.n_output = len(out)
    return out, report
