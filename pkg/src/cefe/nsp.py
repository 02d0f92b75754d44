"""Classifier inputs at essay, sentence or neighbouring-pair granularity.

In NSP mode an essay of n sentences becomes the n-1 overlapping pairs
(s1, s2), (s2, s3), ... joined by a separator token. Pair-level class
distributions are averaged back into one essay-level decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyAggregation, SchemaError
from .types import Essay, FluencyLabel, Sentence

SEP = "[SEP]"
NUM_CLASSES = len(FluencyLabel)


class GranularityMode(str, Enum):
    EssayLevel = "essay"
    SentenceLevel = "sentence"
    NspLevel = "nsp"

    @classmethod
    def parse(cls, value) -> "GranularityMode":
        if isinstance(value, cls):
            return value
        for mode in cls:
            if value in (mode.value, mode.name):
                return mode
        raise SchemaError(f"unknown granularity mode {value!r}")


@dataclass(frozen=True)
class NspPair:
    left: Sentence
    right: Sentence | None
    essay_id: str
    index: int


def make_pairs(essay: Essay) -> list[NspPair]:
    s = essay.sentences
    if len(s) == 1:
        return [NspPair(s[0], None, essay.id, 0)]
    return [NspPair(s[i], s[i + 1], essay.id, i) for i in range(len(s) - 1)]


def escape(text: str) -> str:
    """Backslash-escape so that a literal separator inside text stays distinguishable."""
    return text.replace("\\", "\\\\").replace(SEP, "\\" + SEP)


def unescape(text: str) -> str:
    out, i = [], 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text):
            out.append(text[i + 1])
            i += 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def split_rendered(rendered: str) -> tuple[str, str]:
    """Inverse of NSP rendering: recover (left, right)."""
    i = 0
    while i < len(rendered):
        if rendered[i] == "\\":
            i += 2
            continue
        if rendered.startswith(SEP, i):
            return unescape(rendered[:i]), unescape(rendered[i + len(SEP) :])
        i += 1
    raise ValueError("no unescaped separator in rendered input")


def render_input(pair: NspPair, mode, essay: Essay | None = None) -> str:
    mode = GranularityMode.parse(mode)
    if mode is GranularityMode.NspLevel:
        right = pair.right.text if pair.right is not None else ""
        return escape(pair.left.text) + SEP + escape(right)
    if mode is GranularityMode.SentenceLevel:
        return pair.left.text
    if essay is None:
        raise ValueError("essay-level rendering needs the essay")
    return essay.text


def chunk(essay: Essay, mode) -> list[str]:
    """All classifier inputs for one essay under ``mode``."""
    mode = GranularityMode.parse(mode)
    if mode is GranularityMode.EssayLevel:
        return [essay.text]
    if mode is GranularityMode.SentenceLevel:
        return [s.text for s in essay.sentences]
    return [render_input(p, mode) for p in make_pairs(essay)]


def as_prob_dist(p, atol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.isfinite(p).all():
        raise SchemaError(f"not a probability vector: {p!r}")
    if abs(math.fsum(p) - 1.0) > atol:
        raise SchemaError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def aggregate(dists, method: str = "mean") -> np.ndarray:
    """Combine pair-level distributions into one.

    ``mean`` averages probabilities component-wise (with exact summation,
    so the result does not depend on the order of ``dists``); ``vote``
    normalises a histogram of per-pair argmax decisions.
    """
    dists = [as_prob_dist(d) for d in dists]
    if not dists:
        raise EmptyAggregation("nothing to aggregate")
    k = dists[0].size
    if any(d.size != k for d in dists):
        raise SchemaError("distributions of different sizes")
    if method == "vote":
        votes = np.zeros(k)
        for d in dists:
            votes[int(np.argmax(d))] += 1
        return votes / len(dists)
    if method != "mean":
        raise ValueError(f"unknown aggregation method {method!r}")
    return np.array([math.fsum(d[j] for d in dists) / len(dists) for j in range(k)])


def decide(dist) -> FluencyLabel:
    """Argmax; ties go to the lower ordinal, i.e. the better grade."""
    return FluencyLabel(int(np.argmax(as_prob_dist(dist))))
