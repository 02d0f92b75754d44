"""Classification and correction metrics.

Undefined cases (zero denominators) return a documented default value and
emit ``UndefinedMetricWarning``; ``MetricReport`` collects those warnings
as flags.
"""

from __future__ import annotations

import math
import unicodedata
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError


class UndefinedMetricWarning(UserWarning):
    pass


def _undefined(msg):
    warnings.warn(msg, UndefinedMetricWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# classification


def confusion_matrix(y_true, y_pred, num_classes: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    y_true, y_pred = np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise ShapeError("y_true and y_pred differ in length")
    if y_true.size and (min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= num_classes):
        raise ShapeError(f"labels must lie in [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def accuracy(cm: np.ndarray) -> float:
    n = cm.sum()
    if n == 0:
        _undefined("accuracy of an empty confusion matrix")
        return 0.0
    return float(np.trace(cm) / n)


def _prf(tp, fp, fn, beta=1.0):
    if tp + fp == 0:
        _undefined("precision with no predicted positives")
        p = 0.0
    else:
        p = tp / (tp + fp)
    if tp + fn == 0:
        _undefined("recall with no true positives")
        r = 0.0
    else:
        r = tp / (tp + fn)
    b2 = beta * beta
    f = (1 + b2) * p * r / (b2 * p + r) if p + r > 0 else 0.0
    return p, r, f


def micro_f1(cm: np.ndarray) -> tuple[float, float, float]:
    """Micro-averaged precision, recall and F1; all equal accuracy for single-label data."""
    cm = np.asarray(cm)
    tp = int(np.trace(cm))
    fp = int(cm.sum(axis=0).sum() - tp)
    fn = int(cm.sum(axis=1).sum() - tp)
    return _prf(tp, fp, fn)


def macro_f1(cm: np.ndarray) -> float:
    cm = np.asarray(cm)
    scores = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UndefinedMetricWarning)
        for k in range(cm.shape[0]):
            tp = int(cm[k, k])
            scores.append(_prf(tp, int(cm[:, k].sum()) - tp, int(cm[k, :].sum()) - tp)[2])
    return float(np.mean(scores)) if scores else 0.0


def qwk(y_true, y_pred, num_classes: int) -> float:
    """Quadratic weighted kappa in [-1, 1].

    When the expected disagreement is zero (both raters used one and the
    same class throughout) kappa is defined as 1.
    """
    if len(y_true) == 0:
        raise ShapeError("qwk needs at least one rating")
    if num_classes < 2:
        raise ShapeError("qwk needs at least two classes")
    O = confusion_matrix(y_true, y_pred, num_classes).astype(float)
    n = O.sum()
    idx = np.arange(num_classes)
    W = (idx[:, None] - idx[None, :]) ** 2 / (num_classes - 1) ** 2
    E = np.outer(O.sum(axis=1), O.sum(axis=0)) / n
    denom = float((W * E).sum())
    if denom == 0.0:
        _undefined("qwk with zero expected disagreement")
        return 1.0
    return float(1.0 - (W * O).sum() / denom)


# ---------------------------------------------------------------------------
# correction


def exact_match(hyp: str, ref: str) -> int:
    return int(unicodedata.normalize("NFC", hyp) == unicodedata.normalize("NFC", ref))


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


BLEU_ORDER = 4
BLEU_EPSILON = 1e-4


@dataclass
class BleuStats:
    """Sufficient statistics for corpus BLEU; add them to merge shards."""

    matches: list = field(default_factory=lambda: [0] * BLEU_ORDER)
    totals: list = field(default_factory=lambda: [0] * BLEU_ORDER)
    hyp_len: int = 0
    ref_len: int = 0

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            [a + b for a, b in zip(self.matches, other.matches)],
            [a + b for a, b in zip(self.totals, other.totals)],
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )


def _ngrams(text, n):
    return Counter(text[i : i + n] for i in range(len(text) - n + 1))


def bleu_stats(hyp: str, refs) -> BleuStats:
    refs = list(refs)
    if not refs:
        raise ValueError("bleu needs at least one reference")
    st = BleuStats(hyp_len=len(hyp))
    # closest reference length, shorter on ties
    st.ref_len = min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
    for n in range(1, BLEU_ORDER + 1):
        h = _ngrams(hyp, n)
        best = Counter()
        for r in refs:
            best |= _ngrams(r, n)
        st.matches[n - 1] = sum(min(c, best[g]) for g, c in h.items())
        st.totals[n - 1] = sum(h.values())
    return st


def bleu_from_stats(st: BleuStats, epsilon: float = BLEU_EPSILON) -> float:
    """Character BLEU-4 with brevity penalty.

    Orders with no hypothesis n-grams are left out of the geometric mean;
    an order with zero matches uses ``epsilon / total`` as its precision.
    """
    if st.hyp_len == 0:
        _undefined("bleu of an empty hypothesis")
        return 0.0
    logs = []
    for m, t in zip(st.matches, st.totals):
        if t == 0:
            continue
        logs.append(math.log((m if m > 0 else epsilon) / t))
    bp = 1.0 if st.hyp_len > st.ref_len else math.exp(1.0 - st.ref_len / st.hyp_len)
    return bp * math.exp(math.fsum(logs) / len(logs))


def bleu(hyp: str, refs, epsilon: float = BLEU_EPSILON) -> float:
    return bleu_from_stats(bleu_stats(hyp, refs), epsilon)


def corpus_bleu(hyps, refs_list, epsilon: float = BLEU_EPSILON) -> float:
    total = BleuStats()
    for hyp, refs in zip(hyps, refs_list, strict=True):
        total = total + bleu_stats(hyp, refs)
    return bleu_from_stats(total, epsilon)


@dataclass(frozen=True, order=True)
class Edit:
    """One character edit against the source.

    ``position`` is a source index; an insert goes before that index.
    """

    position: int
    kind: str  # "insert" | "delete" | "substitute"
    content: str


def extract_edits(src: str, tgt: str) -> list[Edit]:
    """Edits of one minimal alignment of ``src`` to ``tgt``.

    Among equal-cost alignments the backtrace prefers the diagonal
    (match/substitute), then delete, then insert, which places indels as
    far left as possible.
    """
    n, m = len(src), len(tgt)
    D = np.zeros((n + 1, m + 1), dtype=np.int64)
    D[:, 0] = np.arange(n + 1)
    D[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            D[i, j] = min(D[i - 1, j - 1] + (src[i - 1] != tgt[j - 1]), D[i - 1, j] + 1, D[i, j - 1] + 1)
    edits = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and D[i, j] == D[i - 1, j - 1] + (src[i - 1] != tgt[j - 1]):
            if src[i - 1] != tgt[j - 1]:
                edits.append(Edit(i - 1, "substitute", tgt[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and D[i, j] == D[i - 1, j] + 1:
            edits.append(Edit(i - 1, "delete", src[i - 1]))
            i -= 1
        else:
            edits.append(Edit(i, "insert", tgt[j - 1]))
            j -= 1
    edits.reverse()
    return edits


def apply_edits(src: str, edits) -> str:
    inserts: dict[int, list[str]] = {}
    changes: dict[int, Edit] = {}
    for e in edits:
        if e.kind == "insert":
            inserts.setdefault(e.position, []).append(e.content)
        else:
            changes[e.position] = e
    out = []
    for i in range(len(src) + 1):
        out.extend(inserts.get(i, ()))
        if i == len(src):
            break
        e = changes.get(i)
        if e is None:
            out.append(src[i])
        elif e.kind == "substitute":
            out.append(e.content)
    return "".join(out)


@dataclass
class EditCounts:
    """True positives and edit-set sizes; add them to merge shards."""

    tp: int = 0
    hyp: int = 0
    ref: int = 0

    def __add__(self, other: "EditCounts") -> "EditCounts":
        return EditCounts(self.tp + other.tp, self.hyp + other.hyp, self.ref + other.ref)


def edit_counts(src: str, hyp: str, ref: str) -> EditCounts:
    h = Counter(extract_edits(src, hyp))
    r = Counter(extract_edits(src, ref))
    return EditCounts(sum((h & r).values()), sum(h.values()), sum(r.values()))


def f05_from_counts(c: EditCounts, beta: float = 0.5) -> tuple[float, float, float]:
    if c.hyp == 0 and c.ref == 0:
        return 1.0, 1.0, 1.0
    if c.hyp == 0:
        _undefined("precision with no proposed edits; taken as 1")
        p = 1.0
    else:
        p = c.tp / c.hyp
    if c.ref == 0:
        _undefined("recall with no gold edits; taken as 1")
        r = 1.0
    else:
        r = c.tp / c.ref
    b2 = beta * beta
    f = (1 + b2) * p * r / (b2 * p + r) if p + r > 0 else 0.0
    return p, r, f


def edit_f05(src: str, hyp: str, ref: str) -> tuple[float, float, float]:
    """Precision, recall and F0.5 of the edits src->hyp against src->ref."""
    return f05_from_counts(edit_counts(src, hyp, ref))


# ---------------------------------------------------------------------------
# aggregation

HIGHER, LOWER = "higher_better", "lower_better"

# metric -> (direction, bounded to [0, 1])
METRIC_INFO = {
    "Acc": (HIGHER, True),
    "F1": (HIGHER, True),
    "micro_F1": (HIGHER, True),
    "QWK": (HIGHER, False),
    "EM": (HIGHER, True),
    "BLEU": (HIGHER, True),
    "F0.5": (HIGHER, True),
    "P": (HIGHER, True),
    "R": (HIGHER, True),
    "Leven": (LOWER, False),
    "B.S.": (HIGHER, True),
    "PPL_BERT": (LOWER, False),
}
DEFAULT_WEIGHTS = {
    "classify": {"Acc": 1.0, "F1": 1.0, "QWK": 1.0},
    "correct": {"EM": 1.0, "BLEU": 1.0, "F0.5": 1.0},
}


@dataclass
class MetricReport:
    metrics: dict = field(default_factory=dict)
    avg_score: float | None = None
    weights: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def add_external(self, name: str, value: float) -> None:
        """Slot for values computed elsewhere (e.g. BERTScore, PPL_BERT)."""
        self.metrics[name] = float(value)

    def to_dict(self) -> dict:
        return {"metrics": dict(self.metrics), "avg_score": self.avg_score, "weights": dict(self.weights), "flags": list(self.flags)}


def avg_score(report: MetricReport, weights: dict, directions: dict | None = None) -> float:
    """Weighted mean of direction-normalised metrics.

    Higher-better metrics enter as is; lower-better ones as ``1 - value``,
    which is only defined for metrics bounded to [0, 1].
    """
    if not weights:
        raise ConfigError("no metric weights given")
    dirs = {k: v[0] for k, v in METRIC_INFO.items()}
    dirs.update(directions or {})
    total, acc = 0.0, 0.0
    for name, w in weights.items():
        if name not in report.metrics:
            raise ConfigError(f"unknown metric {name!r} in weights")
        if w < 0:
            raise ConfigError(f"negative weight for {name!r}")
        v = report.metrics[name]
        if dirs.get(name, HIGHER) == LOWER:
            if not METRIC_INFO.get(name, (None, False))[1]:
                raise ConfigError(f"{name!r} is lower-better and unbounded; no normalisation is defined")
            v = 1.0 - v
        acc += w * v
        total += w
    if total <= 0:
        raise ConfigError("metric weights sum to zero")
    return acc / total


def _collect(fn):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UndefinedMetricWarning)
        value = fn()
    return value, [str(w.message) for w in caught if issubclass(w.category, UndefinedMetricWarning)]


def classification_report(y_true, y_pred, num_classes: int = 3, weights: dict | None = None) -> MetricReport:
    rep = MetricReport()

    def compute():
        cm = confusion_matrix(y_true, y_pred, num_classes)
        m = {"Acc": accuracy(cm), "micro_F1": micro_f1(cm)[2], "F1": macro_f1(cm), "QWK": qwk(y_true, y_pred, num_classes)}
        return m

    rep.metrics, rep.flags = _collect(compute)
    rep.weights = dict(weights or DEFAULT_WEIGHTS["classify"])
    rep.avg_score = avg_score(rep, rep.weights)
    return rep


def correction_report(sources, hyps, refs, weights: dict | None = None) -> MetricReport:
    rep = MetricReport()
    sources, hyps, refs = list(sources), list(hyps), list(refs)
    if not (len(sources) == len(hyps) == len(refs)) or not hyps:
        raise ShapeError("sources, hypotheses and references must be equally long and non-empty")

    def compute():
        counts = EditCounts()
        for s, h, r in zip(sources, hyps, refs):
            counts = counts + edit_counts(s, h, r)
        p, r_, f = f05_from_counts(counts)
        return {
            "EM": float(np.mean([exact_match(h, r) for h, r in zip(hyps, refs)])),
            "BLEU": corpus_bleu(hyps, [[r] for r in refs]),
            "P": p,
            "R": r_,
            "F0.5": f,
            "Leven": float(np.mean([levenshtein(h, r) for h, r in zip(hyps, refs)])),
        }

    rep.metrics, rep.flags = _collect(compute)
    rep.weights = dict(weights or DEFAULT_WEIGHTS["correct"])
    rep.avg_score = avg_score(rep, rep.weights)
    return rep
