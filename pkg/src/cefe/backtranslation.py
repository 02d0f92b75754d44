"""Fluency pseudo-labels from round-trip translation.

Every essay yields three records: the original (Excellent), a round trip
through a well-resourced pivot language (Moderate) and one through a
poorly-resourced pivot (Failing). Translators are pluggable; besides an
HTTP adapter there is an offline character-noise simulator and a cache that
replays earlier round trips.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from ._script import derived_rng, random_same_script
from .errors import ConfigError, DomainError, IoError, TranslationError
from .types import Essay, FluencyLabel, dumps_record, segment_sentences

log = logging.getLogger(__name__)

SOURCE_LANG = "zh"


class Translator(Protocol):
    id: str

    def translate(self, text: str, source_lang: str, target_lang: str) -> str: ...


class IdentityTranslator:
    id = "identity"

    def translate(self, text, source_lang, target_lang):
        return text


def simulate_translation(text: str, rate: float, rng: np.random.Generator) -> str:
    """Perturb each character with probability ``rate``.

    A perturbed character is substituted, dropped or doubled with equal
    odds. At ``rate == 1`` the output is guaranteed to differ from the input.
    """
    if not 0.0 <= rate <= 1.0:
        raise DomainError(f"rate must lie in [0, 1], got {rate}")
    if rate == 0.0 or not text:
        return text
    hit = rng.random(len(text)) < rate
    action = rng.integers(3, size=len(text))
    out = []
    for ch, h, a in zip(text, hit.tolist(), action.tolist()):
        if not h:
            out.append(ch)
        elif a == 0:
            out.append(random_same_script(ch, rng))
        elif a == 2:
            out.append(ch + ch)
    result = "".join(out)
    if result == text and hit.any():
        # e.g. a dropped and a doubled "a" in "aa"; force a visible change
        result = random_same_script(text[0], rng) + text[1:]
    return result


@dataclass
class NoiseSimulator:
    """Offline stand-in for MT: the return leg adds character noise at the pivot's rate.

    Output is a pure function of (seed, text, pivot).
    """

    rates: dict = field(default_factory=lambda: {"en": 0.05, "ja": 0.25})
    seed: int = 0
    id: str = "sim"

    def translate(self, text, source_lang, target_lang):
        if target_lang != SOURCE_LANG:
            return text
        try:
            rate = self.rates[source_lang]
        except KeyError:
            raise TranslationError(f"simulator has no noise rate for {source_lang!r}", provider=self.id) from None
        return simulate_translation(text, rate, derived_rng(self.seed, source_lang, text))


@dataclass
class HttpTranslator:
    """POST ``{text, source_lang, target_lang}`` and read ``{translation}``.

    The credential is taken from the environment variable named by
    ``token_env`` and sent in ``auth_header``.
    """

    endpoint: str
    auth_header: str = "Authorization"
    token_env: str = "CEFE_TRANSLATOR_TOKEN"
    timeout: float = 30.0
    id: str = "http"

    def translate(self, text, source_lang, target_lang):
        body = json.dumps({"text": text, "source_lang": source_lang, "target_lang": target_lang}).encode("utf-8")
        req = urllib.request.Request(self.endpoint, data=body, method="POST", headers={"Content-Type": "application/json"})
        token = os.environ.get(self.token_env)
        if token:
            req.add_header(self.auth_header, token)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            detail = exc.read().decode("utf-8", "replace")[:500]
            raise TranslationError(f"HTTP {exc.code} from translator", self.id, {"status": exc.code, "body": detail}) from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise TranslationError(f"translator unreachable: {exc}", self.id, {"error": str(exc)}) from exc
        except json.JSONDecodeError as exc:
            raise TranslationError("translator returned invalid JSON", self.id, {"error": str(exc)}) from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("translation"), str):
            raise TranslationError("translator response lacks a 'translation' string", self.id, {"response": str(payload)[:500]})
        return payload["translation"]


# ---------------------------------------------------------------------------
# cache


@dataclass(frozen=True)
class TranslationRecord:
    source_text: str
    pivot_lang: str
    forward_text: str
    back_text: str
    provider_id: str
    timestamp: float = 0.0

    @property
    def key(self) -> str:
        return cache_key(self.source_text, self.pivot_lang, self.provider_id)


def cache_key(source_text: str, pivot_lang: str, provider_id: str) -> str:
    h = hashlib.sha256()
    for part in (source_text, pivot_lang, provider_id):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


class TranslationCache:
    """Round-trip results keyed by (source text, pivot, provider), optionally persisted as JSONL.

    Writes are serialized by a lock; the file is append-only.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._records: dict[str, TranslationRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = TranslationRecord(**json.loads(line))
                        self._records[rec.key] = rec

    def __len__(self):
        return len(self._records)

    def get(self, source_text, pivot_lang, provider_id) -> TranslationRecord | None:
        return self._records.get(cache_key(source_text, pivot_lang, provider_id))

    def put(self, rec: TranslationRecord) -> None:
        with self._lock:
            if rec.key in self._records:
                return
            self._records[rec.key] = rec
            if self.path is not None:
                try:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(dumps_record(asdict(rec)) + "\n")
                except OSError as exc:
                    raise IoError(f"cannot append to cache {self.path}: {exc}") from exc


class CacheReplayTranslator:
    """Marker provider for replay-only runs: every lookup must hit the cache."""

    def __init__(self, provider_id: str):
        self.id = provider_id

    def translate(self, text, source_lang, target_lang):
        raise TranslationError(f"cache miss for provider {self.id!r} ({source_lang}->{target_lang})", self.id)


def round_trip(t: Translator, text: str, pivot_lang: str, cache: TranslationCache | None = None,
               retries: int = 2, backoff: float = 0.0) -> str:
    """zh -> pivot -> zh, consulting ``cache`` first.

    Each leg is retried up to ``retries`` extra times on TranslationError.
    """
    if not text:
        raise ValueError("cannot translate empty text")
    if cache is not None:
        hit = cache.get(text, pivot_lang, t.id)
        if hit is not None:
            return hit.back_text

    def call(src, s_lang, t_lang):
        errors = []
        for attempt in range(retries + 1):
            try:
                return t.translate(src, s_lang, t_lang)
            except TranslationError as exc:
                errors.append(str(exc))
                log.warning("translation %s->%s failed (attempt %d): %s", s_lang, t_lang, attempt + 1, exc)
                if backoff and attempt < retries:
                    time.sleep(backoff * 2**attempt)
        raise TranslationError(f"{t.id}: {s_lang}->{t_lang} failed after {retries + 1} attempts", t.id, {"attempts": errors})

    forward = call(text, SOURCE_LANG, pivot_lang)
    back = call(forward, pivot_lang, SOURCE_LANG)
    if cache is not None:
        cache.put(TranslationRecord(text, pivot_lang, forward, back, t.id, time.time()))
    return back


@dataclass
class BacktransConfig:
    lang_rich: str = "en"
    lang_limit: str = "ja"
    rich_rate: float = 0.05
    limit_rate: float = 0.25
    retries: int = 2
    jobs: int = 1

    def __post_init__(self):
        if self.lang_rich == self.lang_limit:
            raise ConfigError("lang_rich and lang_limit must differ")
        if not 0.0 <= self.rich_rate < self.limit_rate <= 1.0:
            raise ConfigError("simulator rates need 0 <= rich_rate < limit_rate <= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    def simulator(self, seed: int = 0) -> NoiseSimulator:
        return NoiseSimulator({self.lang_rich: self.rich_rate, self.lang_limit: self.limit_rate}, seed)


@dataclass
class LabelingReport:
    n_input: int = 0
    label_counts: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def label_corpus(essays, cfg: BacktransConfig, t: Translator, cache: TranslationCache | None = None) -> tuple[list, LabelingReport]:
    """Three labelled essays per input; output order follows input order.

    Round-trip outputs are re-segmented. Empty round trips are skipped and
    reported.
    """
    essays = list(essays)
    legs = [(FluencyLabel.Moderate, cfg.lang_rich), (FluencyLabel.Failing, cfg.lang_limit)]
    jobs = [(e, lang) for e in essays for _, lang in legs]

    def work(job):
        e, lang = job
        try:
            return round_trip(t, e.text, lang, cache, retries=cfg.retries)
        except TranslationError as exc:
            return exc

    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    report = LabelingReport(n_input=len(essays))
    counts = Counter()
    out = []
    it = iter(results)
    for e in essays:
        out.append(e.with_label(FluencyLabel.Excellent))
        counts[FluencyLabel.Excellent.name] += 1
        for label, lang in legs:
            res = next(it)
            if isinstance(res, TranslationError):
                raise res
            if not res.strip():
                report.skipped.append({"id": e.id, "pivot": lang, "reason": "empty round trip"})
                continue
            out.append(Essay(f"{e.id}#{lang}", segment_sentences(res), label))
            counts[label.name] += 1
    report.label_counts = {lab.name: counts[lab.name] for lab in FluencyLabel}
    return out, report
