"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line (shown even without
``-s``). Run just this module with ``pytest tests/test_acceptance.py -v``.
"""

import itertools
import json
import math
import time
from contextlib import contextmanager
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cefe.backtranslation import BacktransConfig, IdentityTranslator, label_corpus
from cefe.cli import run
from cefe.fusion import CoarsePrediction, FinePrediction, FusionConfig, fuse
from cefe.injection import CascadeConfig, expected_proportions, generate_multi_error
from cefe.metrics import accuracy, bleu, confusion_matrix, edit_f05, levenshtein, micro_f1, qwk
from cefe.model import LabeledFeature, SCEConfig, ce_loss, featurize, gradcheck, oversample, rce_loss, sce_loss
from cefe.nsp import aggregate, decide, make_pairs
from cefe.pairs import build_variant_error, build_wrong_correct
from cefe.toy import toy_essays, toy_sentence
from cefe.types import DEFAULT_CATEGORY_MAP, Essay, FluencyLabel, Sentence


@contextmanager
def criterion(capsys, number, title):
    info = {}
    start = time.perf_counter()
    try:
        yield info
    except BaseException as exc:
        _emit(capsys, "FAIL", number, title, time.perf_counter() - start, f"{type(exc).__name__}: {exc}".splitlines()[0])
        raise
    _emit(capsys, "PASS", number, title, time.perf_counter() - start, info.get("detail", ""))


def _emit(capsys, verdict, number, title, seconds, detail):
    with capsys.disabled():
        print(f"\n[{verdict}] criterion {number:>2}: {title} ({seconds:.1f}s) {detail}".rstrip())


def _random_dist(rng, k):
    p = rng.dirichlet(np.ones(k))
    if rng.random() < 0.1:
        p = np.eye(k)[rng.integers(k)]
    return p


def test_01_error_count_distribution(capsys):
    with criterion(capsys, 1, "error-count distribution, closed form and 100k Monte-Carlo") as info:
        start = time.perf_counter()
        exact = [math.comb(3, i - 1) * 0.8 ** (4 - i) * 0.2 ** (i - 1) for i in range(1, 5)]
        assert np.max(np.abs(expected_proportions(0.2) - [0.512, 0.384, 0.096, 0.008])) <= 1e-12
        assert np.max(np.abs(np.array(exact) - [0.512, 0.384, 0.096, 0.008])) <= 1e-12

        rng = np.random.default_rng(2024)
        corpus = [Sentence(f"s{i}", toy_sentence(rng)) for i in range(100_000)]
        items, report = generate_multi_error(corpus, CascadeConfig(p=0.2, seed=7))
        hist = np.array([report.histogram[i] for i in range(1, 5)]) / len(items)
        elapsed = time.perf_counter() - start
        info["detail"] = f"proportions={np.round(hist, 4).tolist()} skipped={len(report.skipped_ids)}"
        assert np.max(np.abs(hist - expected_proportions(0.2))) <= 0.01
        assert elapsed < 30


def test_02_sce_reduces_to_scaled_ce(capsys):
    with criterion(capsys, 2, "SCE with beta=0 equals mu*CE on 1000 random pairs") as info:
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            p, t, mu = _random_dist(rng, k), int(rng.integers(k)), float(rng.uniform(0.01, 3))
            worst = max(worst, abs(sce_loss(p, t, SCEConfig(mu, 0.0, float(-rng.uniform(0.5, 8)))) - mu * ce_loss(p, t)))
        info["detail"] = f"max_abs_diff={worst:.2e}"
        assert worst <= 1e-12


def test_03_gradient_check(capsys):
    with criterion(capsys, 3, "analytic SCE gradient vs central differences") as info:
        start = time.perf_counter()
        res = gradcheck(trials=100, seed=3, max_dim=64, max_classes=4)
        elapsed = time.perf_counter() - start
        info["detail"] = f"trials={res['trials']} max_rel_err={res['max_relative_error']:.2e}"
        assert res["trials"] >= 100 and res["max_relative_error"] <= 1e-5
        assert elapsed < 10


def test_04_rce_closed_form(capsys):
    with criterion(capsys, 4, "RCE equals -A(1 - p_target) with A=-4") as info:
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            p, t = _random_dist(rng, k), int(rng.integers(k))
            worst = max(worst, abs(rce_loss(p, t, -4.0) - 4.0 * (1 - p[t])))
        info["detail"] = f"max_abs_diff={worst:.2e}"
        assert worst <= 1e-12


def test_05_oversampling(capsys):
    with criterion(capsys, 5, "oversampling {12, 45, 43} -> {45, 45, 45}") as info:
        items = [LabeledFeature(featurize(f"{c}:{i}", 64), c) for c, n in enumerate([12, 45, 43]) for i in range(n)]
        a = oversample(items, np.random.default_rng(5))
        b = oversample(items, np.random.default_rng(5))
        counts = np.bincount([it.target for it in a]).tolist()
        info["detail"] = f"counts={counts}"
        assert counts == [45, 45, 45]
        assert a[: len(items)] == items
        assert [id(x) for x in a] == [id(x) for x in b]


def test_06_backtranslation_multiplicity(capsys):
    with criterion(capsys, 6, "43 essays -> 129 labelled records") as info:
        out, rep = label_corpus(toy_essays(43, seed=6), BacktransConfig(), IdentityTranslator())
        hist = {lab.name: sum(e.label is lab for e in out) for lab in FluencyLabel}
        info["detail"] = f"records={len(out)} histogram={hist}"
        assert len(out) == 129
        assert hist == {"Excellent": 43, "Moderate": 43, "Failing": 43} == rep.label_counts


def test_07_nsp_laws(capsys):
    with criterion(capsys, 7, "pair count, aggregation and tie-break laws") as info:
        rng = np.random.default_rng(7)
        for trial in range(300):
            n = int(rng.integers(1, 30))
            e = Essay(f"e{trial}", [Sentence(f"s{i}", toy_sentence(rng)) for i in range(n)])
            assert len(make_pairs(e)) == max(n - 1, 1)
            ds = [rng.dirichlet(np.ones(3)) for _ in range(int(rng.integers(1, 12)))]
            perm = [ds[i] for i in rng.permutation(len(ds))]
            assert aggregate(ds).tolist() == aggregate(perm).tolist()
            np.testing.assert_allclose(aggregate([ds[0]] * len(ds)), ds[0], atol=1e-15)
        assert decide((0.5, 0.3, 0.2)) is FluencyLabel.Excellent
        assert decide((0.4, 0.4, 0.2)) is FluencyLabel.Excellent
        assert decide((1 / 3, 1 / 3, 1 / 3)) is FluencyLabel.Excellent
        assert decide((0.2, 0.4, 0.4)) is FluencyLabel.Moderate
        info["detail"] = "essays=300"


def _qwk_oracle(y_true, y_pred, k):
    n = len(y_true)
    num = den = 0.0
    for i, j in itertools.product(range(k), repeat=2):
        w = (i - j) ** 2 / (k - 1) ** 2
        o = sum(1 for a, b in zip(y_true, y_pred) if a == i and b == j)
        e = sum(1 for a in y_true if a == i) * sum(1 for b in y_pred if b == j) / n
        num += w * o
        den += w * e
    return 1 - num / den


def _lev_oracle(a, b):
    @lru_cache(maxsize=None)
    def d(i, j):
        if min(i, j) == 0:
            return max(i, j)
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def test_08_metric_oracles(capsys):
    with criterion(capsys, 8, "QWK, Levenshtein, micro-F1, BLEU and F0.5 against oracles") as info:
        rng = np.random.default_rng(8)
        n_qwk = 0
        while n_qwk < 1000:
            k, n = int(rng.integers(2, 6)), int(rng.integers(1, 51))
            yt, yp = rng.integers(k, size=n).tolist(), rng.integers(k, size=n).tolist()
            if len(set(yt)) == 1 and len(set(yp)) == 1:
                continue
            assert abs(qwk(yt, yp, k) - _qwk_oracle(yt, yp, k)) <= 1e-12
            cm = confusion_matrix(yt, yp, k)
            assert abs(micro_f1(cm)[2] - accuracy(cm)) <= 1e-12
            n_qwk += 1
        for _ in range(2000):
            a = "".join(rng.choice(list("abc"), size=int(rng.integers(0, 7))))
            b = "".join(rng.choice(list("abc"), size=int(rng.integers(0, 7))))
            assert levenshtein(a, b) == _lev_oracle(a, b)
        for _ in range(200):
            x = toy_sentence(rng)
            assert bleu(x, [x]) == 1.0
        p, r, f = edit_f05("abcde", "aXcYZ", "aXcYe")
        assert abs(p - 2 / 3) <= 1e-12 and r == 1.0 and abs(f - 0.714286) <= 1e-6
        info["detail"] = f"qwk_instances={n_qwk} F0.5={f:.6f}"


def test_09_track3_end_to_end(capsys, tmp_path):
    with criterion(capsys, 9, "track3 pipeline with the noise simulator") as info:
        times, reports = [], []
        for name in ("run1", "run2"):
            out = tmp_path / name
            start = time.perf_counter()
            code = run(["pipeline", "track3", "--provider", "sim", "--rich-rate", "0.05", "--limit-rate", "0.25",
                        "--seed", "7", "--out-dir", str(out)])
            times.append(time.perf_counter() - start)
            assert code == 0
            reports.append((out / "report.json").read_bytes())
        rep = json.loads(reports[0])
        acc = rep["evaluation"]["metrics"]["Acc"]
        info["detail"] = f"Acc={acc:.3f} QWK={rep['evaluation']['metrics']['QWK']:.3f} runtimes={[round(t, 1) for t in times]}s"
        assert len(rep["training"]["pretrain_loss"]) > 0 and len(rep["training"]["finetune_loss"]) > 0
        assert acc >= 0.80
        assert reports[0] == reports[1]
        assert max(times) < 120


def test_10_pair_builder_balance(capsys):
    with criterion(capsys, 10, "pair corpora balanced within one, no leakage") as info:
        shapes = []

        def check(build):
            pos = [e.text_a for e in build.examples if e.label == 1]
            neg = [e.text_a for e in build.examples if e.label == 0]
            assert abs(len(pos) - len(neg)) <= 1
            assert not set(pos) & set(neg)
            shapes.append((len(pos), len(neg)))

        for n in (50, 194):
            check(build_wrong_correct([{"wrong": f"w{i}", "correct": f"c{i}"} for i in range(n)], "Misorder"))
        for n_target, n_other in ((50, 50), (51, 50), (194, 196), (196, 194), (50, 200)):
            target = [f"t{i}" for i in range(n_target)]
            others = [f"o{i}" for i in range(n_other)] + target[:3]  # overlap must not leak
            check(build_variant_error(target, others, np.random.default_rng(10), "Misorder"))
        info["detail"] = f"(pos, neg)={shapes}"


def test_11_fusion_properties(capsys):
    with criterion(capsys, 11, "fusion monotonicity and fine-requires-coarse gate") as info:
        coarse = st.fixed_dictionaries({c: st.floats(0, 1) for c in ("Char", "Miss", "Redu", "Coll")})
        fine = st.fixed_dictionaries({f: st.floats(0, 1) for f in ("Misorder", "RedundancyOtherConstituents")})
        cfgs = st.builds(FusionConfig, st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.booleans())
        cmaps = st.sampled_from([DEFAULT_CATEGORY_MAP, DEFAULT_CATEGORY_MAP.with_overrides({"Misorder": "Coll"})])

        @settings(max_examples=500)
        @given(coarse, fine, cfgs, cmaps, st.sampled_from(["Char", "Miss", "Redu", "Coll", "Misorder", "RedundancyOtherConstituents"]),
               st.floats(0, 1))
        def prop(cp, fp, cfg, cmap, which, value):
            before = fuse(CoarsePrediction(cp), FinePrediction(fp), cfg, cmap)
            cp2, fp2 = dict(cp), dict(fp)
            d = cp2 if which in cp2 else fp2
            d[which] = max(d[which], value)
            after = fuse(CoarsePrediction(cp2), FinePrediction(fp2), cfg, cmap)
            assert before <= after
            if cfg.fine_requires_coarse:
                kept = {c.coarse for c in after if c.fine is None}
                for c in after:
                    if c.fine is not None and not cmap.is_pseudo(c.coarse):
                        assert c.coarse in kept

        prop()
        boundary = fuse(CoarsePrediction({"Redu": 0.5}), FinePrediction({"RedundancyOtherConstituents": 0.5}))
        assert {c.name for c in boundary} == {"Redu", "RedundancyOtherConstituents"}
        gated = fuse(CoarsePrediction({"Redu": 0.1}), FinePrediction({"RedundancyOtherConstituents": 0.9}))
        assert gated == frozenset()
        info["detail"] = "examples=500"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
