import pytest
from hypothesis import given
from hypothesis import strategies as st

from cefe.errors import AlignmentError, ConfigError, SchemaError
from cefe.fusion import CoarsePrediction, FinePrediction, FusionConfig, fuse, fuse_corpus
from cefe.types import DEFAULT_CATEGORY_MAP, MISORDER, REDUNDANCY_OTHER, ErrorCategory

COARSE = ["Char", "Miss", "Redu", "Coll"]
FINE = [MISORDER, REDUNDANCY_OTHER]
prob = st.floats(0, 1)
coarse_probs = st.fixed_dictionaries({c: prob for c in COARSE})
fine_probs = st.fixed_dictionaries({f: prob for f in FINE})
configs = st.builds(FusionConfig, st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.booleans())
cmaps = st.sampled_from([DEFAULT_CATEGORY_MAP, DEFAULT_CATEGORY_MAP.with_overrides({MISORDER: "Coll"})])


def names(labels):
    return {c.name for c in labels}


class TestFuse:
    def test_redundancy_example(self):
        coarse = CoarsePrediction({"Char": 0.1, "Miss": 0.1, "Redu": 0.9, "Coll": 0.1})
        out = fuse(coarse, FinePrediction({REDUNDANCY_OTHER: 0.8}))
        assert out == {ErrorCategory("Redu"), ErrorCategory("Redu", REDUNDANCY_OTHER)}

    def test_all_zero(self):
        assert fuse(CoarsePrediction({c: 0.0 for c in COARSE}), FinePrediction({f: 0.0 for f in FINE})) == frozenset()

    def test_gate_blocks_fine_without_parent(self):
        coarse = CoarsePrediction({"Redu": 0.1})
        assert fuse(coarse, FinePrediction({REDUNDANCY_OTHER: 0.9})) == frozenset()
        ungated = fuse(coarse, FinePrediction({REDUNDANCY_OTHER: 0.9}), FusionConfig(fine_requires_coarse=False))
        assert names(ungated) == {REDUNDANCY_OTHER}

    def test_pseudo_parent_passes_gate(self):
        out = fuse(CoarsePrediction({"Coll": 0.0}), FinePrediction({MISORDER: 0.7}))
        assert names(out) == {MISORDER}

    def test_mapped_parent_is_gated(self):
        cmap = DEFAULT_CATEGORY_MAP.with_overrides({MISORDER: "Coll"})
        assert fuse(CoarsePrediction({"Coll": 0.2}), FinePrediction({MISORDER: 0.7}), category_map=cmap) == frozenset()

    def test_threshold_is_closed(self):
        cfg = FusionConfig(0.3, 0.6)
        out = fuse(CoarsePrediction({"Redu": 0.3}), FinePrediction({REDUNDANCY_OTHER: 0.6}), cfg)
        assert names(out) == {"Redu", REDUNDANCY_OTHER}
        below = fuse(CoarsePrediction({"Redu": 0.29999}), FinePrediction({REDUNDANCY_OTHER: 0.6}), cfg)
        assert below == frozenset()

    @pytest.mark.parametrize("th", [0.0, 1.0, -0.1, 1.5])
    def test_threshold_domain(self, th):
        with pytest.raises(ConfigError):
            FusionConfig(coarse_threshold=th)

    def test_probability_domain(self):
        with pytest.raises(SchemaError):
            CoarsePrediction({"Char": 1.2})
        with pytest.raises(SchemaError):
            CoarsePrediction({"Word": 0.5})
        with pytest.raises(SchemaError):
            FinePrediction({MISORDER: -0.1})

    @given(coarse_probs, fine_probs, configs, cmaps, st.sampled_from(COARSE + FINE), prob)
    def test_monotone(self, cp, fp, cfg, cmap, which, bump):
        before = fuse(CoarsePrediction(cp), FinePrediction(fp), cfg, cmap)
        cp2, fp2 = dict(cp), dict(fp)
        target = cp2 if which in cp2 else fp2
        target[which] = max(target[which], bump)
        after = fuse(CoarsePrediction(cp2), FinePrediction(fp2), cfg, cmap)
        assert before <= after

    @given(coarse_probs, fine_probs, configs, cmaps)
    def test_gate_invariant(self, cp, fp, cfg, cmap):
        out = fuse(CoarsePrediction(cp), FinePrediction(fp), cfg, cmap)
        coarse_kept = {c.coarse for c in out if c.fine is None}
        for c in out:
            if c.fine is not None:
                assert c.coarse == cmap.parent(c.fine)
                if cfg.fine_requires_coarse and not cmap.is_pseudo(c.coarse):
                    assert c.coarse in coarse_kept

    @given(coarse_probs, fine_probs, configs)
    def test_ungated_is_superset(self, cp, fp, cfg):
        gated = FusionConfig(cfg.coarse_threshold, cfg.fine_threshold, True)
        free = FusionConfig(cfg.coarse_threshold, cfg.fine_threshold, False)
        assert fuse(CoarsePrediction(cp), FinePrediction(fp), gated) <= fuse(CoarsePrediction(cp), FinePrediction(fp), free)


class TestFuseCorpus:
    def test_empty(self):
        r = fuse_corpus([], [])
        assert r.items == [] and r.summary == {"n_items": 0, "label_counts": {}}

    def test_identical_items(self):
        c = [{"id": str(i), "probs": {"Redu": 0.9}} for i in range(4)]
        f = [{"id": str(i), "probs": {REDUNDANCY_OTHER: 0.9}} for i in range(4)]
        r = fuse_corpus(c, f)
        assert len({str(it["labels"]) for it in r.items}) == 1

    @given(st.lists(st.tuples(coarse_probs, fine_probs), max_size=15), configs)
    def test_summary_accounting(self, rows, cfg):
        c = [{"id": str(i), "probs": cp} for i, (cp, _) in enumerate(rows)]
        f = [{"id": str(i), "probs": fp} for i, (_, fp) in enumerate(rows)]
        r = fuse_corpus(c, f[::-1], cfg)
        assert r.summary["n_items"] == len(rows)
        totals = {}
        for it in r.items:
            for lab in it["labels"]:
                name = lab.get("fine") or lab["coarse"]
                totals[name] = totals.get(name, 0) + 1
        assert totals == r.summary["label_counts"]
        assert [it["id"] for it in r.items] == [x["id"] for x in c]

    def test_misaligned(self):
        with pytest.raises(AlignmentError):
            fuse_corpus([{"id": "a", "probs": {}}], [{"id": "b", "probs": {}}])
        with pytest.raises(AlignmentError):
            fuse_corpus([{"id": "a", "probs": {}}] * 2, [{"id": "a", "probs": {}}])
