import json
import subprocess
import sys

import pytest

from cefe.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VALIDATION, run
from cefe.toy import toy_essays
from cefe.types import save_essays


def error_of(capsys):
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(err)


@pytest.fixture
def essays_file(tmp_path):
    path = tmp_path / "essays.jsonl"
    save_essays(toy_essays(12, seed=3), path)
    return path


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert run(["frobnicate"]) == EXIT_USAGE
        assert error_of(capsys)["error"] == "UsageError"

    def test_missing_subcommand(self, capsys):
        assert run([]) == EXIT_USAGE

    def test_unknown_flag(self, capsys, tmp_path):
        assert run(["gradcheck", "--bogus"]) == EXIT_USAGE

    def test_missing_input_is_runtime(self, capsys, tmp_path):
        assert run(["inject", "--in", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "o.jsonl")]) == EXIT_RUNTIME
        assert error_of(capsys)["error"] == "IoError"

    def test_malformed_input_is_validation(self, capsys, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "a", "text": "好"}\n{oops\n')
        assert run(["inject", "--in", str(bad), "--out", str(tmp_path / "o.jsonl")]) == EXIT_VALIDATION
        err = error_of(capsys)
        assert err["error"] == "ParseError" and "2" in err["message"]

    def test_bad_config_is_validation(self, capsys, tmp_path, essays_file):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("sce: {mu: -1}\n")
        assert run(["gradcheck", "--config", str(cfg)]) == EXIT_VALIDATION

    def test_bad_flag_value_is_validation(self, capsys, essays_file, tmp_path):
        assert run(["inject", "--in", str(essays_file), "--out", str(tmp_path / "o.jsonl"), "--p", "1.5"]) == EXIT_VALIDATION

    def test_gradcheck(self, capsys):
        assert run(["gradcheck", "--trials", "100"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["passed"] and out["max_relative_error"] <= 1e-5

    def test_gradcheck_failure_path(self, capsys):
        assert run(["gradcheck", "--trials", "3", "--tol", "1e-300"]) == EXIT_RUNTIME

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["--version"])
        assert exc.value.code == 0

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "cefe", "nonsense"], capture_output=True, text=True)
        assert proc.returncode == EXIT_USAGE


class TestWorkflow:
    def test_inject_and_pairs(self, tmp_path, essays_file, read_jsonl):
        out, rep = tmp_path / "pairs.jsonl", tmp_path / "inject.json"
        assert run(["inject", "--in", str(essays_file), "--out", str(out), "--p", "0.2", "--seed", "4", "--report", str(rep)]) == 0
        recs = read_jsonl(out)
        report = json.loads(rep.read_text())
        assert len(recs) == report["n_output"] and report["seed"] == 4
        assert report["config"]["cascade"] == {} and "expected_proportions" in report
        assert all(r["source"] != r["target"] for r in recs)

        wc = tmp_path / "wc.jsonl"
        assert run(["pairs", "--strategy", "wrong-correct", "--target", "misorder", "--in", str(out), "--out", str(wc)]) == 0
        rows = read_jsonl(wc)
        assert sum(r["label"] for r in rows) * 2 == len(rows)

    def test_inject_deterministic_across_jobs(self, tmp_path, essays_file):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run(["inject", "--in", str(essays_file), "--out", str(a), "--seed", "1"])
        run(["inject", "--in", str(essays_file), "--out", str(b), "--seed", "1", "--jobs", "3"])
        assert a.read_bytes() == b.read_bytes()

    def test_variant_error_pairs(self, tmp_path, write_jsonl, read_jsonl):
        recs = [{"id": f"t{i}", "text": f"错序{i}", "labels": [{"coarse": "Misorder", "fine": "Misorder"}]} for i in range(5)]
        recs += [{"id": f"o{i}", "text": f"其他{i}", "labels": [{"coarse": "Char"}]} for i in range(9)]
        recs += [{"id": "clean", "text": "干净", "labels": []}]
        src = write_jsonl("labelled.jsonl", recs)
        out, rep = tmp_path / "ve.jsonl", tmp_path / "ve.json"
        assert run(["pairs", "--strategy", "variant-error", "--target", "misorder", "--in", str(src), "--out", str(out), "--report", str(rep)]) == 0
        rows = read_jsonl(out)
        assert sum(r["label"] for r in rows) == 5 and len(rows) == 10
        assert json.loads(rep.read_text())["counts"] == {"0": 5, "1": 5}

    def test_backtranslate_chunk_train_predict_evaluate(self, tmp_path, essays_file, read_jsonl):
        labelled, cache = tmp_path / "labelled.jsonl", tmp_path / "cache.jsonl"
        args = ["backtranslate", "--in", str(essays_file), "--out", str(labelled), "--provider", "sim", "--cache", str(cache), "--seed", "2"]
        assert run(args) == 0
        rows = read_jsonl(labelled)
        assert len(rows) == 36
        # replay from cache alone reproduces the corpus
        replay = tmp_path / "replay.jsonl"
        assert run(["backtranslate", "--in", str(essays_file), "--out", str(replay), "--provider", "cache",
                    "--cache", str(cache), "--cache-provider-id", "sim"]) == 0
        assert replay.read_bytes() == labelled.read_bytes()

        chunks = tmp_path / "chunks.jsonl"
        assert run(["chunk", "--mode", "nsp", "--in", str(labelled), "--out", str(chunks)]) == 0
        crow = read_jsonl(chunks)
        assert all("[SEP]" in r["text"] for r in crow)
        assert {r["label"] for r in crow} == {"Excellent", "Moderate", "Failing"}

        model, trep = tmp_path / "m.npz", tmp_path / "train.json"
        assert run(["train", "--in", str(labelled), "--model", str(model), "--epochs", "3", "--dim", "4096",
                    "--oversample", "--report", str(trep), "--mu", "0.1", "--beta", "1", "--clamp", "-4"]) == 0
        treport = json.loads(trep.read_text())
        assert len(treport["loss_trace"]) == 3 and treport["config"]["train"]["oversample"] is True

        model2 = tmp_path / "m2.npz"
        assert run(["train", "--in", str(labelled), "--model", str(model2), "--epochs", "1", "--dim", "4096", "--init", str(model)]) == 0

        preds = tmp_path / "pred.jsonl"
        assert run(["predict", "--model", str(model2), "--in", str(labelled), "--out", str(preds)]) == 0
        prow = read_jsonl(preds)
        assert len(prow) == 36 and all(abs(sum(r["probs"]) - 1) < 1e-9 for r in prow)

        erep = tmp_path / "eval.json"
        assert run(["evaluate", "--task", "classify", "--pred", str(preds), "--gold", str(labelled), "--report", str(erep),
                    "--external", "B.S.", "0.9"]) == 0
        ev = json.loads(erep.read_text())
        assert {"Acc", "F1", "QWK", "micro_F1", "B.S."} <= set(ev["metrics"]) and "config" in ev and ev["n_items"] == 36

    def test_evaluate_correction(self, tmp_path, write_jsonl, capsys):
        gold = write_jsonl("gold.jsonl", [{"id": "1", "source": "abcde", "target": "aXcYe"}])
        pred = write_jsonl("pred.jsonl", [{"id": "1", "target": "aXcYZ"}])
        assert run(["evaluate", "--task", "correct", "--pred", str(pred), "--gold", str(gold)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["metrics"]["F0.5"] == pytest.approx(0.714286, abs=1e-6)

    def test_evaluate_missing_prediction(self, tmp_path, write_jsonl, capsys):
        gold = write_jsonl("gold.jsonl", [{"id": "1", "label": "Excellent"}, {"id": "2", "label": "Failing"}])
        pred = write_jsonl("pred.jsonl", [{"id": "1", "label": "Excellent"}])
        assert run(["evaluate", "--task", "classify", "--pred", str(pred), "--gold", str(gold)]) == EXIT_VALIDATION

    def test_fuse(self, tmp_path, write_jsonl, read_jsonl):
        coarse = write_jsonl("c.jsonl", [{"id": "a", "probs": {"Redu": 0.9, "Char": 0.2}}, {"id": "b", "probs": {"Redu": 0.1}}])
        fine = write_jsonl("f.jsonl", [{"id": "a", "probs": {"RedundancyOtherConstituents": 0.8}},
                                       {"id": "b", "probs": {"RedundancyOtherConstituents": 0.8}}])
        out, rep = tmp_path / "fused.jsonl", tmp_path / "fuse.json"
        assert run(["fuse", "--coarse", str(coarse), "--fine", str(fine), "--out", str(out), "--report", str(rep)]) == 0
        rows = read_jsonl(out)
        assert [len(r["labels"]) for r in rows] == [2, 0]
        assert run(["fuse", "--coarse", str(coarse), "--fine", str(fine), "--out", str(out), "--no-gate"]) == 0
        assert [len(r["labels"]) for r in read_jsonl(out)] == [2, 1]
        assert run(["fuse", "--coarse", str(coarse), "--fine", str(fine), "--out", str(out), "--coarse-th", "0.95"]) == 0
        assert [len(r["labels"]) for r in read_jsonl(out)] == [0, 0]
        assert json.loads(rep.read_text())["label_counts"] == {"Redu": 1, "RedundancyOtherConstituents": 1}

    def test_fuse_misaligned(self, tmp_path, write_jsonl):
        coarse = write_jsonl("c.jsonl", [{"id": "a", "probs": {}}])
        fine = write_jsonl("f.jsonl", [{"id": "z", "probs": {}}])
        assert run(["fuse", "--coarse", str(coarse), "--fine", str(fine), "--out", str(tmp_path / "o.jsonl")]) == EXIT_VALIDATION

    def test_http_provider_requires_endpoint(self, tmp_path, essays_file):
        assert run(["backtranslate", "--in", str(essays_file), "--out", str(tmp_path / "o.jsonl"), "--provider", "http"]) == EXIT_VALIDATION


class TestPipeline:
    def small(self, out):
        return ["pipeline", "track3", "--provider", "sim", "--seed", "5", "--toy-essays", "40", "--pretrain-epochs", "3",
                "--epochs", "2", "--dim", "4096", "--out-dir", str(out)]

    def test_small_run_is_reproducible(self, tmp_path, capsys):
        assert run(self.small(tmp_path / "a")) == 0
        assert run(self.small(tmp_path / "b")) == 0
        a, b = (tmp_path / "a" / "report.json").read_bytes(), (tmp_path / "b" / "report.json").read_bytes()
        assert a == b
        rep = json.loads(a)
        assert rep["seed"] == 5 and rep["config"]["pretrain"]["epochs"] == 3
        assert len(rep["training"]["pretrain_loss"]) == 3 and len(rep["training"]["finetune_loss"]) == 2
        assert rep["corpus"]["pretrain"]["n_input"] == 20
        assert len(rep["predictions"]) == 30
        assert (tmp_path / "a" / "model.npz").exists()

    def test_supplied_task_data(self, tmp_path, capsys):
        train_f, test_f = tmp_path / "train.jsonl", tmp_path / "test.jsonl"
        save_essays([e.with_label(i % 3) for i, e in enumerate(toy_essays(9, seed=8, prefix="tr"))], train_f)
        save_essays([e.with_label(i % 3) for i, e in enumerate(toy_essays(6, seed=9, prefix="te"))], test_f)
        args = self.small(tmp_path / "o") + ["--task-train", str(train_f), "--task-test", str(test_f)]
        assert run(args) == 0
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert rep["corpus"]["finetune"] == {"n_input": 9, "source": "task_train"}
        assert {p["id"] for p in rep["predictions"]} == {f"te{i:04d}" for i in range(6)}
