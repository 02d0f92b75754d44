"""Command-line entry point: ``cefe <subcommand> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 validation
failure. Errors are written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backtranslation import (
    CacheReplayTranslator,
    HttpTranslator,
    IdentityTranslator,
    TranslationCache,
    label_corpus,
)
from .config import AppConfig, load_config
from .errors import CefeError, ConfigError, SchemaError, ValidationError
from .fusion import fuse_corpus
from .injection import generate_multi_error
from .metrics import classification_report, correction_report
from .model import (
    LabeledFeature,
    featurize,
    gradcheck,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .nsp import NUM_CLASSES, chunk, decide, make_pairs
from .pairs import TARGET_ALIASES, build_variant_error, build_wrong_correct
from .pipeline import essay_examples, predict_essay, run_track3
from .types import (
    Dataset,
    ErrorCategory,
    Essay,
    FluencyLabel,
    Sentence,
    dumps_record,
    load_dataset,
    load_essays,
    save_dataset,
    save_essays,
)

log = logging.getLogger("cefe")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def write_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _sentences_from(ds: Dataset) -> list[Sentence]:
    """Sentence records, or essay records flattened to ``essay_id/sentence_id``."""
    out = []
    for rec in ds:
        if "sentences" in rec:
            e = Essay.from_record(rec)
            out.extend(Sentence(f"{e.id}/{s.id}", s.text) for s in e.sentences)
        elif "text" in rec:
            out.append(Sentence.from_record(rec))
        else:
            raise SchemaError(f"record {rec.get('id')!r} has neither 'text' nor 'sentences'")
    return out


def _labels_of(rec) -> list[ErrorCategory]:
    return [ErrorCategory.from_record(lab) for lab in rec.get("labels") or []]


def _provenance(cfg: AppConfig, **extra) -> dict:
    return {"seed": cfg.seed, "config": cfg.to_dict(), **extra}


# ---------------------------------------------------------------------------
# subcommands


def cmd_inject(args, cfg):
    cascade = cfg.cascade_config(p=args.p, seed=args.seed)
    corpus = _sentences_from(load_dataset(args.inp))
    items, report = generate_multi_error(corpus, cascade, jobs=args.jobs)
    save_dataset(Dataset([it.to_record() for it in items], "pair"), args.out)
    if args.report:
        write_json({**report.to_dict(cascade.p), **_provenance(cfg, cascade={"p": cascade.p, "seed": cascade.seed})}, args.report)
    return EXIT_OK


def cmd_pairs(args, cfg):
    target = TARGET_ALIASES[args.target]
    ds = load_dataset(args.inp)
    if args.strategy == "wrong-correct":
        rows = []
        for rec in ds:
            if "source" in rec or "target" in rec:
                labels = _labels_of(rec)
                if labels and not any(c.fine == target for c in labels):
                    continue
                rows.append({"wrong": rec.get("source"), "correct": rec.get("target")})
            else:
                rows.append({"wrong": rec.get("wrong"), "correct": rec.get("correct")})
        built = build_wrong_correct(rows, target)
    else:
        pos, neg = [], []
        for rec in ds:
            labels = _labels_of(rec)
            if not labels:
                continue
            (pos if any(c.fine == target for c in labels) else neg).append(rec["text"])
        built = build_variant_error(pos, neg, np.random.default_rng(cfg.seed), target)
    records = [{"id": f"{args.strategy}-{i}", **ex.to_record()} for i, ex in enumerate(built.examples)]
    save_dataset(Dataset(records, "any"), args.out)
    if args.report:
        write_json({**built.report(), **_provenance(cfg, strategy=args.strategy, target=target)}, args.report)
    return EXIT_OK


def _translator(args, cfg):
    if args.provider == "sim":
        return cfg.backtrans.simulator(cfg.seed)
    if args.provider == "identity":
        return IdentityTranslator()
    if args.provider == "http":
        if not args.endpoint:
            raise ConfigError("--endpoint is required for the http provider")
        return HttpTranslator(args.endpoint, auth_header=args.auth_header, token_env=args.token_env, timeout=args.timeout)
    if args.provider == "cache":
        if not args.cache:
            raise ConfigError("--cache is required for the cache provider")
        return CacheReplayTranslator(args.cache_provider_id)
    raise ConfigError(f"unknown provider {args.provider!r}")


def cmd_backtranslate(args, cfg):
    translator = _translator(args, cfg)
    cache = TranslationCache(args.cache) if args.cache else None
    essays = load_essays(args.inp)
    labelled, report = label_corpus(essays, cfg.backtrans, translator, cache)
    save_essays(labelled, args.out)
    if args.report:
        write_json({**report.to_dict(), **_provenance(cfg, provider=translator.id)}, args.report)
    return EXIT_OK


def cmd_chunk(args, cfg):
    mode = cfg.features.mode
    records = []
    for e in load_essays(args.inp):
        pairs = make_pairs(e)
        for i, text in enumerate(chunk(e, mode)):
            rec = {"id": f"{e.id}:{i}", "essay_id": e.id, "index": i, "text": text}
            if mode == "nsp":
                rec["left"] = pairs[i].left.id
                rec["right"] = pairs[i].right.id if pairs[i].right is not None else None
            if e.label is not None:
                rec["label"] = e.label.name
            records.append(rec)
    save_dataset(Dataset(records, "any"), args.out)
    return EXIT_OK


def cmd_train(args, cfg):
    essays = load_essays(args.inp)
    data = essay_examples(essays, cfg.features.mode, cfg.features.dim)
    init = None
    if args.init:
        init, _ = load_checkpoint(args.init)
    result = train(data, cfg.train, cfg.sce, num_classes=NUM_CLASSES, init=init)
    extra = {"mode": cfg.features.mode, "aggregation": cfg.features.aggregation}
    save_checkpoint(result.model, args.model, seed=cfg.train.seed, sce=cfg.sce, extra=extra)
    if args.report:
        write_json({"loss_trace": result.loss_trace, "n_examples": len(data), **_provenance(cfg)}, args.report)
    return EXIT_OK


def cmd_predict(args, cfg):
    model, header = load_checkpoint(args.model)
    mode = header.get("mode", cfg.features.mode)
    aggregation = header.get("aggregation", cfg.features.aggregation)
    out = []
    for e in load_essays(args.inp):
        dist = predict_essay(model, e, mode, model.dim, aggregation)
        out.append({"id": e.id, "label": decide(dist).name, "probs": [float(p) for p in dist]})
    save_dataset(Dataset(out, "any"), args.out)
    return EXIT_OK


def _by_id(ds, what):
    out = {}
    for rec in ds:
        if "id" not in rec:
            raise SchemaError(f"{what} record without id")
        out[rec["id"]] = rec
    return out


def cmd_evaluate(args, cfg):
    pred = _by_id(load_dataset(args.pred), "prediction")
    gold = _by_id(load_dataset(args.gold), "gold")
    missing = sorted(set(gold) - set(pred))
    if missing:
        raise SchemaError(f"{len(missing)} gold ids have no prediction, e.g. {missing[:5]}")
    ids = list(gold)
    if args.task == "classify":
        y_true = [int(FluencyLabel.parse(gold[i]["label"])) for i in ids]
        y_pred = [int(FluencyLabel.parse(pred[i]["label"])) for i in ids]
        rep = classification_report(y_true, y_pred, NUM_CLASSES, cfg.metrics.get("classify"))
    else:
        rep = correction_report([gold[i]["source"] for i in ids], [pred[i]["target"] for i in ids],
                                [gold[i]["target"] for i in ids], cfg.metrics.get("correct"))
    for name, value in (args.external or []):
        rep.add_external(name, value)
    payload = {**rep.to_dict(), "task": args.task, "n_items": len(ids), **_provenance(cfg)}
    if args.report:
        write_json(payload, args.report)
    else:
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_fuse(args, cfg):
    result = fuse_corpus(load_dataset(args.coarse), load_dataset(args.fine), cfg.fusion, cfg.category_map)
    save_dataset(Dataset(result.items, "sentence"), args.out)
    if args.report:
        write_json({**result.summary, **_provenance(cfg)}, args.report)
    return EXIT_OK


def cmd_gradcheck(args, cfg):
    res = gradcheck(args.trials, seed=cfg.seed)
    res["tolerance"] = args.tol
    res["passed"] = res["max_relative_error"] <= args.tol
    print(json.dumps(res, sort_keys=True))
    return EXIT_OK if res["passed"] else EXIT_RUNTIME


def cmd_pipeline(args, cfg):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    translator = _translator(args, cfg)
    cache = TranslationCache(args.cache) if args.cache else None
    if args.essays:
        essays = load_essays(args.essays)
    else:
        from .toy import toy_essays

        essays = toy_essays(args.toy_essays, seed=cfg.seed)
    task_train = load_essays(args.task_train) if args.task_train else None
    task_test = load_essays(args.task_test) if args.task_test else None
    report, model = run_track3(essays, cfg, translator, cache, task_train, task_test)
    report["provider"] = translator.id
    report["inputs"] = {"essays": args.essays or f"toy:{args.toy_essays}", "task_train": args.task_train, "task_test": args.task_test}
    save_checkpoint(model, out_dir / "model.npz", seed=cfg.train.seed, sce=cfg.sce,
                    extra={"mode": cfg.features.mode, "aggregation": cfg.features.aggregation})
    write_json(report, out_dir / "report.json")
    print(json.dumps({"report": str(out_dir / "report.json"), **report["evaluation"]}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common(p):
    p.add_argument("--config", help="YAML/JSON config file; flags override it")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("-v", "--verbose", action="store_true")


def _sce_flags(p):
    p.add_argument("--mu", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--clamp", type=float, help="log-zero clamp A (< 0)")


def _train_flags(p):
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-decay", type=float)
    p.add_argument("--oversample", action="store_true", default=None)
    p.add_argument("--mode", choices=["essay", "sentence", "nsp"])
    p.add_argument("--dim", type=int, help="hashing dimension (power of two)")
    p.add_argument("--aggregation", choices=["mean", "vote"])


def _provider_flags(p, default="sim"):
    p.add_argument("--provider", choices=["sim", "http", "cache", "identity"], default=default)
    p.add_argument("--rich", help="resource-rich pivot language")
    p.add_argument("--limit", help="resource-poor pivot language")
    p.add_argument("--rich-rate", type=float, help="simulator noise rate for the rich pivot")
    p.add_argument("--limit-rate", type=float, help="simulator noise rate for the poor pivot")
    p.add_argument("--cache", help="JSONL translation cache")
    p.add_argument("--cache-provider-id", default="http", help="provider id to replay from the cache")
    p.add_argument("--endpoint")
    p.add_argument("--auth-header", default="Authorization")
    p.add_argument("--token-env", default="CEFE_TRANSLATOR_TOKEN", help="env var holding the translator credential")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--retries", type=int)
    p.add_argument("--jobs", type=int, help="concurrent translation requests")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cefe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("inject", help="generate multi-error pseudo data")
    _common(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--p", type=float, help="selection parameter (default 0.2)")
    p.add_argument("--report")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("pairs", help="build fine-grained binary corpora")
    _common(p)
    p.add_argument("--strategy", choices=["wrong-correct", "variant-error"], required=True)
    p.add_argument("--target", choices=sorted(TARGET_ALIASES), required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("backtranslate", help="label essays by round-trip translation")
    _common(p)
    _provider_flags(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_backtranslate)

    p = sub.add_parser("chunk", help="render classifier inputs")
    _common(p)
    p.add_argument("--mode", choices=["essay", "sentence", "nsp"])
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("train", help="train (or continue training) a fluency classifier")
    _common(p)
    _sce_flags(p)
    _train_flags(p)
    p.add_argument("--in", dest="inp", required=True, help="labelled essays JSONL")
    p.add_argument("--model", required=True, help="checkpoint to write")
    p.add_argument("--init", help="checkpoint to warm-start from")
    p.add_argument("--report")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict essay fluency")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold data")
    _common(p)
    p.add_argument("--task", choices=["classify", "correct"], required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--report")
    p.add_argument("--external", nargs=2, action="append", metavar=("NAME", "VALUE"),
                   type=str, help="externally computed metric, e.g. B.S. 0.97")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fuse", help="fuse coarse and fine error predictions")
    _common(p)
    p.add_argument("--coarse", required=True)
    p.add_argument("--fine", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--coarse-th", type=float)
    p.add_argument("--fine-th", type=float)
    p.add_argument("--no-gate", action="store_true", default=None)
    p.add_argument("--report")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("gradcheck", help="check SCE gradients against finite differences")
    _common(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("pipeline", help="run an end-to-end track")
    _common(p)
    _sce_flags(p)
    _train_flags(p)
    _provider_flags(p)
    p.add_argument("track", choices=["track3"])
    p.add_argument("--essays", help="unlabelled seed essays JSONL (default: built-in toy essays)")
    p.add_argument("--toy-essays", type=int, default=600, help="number of toy essays when --essays is absent")
    p.add_argument("--task-train", help="labelled essays for fine-tuning")
    p.add_argument("--task-test", help="labelled essays for evaluation")
    p.add_argument("--pretrain-epochs", type=int)
    p.add_argument("--pretrain-lr", type=float)
    p.add_argument("--out-dir", default="track3_out")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _overrides(args) -> dict:
    g = lambda name: getattr(args, name, None)
    ov = {
        "sce": {"mu": g("mu"), "beta": g("beta"), "clamp": g("clamp")},
        "train": {"epochs": g("epochs"), "batch_size": g("batch_size"), "learning_rate": g("lr"),
                  "lr_decay": g("lr_decay"), "oversample": g("oversample")},
        "pretrain": {"epochs": g("pretrain_epochs"), "learning_rate": g("pretrain_lr")},
        "features": {"mode": g("mode"), "dim": g("dim"), "aggregation": g("aggregation")},
        "backtrans": {"lang_rich": g("rich"), "lang_limit": g("limit"), "rich_rate": g("rich_rate"),
                      "limit_rate": g("limit_rate"), "retries": g("retries"), "jobs": g("jobs") if g("command") != "inject" else None},
        "fusion": {"coarse_threshold": g("coarse_th"), "fine_threshold": g("fine_th"),
                   "fine_requires_coarse": False if g("no_gate") else None},
    }
    if g("seed") is not None:
        ov["seed"] = g("seed")
        if g("command") in ("train", "pipeline"):
            ov["train"]["seed"] = g("seed")
    return ov


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("cefe: a subcommand is required")
    except UsageError as exc:
        _fail("UsageError", str(exc), parser)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        return args.func(args, cfg)
    except ValidationError as exc:
        _fail(type(exc).__name__, str(exc))
        return EXIT_VALIDATION
    except (CefeError, OSError) as exc:
        _fail(type(exc).__name__, str(exc))
        return EXIT_RUNTIME


def _fail(kind, message, parser=None):
    if parser is not None:
        parser.print_usage(sys.stderr)
    sys.stderr.write(dumps_record({"error": kind, "message": message}) + "\n")


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
