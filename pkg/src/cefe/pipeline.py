"""Glue between the stages: essays -> classifier inputs -> model -> essay decisions."""

from __future__ import annotations

import numpy as np

from .backtranslation import TranslationCache, label_corpus
from .config import AppConfig
from .errors import SchemaError
from .metrics import classification_report
from .model import LabeledFeature, SoftmaxModel, TrainConfig, featurize, predict, train
from .nsp import NUM_CLASSES, aggregate, chunk, decide


def essay_examples(essays, mode, dim: int) -> list[LabeledFeature]:
    """Classifier training rows; every chunk inherits its essay's label."""
    out = []
    for e in essays:
        if e.label is None:
            raise SchemaError(f"essay {e.id!r} has no fluency label")
        out.extend(LabeledFeature(featurize(x, dim), int(e.label)) for x in chunk(e, mode))
    return out


def predict_essay(model: SoftmaxModel, essay, mode, dim: int, aggregation: str = "mean") -> np.ndarray:
    dists = [predict(model, featurize(x, dim)) for x in chunk(essay, mode)]
    return aggregate(dists, aggregation)


def split_essays(essays, seed: int, fractions=(0.5, 0.25, 0.25)):
    """Seeded shuffle, then consecutive slices sized by ``fractions``."""
    essays = list(essays)
    order = np.random.default_rng(seed).permutation(len(essays))
    bounds = np.floor(np.cumsum(fractions) * len(essays)).astype(int)
    bounds[-1] = len(essays)
    parts, start = [], 0
    for stop in bounds:
        parts.append([essays[i] for i in order[start:stop]])
        start = stop
    return parts


def run_track3(essays, cfg: AppConfig, translator, cache: TranslationCache | None = None,
               task_train=None, task_test=None) -> tuple[dict, SoftmaxModel]:
    """Back-translate, pre-train, fine-tune and evaluate a fluency classifier.

    ``essays`` are unlabelled seed essays. They are split into a pre-training
    part, whose back-translated corpus pre-trains the model, and, unless
    labelled ``task_train``/``task_test`` essays are supplied, a fine-tuning
    and a held-out test part labelled the same way.
    """
    mode, dim = cfg.features.mode, cfg.features.dim
    pre_essays, ft_essays, test_essays = split_essays(essays, cfg.seed)
    if task_train is not None:
        pre_essays = pre_essays + ft_essays

    pre_corpus, pre_rep = label_corpus(pre_essays, cfg.backtrans, translator, cache)
    if task_train is None:
        task_train, ft_rep = label_corpus(ft_essays, cfg.backtrans, translator, cache)
    else:
        ft_rep = None
    if task_test is None:
        task_test, test_rep = label_corpus(test_essays, cfg.backtrans, translator, cache)
    else:
        test_rep = None

    pre_tc = TrainConfig(epochs=cfg.pretrain.epochs, batch_size=cfg.train.batch_size,
                         learning_rate=cfg.pretrain.learning_rate, seed=cfg.train.seed, lr_decay=cfg.train.lr_decay)
    pre = train(essay_examples(pre_corpus, mode, dim), pre_tc, cfg.sce, num_classes=NUM_CLASSES)
    ft_tc = TrainConfig(epochs=cfg.train.epochs, batch_size=cfg.train.batch_size,
                        learning_rate=cfg.train.learning_rate, seed=cfg.train.seed + 1,
                        oversample=cfg.train.oversample, lr_decay=cfg.train.lr_decay)
    ft = train(essay_examples(task_train, mode, dim), ft_tc, cfg.sce, num_classes=NUM_CLASSES, init=pre.model)

    y_true, y_pred, predictions = [], [], []
    for e in task_test:
        dist = predict_essay(ft.model, e, mode, dim, cfg.features.aggregation)
        label = decide(dist)
        y_true.append(int(e.label))
        y_pred.append(int(label))
        predictions.append({"id": e.id, "label": label.name, "gold": e.label.name, "probs": [round(float(p), 12) for p in dist]})
    metrics = classification_report(y_true, y_pred, NUM_CLASSES, cfg.metrics.get("classify"))

    report = {
        "task": "track3",
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "corpus": {
            "pretrain": pre_rep.to_dict(),
            "finetune": ft_rep.to_dict() if ft_rep else {"n_input": len(task_train), "source": "task_train"},
            "test": test_rep.to_dict() if test_rep else {"n_input": len(task_test), "source": "task_test"},
        },
        "training": {
            "pretrain_loss": pre.loss_trace,
            "finetune_loss": ft.loss_trace,
        },
        "evaluation": metrics.to_dict(),
        "predictions": predictions,
    }
    return report, ft.model
