"""
Evaluation metrics
==================

Classification is scored with accuracy, F1 and quadratic weighted kappa;
correction with exact match, character BLEU, edit-level F0.5 and
Levenshtein distance.
"""

# %%
from cefe.metrics import bleu, classification_report, correction_report, edit_f05, extract_edits, qwk

y_true = [0, 0, 1, 1, 2, 2]
y_pred = [0, 1, 1, 2, 2, 2]
rep = classification_report(y_true, y_pred, num_classes=3)
print(rep.metrics, "avg:", round(rep.avg_score, 4))

# %%
# Kappa punishes distant disagreements more than adjacent ones.
print(qwk([0, 2], [1, 1], 3), qwk([0, 2], [2, 0], 3))

# %%
# Edits come from a minimal character alignment.
src, hyp, ref = "我昨天去了了学校。", "我昨天去了学校。", "我昨天去了学校。"
print(extract_edits(src, hyp))
print(edit_f05(src, hyp, ref), round(bleu(hyp, [ref]), 4))

# %%
rep = correction_report([src, "他很高兴的笑了。"], [hyp, "他很高兴的笑了。"], [ref, "他很高兴地笑了。"])
print({k: round(v, 4) for k, v in rep.metrics.items()})
