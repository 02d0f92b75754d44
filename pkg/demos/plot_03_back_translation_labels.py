"""
Fluency labels from round-trip translation
==========================================

Each essay yields three training examples: the original (Excellent), a
round trip through a well-resourced pivot (Moderate) and one through a
poorly resourced pivot (Failing). Offline, a noise simulator stands in for
machine translation.
"""

# %%
import numpy as np

from cefe.backtranslation import BacktransConfig, label_corpus
from cefe.metrics import levenshtein
from cefe.toy import toy_essays

essays = toy_essays(20, seed=3)
cfg = BacktransConfig(rich_rate=0.05, limit_rate=0.25)
labelled, report = label_corpus(essays, cfg, cfg.simulator(seed=3))
print(report.label_counts)

# %%
for e in labelled[:3]:
    print(f"{e.label.name:<9} {e.text[:40]}")

# %%
# The simulated damage grows with the pivot's noise rate.
source = {e.id: e.text for e in essays}
for label in ("Excellent", "Moderate", "Failing"):
    d = [levenshtein(source[e.id.split("#")[0]], e.text) for e in labelled if e.label.name == label]
    print(f"{label:<9} mean edit distance {np.mean(d):6.1f}")
