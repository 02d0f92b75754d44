"""
Multi-error pseudo data
=======================

Clean sentences are corrupted with one to four errors of distinct types.
The number of errors per sentence follows ``1 + Binomial(3, p)``.
"""

# %%
import numpy as np

from cefe.injection import CascadeConfig, expected_proportions, generate_multi_error, replay
from cefe.toy import toy_sentence
from cefe.types import Sentence

rng = np.random.default_rng(0)
corpus = [Sentence(f"s{i}", toy_sentence(rng)) for i in range(5000)]
print(corpus[0].text)

# %%
# Expected share of sentences with 1, 2, 3 and 4 errors at p = 0.2.
print(np.round(expected_proportions(0.2), 3))

# %%
# Generate, then compare the empirical histogram with the expectation.
cfg = CascadeConfig(p=0.2, seed=1)
items, report = generate_multi_error(corpus, cfg)
observed = np.array([report.histogram[i] for i in range(1, 5)]) / len(items)
print("observed:", np.round(observed, 3), "skipped:", len(report.skipped_ids))

# %%
# Each item keeps its ops; replaying them on the clean text gives the corrupted one.
item = max(items, key=lambda it: it.error_count)
print(item.source.text)
print(item.corrupted)
for op in item.ops:
    print(f"  {op.category.name:<10} {op.kind.value:<20} span={op.span} -> {op.replacement!r}")
assert replay(item.ops, item.source.text) == item.corrupted
