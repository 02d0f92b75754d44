"""
Fusing coarse and fine error predictions
========================================

Coarse labels pass when their probability reaches a threshold. A fine
label also needs its coarse parent to pass, unless that parent is a
bucket no coarse model scores.
"""

# %%
from cefe.fusion import CoarsePrediction, FinePrediction, FusionConfig, fuse, fuse_corpus

coarse = CoarsePrediction({"Char": 0.1, "Miss": 0.2, "Redu": 0.9, "Coll": 0.3})
fine = FinePrediction({"RedundancyOtherConstituents": 0.8, "Misorder": 0.6})
print(sorted(c.name for c in fuse(coarse, fine)))

# %%
# Dropping Redu below the threshold removes its fine child as well.
low = CoarsePrediction({"Char": 0.1, "Miss": 0.2, "Redu": 0.4, "Coll": 0.3})
print(sorted(c.name for c in fuse(low, fine)))
print(sorted(c.name for c in fuse(low, fine, FusionConfig(fine_requires_coarse=False))))

# %%
result = fuse_corpus(
    [{"id": "a", "probs": coarse.probs}, {"id": "b", "probs": low.probs}],
    [{"id": "a", "probs": fine.probs}, {"id": "b", "probs": fine.probs}],
)
print(result.summary)
