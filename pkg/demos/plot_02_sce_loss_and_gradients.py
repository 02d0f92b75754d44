"""
Symmetric cross entropy
=======================

The loss mixes cross entropy with a reverse term whose ``log 0`` is clamped
to ``A``. The reverse term then reduces to ``-A * (1 - p_target)``, which
is bounded, so confidently mislabelled examples cannot dominate training.
"""

# %%
import numpy as np

from cefe.model import SCEConfig, ce_loss, gradcheck, rce_loss, sce_loss

cfg = SCEConfig(mu=0.1, beta=1.0, clamp=-4.0)
for p_target in (0.99, 0.5, 0.1, 1e-6):
    p = np.array([p_target, 1 - p_target])
    print(f"p_target={p_target:<8} CE={ce_loss(p, 0):8.4f}  RCE={rce_loss(p, 0):6.4f}  SCE={sce_loss(p, 0, cfg):8.4f}")

# %%
# With beta = 0 the loss is plain cross entropy scaled by mu.
p = np.array([0.25, 0.75])
print(sce_loss(p, 1, SCEConfig(mu=1.0, beta=0.0)), ce_loss(p, 1))

# %%
# The analytic gradient of the mean loss agrees with central differences.
res = gradcheck(trials=100, seed=0)
print(f"max relative error over {res['trials']} random models: {res['max_relative_error']:.2e}")
