"""
Losses and their gradients
==========================

The distribution loss is the (unsquared) Euclidean distance plus KL(target || prediction).
Adding alpha times the squared error of the expectation-decoded angle gives
the per-branch training loss. All gradients are closed forms in the logits;
here they are compared against central finite differences.
"""
import numpy as np

from gldpose import gradcheck
from gldpose.binning import BinningConfig
from gldpose.encoding import EncodingConfig, encode_gaussian
from gldpose.losses import LossConfig, euclidean_loss, kl_loss, one_hot_ce_loss, softmax, total_loss

rng = np.random.default_rng(0)
binning = BinningConfig()
target = encode_gaussian(23, EncodingConfig(4.0))
pred = softmax(rng.standard_normal(66))

print("euclidean", euclidean_loss(target, pred))
print("kl       ", kl_loss(target, pred))
print("one-hot CE against bin 23", one_hot_ce_loss(23, pred))

# a batch of 4 samples, three branches
logits = tuple(rng.standard_normal((3, 4, 66)))
targets = tuple(encode_gaussian(rng.integers(66, size=4), EncodingConfig(4.0)) for _ in range(3))
pose = rng.uniform(-60, 60, size=(4, 3))
for alpha in (0, 0.01, 0.1, 1, 2):
    loss, grads = total_loss(logits, targets, pose, LossConfig(alpha=alpha), binning)
    print(f"alpha={alpha:<5} total loss {loss:10.3f}  |grad|_max {max(np.abs(g).max() for g in grads):.3f}")

# finite-difference check (what `gldpose gradcheck` runs)
for name, err in gradcheck.run_all(trials=10).items():
    print(f"{name:<12} max relative error {err:.2e}")
