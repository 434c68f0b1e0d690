"""
Gaussian label distributions
============================

A ground-truth angle is quantized to one of 66 three-degree bins and turned
into a discretized Gaussian over bin indices (sigma measured in bins).
"""
import numpy as np

from gldpose.binning import BinningConfig, angle_to_bin, bin_center, expectation_decode
from gldpose.encoding import EncodingConfig, encode_gaussian, fwhm_bins

binning = BinningConfig()  # 66 bins over [-99, 99]
enc = EncodingConfig(sigma=4.0, binning=binning)

# yaw = -30 deg lands in bin 23, whose center is -28.5 deg
gt = angle_to_bin(-30.0, binning)
print("bin", gt, "center", bin_center(gt, binning))

d = encode_gaussian(gt, enc)
print("sum", d.sum(), "peak bin", int(np.argmax(d)), "FWHM (bins)", fwhm_bins(d))

# crude text plot of the distribution around the peak
for k in range(gt - 10, gt + 11):
    print(f"{bin_center(k, binning):7.1f} {'#' * int(round(d[k] * 400))}")

# near the range edge the Gaussian is truncated and renormalized, so the
# expectation is pulled toward the interior
edge = encode_gaussian(1, enc)
print("edge bin center", bin_center(1, binning), "expectation", expectation_decode(edge, binning))

# sigma controls how much mass neighbouring poses receive
for s in (0.5, 1, 2, 4, 8):
    print(f"sigma={s:<4} peak mass {encode_gaussian(33, EncodingConfig(s))[33]:.4f}")
