"""
Texture descriptors: entropy and Hurst coefficient
==================================================

Entropy is the Shannon entropy of the exact intensity histogram; the Hurst
coefficient comes from the slope of a dyadic-lag variogram.
"""

# %%
import numpy as np

from kneetex.synth import entropy_shaped_patch, fbm_patch
from kneetex.texture import entropy, estimate_hurst, hurst

# %%
# Entropy of k equiprobable values is log2 k.
for k in (1, 2, 4, 256):
    px = (np.arange(64 * 64) % k).reshape(64, 64).astype(np.uint16)
    print(f"k={k:4d}  entropy={entropy(px):.6f}  log2 k={np.log2(k):.6f}")

# %%
# Hurst recovery on synthetic fractional Brownian surfaces.
for H in (0.3, 0.5, 0.7):
    est = [hurst(fbm_patch(H, 256, s)) for s in range(5)]
    print(f"H={H}: estimates {np.round(est, 3)}")

# %%
# The full estimate keeps the regression inputs.
e = estimate_hurst(fbm_patch(0.5, 128, 0))
print("lags", e.lags, "slope", round(e.slope, 3), "clamped", e.clamped)

# %%
# Patches with a prescribed entropy, used to plant entropy effects.
p = entropy_shaped_patch(9.5, 70, seed=1)
print("target 9.5 bits ->", round(entropy(p), 4))
