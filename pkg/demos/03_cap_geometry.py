# %% [markdown]
# # Embedding signals as spherical caps
#
# An embedding signal fires inside a cap around its centroid. Two caps meet
# exactly when the angle between centroids is at most the sum of the radii.
# Here we sweep the angle and compare with random sampling.

# %%
import math

import numpy as np

from probpol import SphericalCap, caps_intersect

rng = np.random.default_rng(0)
d = 6
a = np.eye(d)[0]
t = 0.9
radius = math.acos(t)
print(f"cap radius {radius:.4f} rad, sum {2 * radius:.4f}")

# %%
def sampled(ca, cb, t, n=200_000):
    pts = rng.normal(size=(n, d)) * 0.25 + (ca + cb) / 2
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return bool(np.any((pts @ ca >= t) & (pts @ cb >= t)))


# at exactly the radius sum the caps only touch, which sampling cannot hit
for sep in np.linspace(0.5, 1.2, 8) * 2 * radius:
    b = math.cos(sep) * a + math.sin(sep) * np.eye(d)[1]
    rel = caps_intersect(SphericalCap(a, t), SphericalCap(b, t))
    print(f"sep={sep:.4f} exact={rel.intersect!s:5s} sampled={sampled(a, b, t)!s:5s} gap={rel.radius_sum - rel.separation:+.4f}")
