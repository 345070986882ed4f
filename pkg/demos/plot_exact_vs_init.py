"""
Two ways to initialize a decomposition
======================================

Reflectance starts as the pixel color divided by its channel maximum.
Pairing it with the color itself as illumination gives parallel pure
quaternions, and their product has no color left at all. Pairing it with
the channel maximum as a real scalar reproduces the image exactly.
"""

import numpy as np

from qretinex.decompose import analytic_exact_init, parallel_init, reconstruct

rng = np.random.default_rng(0)
img = rng.uniform(0.05, 1.0, (32, 32, 3))

recon, residue = reconstruct(parallel_init(img))
print("parallel pair: max |color| =", np.abs(recon).max(), " mean |real| =", residue)

recon, residue = reconstruct(analytic_exact_init(img))
print("scalar illumination: max error =", np.abs(recon - img).max(), " mean |real| =", residue)

# Reflectance does not change when the whole image is dimmed.
dim = 0.2 * img
r0 = analytic_exact_init(img).q_r
r1 = analytic_exact_init(dim).q_r
print("reflectance change under dimming:", np.abs(r0 - r1).max())
