"""
A forward pass through the decomposition network
=================================================

The weights here are random, so the output is not a useful decomposition.
The script shows the shapes along the way and the role of the cross
attention between the two branches.
"""

import numpy as np

from qretinex.network import NetworkConfig, NetworkWeights, network_forward

rng = np.random.default_rng(4)
img = rng.uniform(0.1, 0.9, (16, 16, 3))
weights = NetworkWeights.random(seed=0)

pair, inter = network_forward(img, weights, return_intermediates=True)
for name, x in inter.items():
    print(f"{name:10s} {x.shape}")
print("reflectance", pair.q_r.shape, "illumination", pair.q_i.shape)

off = network_forward(img, weights, NetworkConfig(use_cross_attention=False))
print("effect of cross attention:", np.abs(off.q_r - pair.q_r).max())
