"""
Color pixels as quaternions
===========================

An RGB pixel becomes the pure quaternion (0, r, g, b). Products of such
quaternions mix the channels, which is the point of the representation.
"""

import numpy as np

from qretinex.quaternion import embed_rgb, hamilton, norm

# two pixels, embedded
img = np.array([[[0.8, 0.4, 0.2], [0.1, 0.5, 0.9]]])
field = embed_rgb(img)
print(field)

# the product of two pure quaternions has a real part -<u, v> and a
# vector part u x v
p, q = field[0, 0], field[0, 1]
print("p q =", hamilton(p, q))
print("q p =", hamilton(q, p))

# norms multiply
print(norm(hamilton(p, q)), norm(p) * norm(q))
