"""Quaternion arithmetic on numpy arrays.

A quaternion is stored as the last axis of length 4, ordered (w, x, y, z)
with ``w`` the real part.  A single quaternion is a ``(4,)`` array, a
quaternion field is ``(H, W, 4)`` and an RGB image is ``(H, W, 3)`` with
samples in [0, 1].  Everything is float64.
"""

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


class ShapeError(ValueError):
    """Raised when array shapes do not satisfy an operation's contract."""


def as_quaternion(q):
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1:] != (4,):
        raise ShapeError(f"expected trailing axis of length 4, got shape {q.shape}")
    return q


def as_field(f):
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3 or f.shape[2] != 4 or f.shape[0] < 1 or f.shape[1] < 1:
        raise ShapeError(f"quaternion field must be (H, W, 4), got {f.shape}")
    return f


def as_rgb(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ShapeError(f"RGB image must be (H, W, 3), got {img.shape}")
    return img


def hamilton(q1, q2):
    """Hamilton product ``q1 ⊗ q2``, broadcasting over leading axes."""
    q1 = as_quaternion(q1)
    q2 = as_quaternion(q2)
    w1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q2, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def conjugate(q):
    q = as_quaternion(q)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def norm(q):
    q = as_quaternion(q)
    return np.sqrt(np.sum(q * q, axis=-1))


def map_hamilton(a, b):
    """Pixelwise Hamilton product of two quaternion fields of equal size."""
    a = as_field(a)
    b = as_field(b)
    if a.shape != b.shape:
        raise ShapeError(f"field dimensions differ: {a.shape[:2]} vs {b.shape[:2]}")
    return hamilton(a, b)


def embed_rgb(img):
    """Embed an RGB image as the pure-imaginary field (0, R, G, B)."""
    img = as_rgb(img)
    field = np.zeros(img.shape[:2] + (4,))
    field[..., 1:] = img
    return field


def extract_rgb(field, clamp=True):
    """Imaginary parts of a field as an RGB image.

    ``clamp=True`` is for display; loss and metric code passes
    ``clamp=False`` so out-of-range reconstructions keep their gradients.
    """
    field = as_field(field)
    rgb = field[..., 1:].copy()
    if clamp:
        np.clip(rgb, 0.0, 1.0, out=rgb)
    return rgb
