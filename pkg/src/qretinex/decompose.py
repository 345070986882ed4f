"""Closed-form reflectance/illumination initializers and the SSR baseline."""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .quaternion import ShapeError, as_field, as_rgb, embed_rgb, map_hamilton

EPSILON_BLACK = 1e-4


@dataclass(frozen=True)
class DecompositionPair:
    q_r: np.ndarray  # reflectance, (H, W, 4)
    q_i: np.ndarray  # illumination, (H, W, 4)

    def __post_init__(self):
        q_r = as_field(self.q_r)
        q_i = as_field(self.q_i)
        if q_r.shape != q_i.shape:
            raise ShapeError(f"reflectance {q_r.shape} and illumination {q_i.shape} differ")
        object.__setattr__(self, "q_r", q_r)
        object.__setattr__(self, "q_i", q_i)

    @property
    def shape(self):
        return self.q_r.shape[:2]


def init_reflectance(img, epsilon_black=EPSILON_BLACK):
    """Max-normalized color ratios (0, R/M, G/M, B/M); zero where M < epsilon_black."""
    img = as_rgb(img)
    m = img.max(axis=-1, keepdims=True)
    lit = m >= epsilon_black
    ratios = np.divide(img, m, out=np.zeros_like(img), where=lit)
    return embed_rgb(ratios)


def init_illumination(img):
    return embed_rgb(img)


def parallel_init(img, epsilon_black=EPSILON_BLACK):
    """The pure-imaginary initial pair.

    Both fields are parallel pure-imaginary vectors at every pixel, so their
    Hamilton product is purely real: the reconstruction is identically
    zero.  Kept for fidelity; :func:`analytic_exact_init` is what the
    solver starts from.
    """
    return DecompositionPair(init_reflectance(img, epsilon_black), init_illumination(img))


def analytic_exact_init(img, epsilon_black=EPSILON_BLACK):
    """Reflectance ratios paired with a pure-real scalar illumination M.

    A real scalar times a pure-imaginary quaternion scales the vector, so
    ``imag(q_r ⊗ q_i)`` recovers the image exactly wherever M >= epsilon_black.
    """
    img = as_rgb(img)
    m = img.max(axis=-1)
    q_i = np.zeros(img.shape[:2] + (4,))
    q_i[..., 0] = np.where(m >= epsilon_black, m, 0.0)
    return DecompositionPair(init_reflectance(img, epsilon_black), q_i)


def reconstruct(pair):
    """Return (unclamped RGB reconstruction, mean |real residue|)."""
    s_hat = map_hamilton(pair.q_r, pair.q_i)
    return s_hat[..., 1:].copy(), float(np.mean(np.abs(s_hat[..., 0])))


def ssr_baseline(img, sigma, eps=1e-4):
    """Single-scale Retinex: Gaussian surround as illumination, log ratio as reflectance.

    Reflectance is min-max normalized over the whole image; a flat log
    ratio maps to 0.5.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    img = as_rgb(img)
    illumination = np.stack(
        [gaussian_filter(img[..., c], sigma, mode="reflect") for c in range(3)], axis=-1
    )
    log_ratio = np.log(img + eps) - np.log(illumination + eps)
    lo, hi = log_ratio.min(), log_ratio.max()
    if hi - lo < 1e-12:
        reflectance = np.full_like(log_ratio, 0.5)
    else:
        reflectance = (log_ratio - lo) / (hi - lo)
    return reflectance, illumination
