"""Fidelity metrics and the Reflectance Consistency Index."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .decompose import EPSILON_BLACK, analytic_exact_init, init_reflectance, ssr_baseline
from .quaternion import ShapeError

MAX_VARIANCE = 0.25
DEFAULT_ALPHAS = tuple(k / 10 for k in range(11))


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b):
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b):
    """PSNR in dB for unit dynamic range; ``inf`` for identical images."""
    err = mse(a, b)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / err))


def gaussian_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03, data_range=1.0):
    """Mean single-scale SSIM over valid window positions, averaged over channels."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if a.shape[0] < window or a.shape[1] < window:
        raise ShapeError(f"image {a.shape[:2]} smaller than the {window}x{window} window")
    g = gaussian_window(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    def filt(x):
        return np.einsum("hwkl,kl->hw", sliding_window_view(x, g.shape), g)

    scores = []
    for c in range(a.shape[2]):
        x, y = a[..., c], b[..., c]
        mu_x, mu_y = filt(x), filt(y)
        var_x = filt(x * x) - mu_x**2
        var_y = filt(y * y) - mu_y**2
        cov = filt(x * y) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


@dataclass
class RciReport:
    alphas: list
    variance_map: np.ndarray  # (H, W, C) population variance across alphas
    sup_variance: float
    rci: float

    def as_dict(self):
        return {
            "alphas": [float(a) for a in self.alphas],
            "sup_variance": self.sup_variance,
            "rci": self.rci,
            "shape": list(self.variance_map.shape),
        }


def rci(decomposer, s_low, s_normal, alphas=DEFAULT_ALPHAS):
    """Reflectance Consistency Index of ``decomposer`` over an interpolation sweep.

    ``decomposer`` maps an RGB image to an (H, W, C) reflectance array;
    values are clamped to [0, 1] before the per-pixel, per-component
    population variance is taken across alphas.
    """
    s_low, s_normal = _pair(s_low, s_normal)
    alphas = list(alphas)
    if not alphas:
        raise ValueError("alphas must be non-empty")
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ValueError("alphas must lie in [0, 1]")
    stack = []
    for alpha in alphas:
        reflectance = np.asarray(decomposer((1.0 - alpha) * s_low + alpha * s_normal), dtype=np.float64)
        if reflectance.shape[:2] != s_low.shape[:2]:
            raise ShapeError(
                f"decomposer returned {reflectance.shape[:2]} for a {s_low.shape[:2]} image"
            )
        stack.append(np.clip(reflectance, 0.0, 1.0))
    stack = np.stack(stack)
    # Population variance of the samples shifted by the first one: the same
    # estimator as mean(x^2) - mean(x)^2, but exactly zero for constant samples.
    variance = (stack - stack[0]).var(axis=0)
    sup = float(variance.max())
    return RciReport(alphas, variance, sup, 1.0 - sup / MAX_VARIANCE)


# Reflectance extractors usable as RCI decomposers.


def exact_reflectance(epsilon_black=EPSILON_BLACK):
    return lambda img: analytic_exact_init(img, epsilon_black).q_r


def parallel_init_reflectance(epsilon_black=EPSILON_BLACK):
    return lambda img: init_reflectance(img, epsilon_black)


def ssr_reflectance(sigma=15.0):
    return lambda img: ssr_baseline(img, sigma)[0]
