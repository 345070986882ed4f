"""Forward pass of the wavelet-domain decomposition network (numpy, inference only).

Channel plan, for an H x W input with h = ceil(H/2), w = ceil(W/2):

    init pair (4 + 4 components) --Haar--> 32 x h x w
    reflectance branch:  16 -> conv3x3 -> ReLU -> conv3x3 -> width
    illumination branch: 16 -> conv3x3 -> ReLU -> conv3x3 -> width
    symmetric cross-attention (optional), residual per branch
    concat (2*width) -> 1x1 fusion -> 32, plus the packed input as skip
    Laplacian sharpening (residual add) -> inverse Haar -> 8 x H x W
    split into two quaternion fields -> 3x3 box smoothing per component

Weights are random (seeded); training is not implemented.
"""

from dataclasses import dataclass, fields

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import convolve, uniform_filter

from .decompose import EPSILON_BLACK, DecompositionPair, init_illumination, init_reflectance
from .quaternion import ShapeError, as_rgb
from .wavelet import N_PACKED, pack_pair, unpack_pair

LAPLACIAN = np.array([[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]])


@dataclass(frozen=True)
class NetworkConfig:
    width: int = 32
    heads: int = 4
    sharpen_gain: float = 0.1
    smooth_size: int = 3
    use_cross_attention: bool = True
    epsilon_black: float = EPSILON_BLACK


@dataclass
class NetworkWeights:
    conv_r1: np.ndarray  # (width, 16, 3, 3)
    conv_r2: np.ndarray  # (width, width, 3, 3)
    conv_i1: np.ndarray
    conv_i2: np.ndarray
    w_qr: np.ndarray  # (width, width) pointwise projections
    w_kr: np.ndarray
    w_vr: np.ndarray
    w_qi: np.ndarray
    w_ki: np.ndarray
    w_vi: np.ndarray
    w_o: np.ndarray
    w_fuse: np.ndarray  # (32, 2 * width)
    heads: int = 4
    seed: int = 0

    @classmethod
    def random(cls, seed=0, width=32, heads=4, gain=0.1):
        """He-scaled normal weights multiplied by ``gain``."""
        rng = np.random.default_rng(seed)

        def he(shape, fan_in):
            return gain * rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)

        conv1 = (width, N_PACKED, 3, 3)
        conv2 = (width, width, 3, 3)
        return cls(
            conv_r1=he(conv1, 9 * N_PACKED),
            conv_r2=he(conv2, 9 * width),
            conv_i1=he(conv1, 9 * N_PACKED),
            conv_i2=he(conv2, 9 * width),
            **{k: he((width, width), width) for k in ("w_qr", "w_kr", "w_vr", "w_qi", "w_ki", "w_vi", "w_o")},
            w_fuse=he((2 * N_PACKED, 2 * width), 2 * width),
            heads=heads,
            seed=seed,
        )

    @property
    def width(self):
        return self.conv_r1.shape[0]

    def validate(self, cfg=None):
        width = self.width if cfg is None else cfg.width
        expected = {
            "conv_r1": (width, N_PACKED, 3, 3),
            "conv_r2": (width, width, 3, 3),
            "conv_i1": (width, N_PACKED, 3, 3),
            "conv_i2": (width, width, 3, 3),
            "w_fuse": (2 * N_PACKED, 2 * width),
        }
        for k in ("w_qr", "w_kr", "w_vr", "w_qi", "w_ki", "w_vi", "w_o"):
            expected[k] = (width, width)
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        heads = self.heads if cfg is None else cfg.heads
        if heads < 1 or width % heads:
            raise ShapeError(f"{heads} heads do not divide channel width {width}")

    def arrays(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("heads", "seed")}


def conv3x3(x, kernel):
    """'Same' 3x3 convolution (cross-correlation) with zero padding; x is (C, H, W)."""
    padded = np.pad(x, [(0, 0), (1, 1), (1, 1)])
    patches = sliding_window_view(padded, (3, 3), axis=(1, 2))  # (C, H, W, 3, 3)
    return np.einsum("oikl,ihwkl->ohw", kernel, patches)


def pointwise(x, w):
    c, h, wd = x.shape
    return (w @ x.reshape(c, h * wd)).reshape(w.shape[0], h, wd)


def _softmax_rows(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def _attend(q, k, v, heads):
    """Multi-head scaled dot-product attention over flattened positions.

    q, k, v are (C, N); returns the (C, N) aggregation and the per-head
    (N, N) attention matrices.
    """
    c = q.shape[0]
    d = c // heads
    out = np.empty_like(v)
    maps = []
    for h in range(heads):
        rows = slice(h * d, (h + 1) * d)
        a = _softmax_rows(q[rows].T @ k[rows] / np.sqrt(d))
        out[rows] = (a @ v[rows].T).T
        maps.append(a)
    return out, maps


def cross_attention(feat_r, feat_i, weights, heads, return_maps=False):
    """Symmetric cross-attention: each branch queries the other, with residual skips."""
    if feat_r.shape != feat_i.shape:
        raise ShapeError(f"branch features differ: {feat_r.shape} vs {feat_i.shape}")
    c, h, w = feat_r.shape
    if heads < 1 or c % heads:
        raise ShapeError(f"{heads} heads do not divide {c} channels")
    fr = feat_r.reshape(c, h * w)
    fi = feat_i.reshape(c, h * w)
    cross_r, maps_r = _attend(weights.w_qr @ fr, weights.w_ki @ fi, weights.w_vi @ fi, heads)
    cross_i, maps_i = _attend(weights.w_qi @ fi, weights.w_kr @ fr, weights.w_vr @ fr, heads)
    refined_r = feat_r + (weights.w_o @ cross_r).reshape(c, h, w)
    refined_i = feat_i + (weights.w_o @ cross_i).reshape(c, h, w)
    if return_maps:
        return refined_r, refined_i, maps_r, maps_i
    return refined_r, refined_i


def sharpen(x, gain):
    lap = np.stack([convolve(ch, LAPLACIAN, mode="nearest") for ch in x])
    return x + gain * lap


def smooth(field, size):
    return uniform_filter(field, size=(size, size, 1), mode="nearest")


def network_forward(img, weights, cfg=None, return_intermediates=False):
    cfg = cfg or NetworkConfig(width=weights.width, heads=weights.heads)
    weights.validate(cfg)
    img = as_rgb(img)
    height, width = img.shape[:2]

    packed = pack_pair(init_reflectance(img, cfg.epsilon_black), init_illumination(img))
    feat_r = conv3x3(np.maximum(conv3x3(packed[:N_PACKED], weights.conv_r1), 0.0), weights.conv_r2)
    feat_i = conv3x3(np.maximum(conv3x3(packed[N_PACKED:], weights.conv_i1), 0.0), weights.conv_i2)
    if cfg.use_cross_attention:
        feat_r, feat_i = cross_attention(feat_r, feat_i, weights, cfg.heads)
    fused = pointwise(np.concatenate([feat_r, feat_i]), weights.w_fuse) + packed
    sharpened = sharpen(fused, cfg.sharpen_gain)
    q_r, q_i = unpack_pair(sharpened, height, width)
    pair = DecompositionPair(smooth(q_r, cfg.smooth_size), smooth(q_i, cfg.smooth_size))
    if not return_intermediates:
        return pair
    return pair, {
        "packed": packed,
        "feat_r": feat_r,
        "feat_i": feat_i,
        "fused": fused,
        "sharpened": sharpened,
    }
