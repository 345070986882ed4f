"""Single-level orthonormal 2-D Haar transform and quaternion subband packing.

Each 2x2 block ``[[a, b], [c, d]]`` maps to

    LL = (a + b + c + d) / 2      HL = (a - b + c - d) / 2
    LH = (a + b - c - d) / 2      HH = (a - b - c + d) / 2

Odd heights/widths are padded by one symmetric sample on the bottom/right
before the transform and cropped again on inversion.

A packed quaternion field holds 16 channels in the fixed order
(w, x, y, z) x (LL, LH, HL, HH); two packed fields concatenate to the
32-channel wavelet-domain representation used by the network.
"""

from dataclasses import dataclass

import numpy as np

from .quaternion import ShapeError, as_field

SUBBANDS = ("ll", "lh", "hl", "hh")
COMPONENTS = ("w", "x", "y", "z")
N_PACKED = len(COMPONENTS) * len(SUBBANDS)


def haar_analysis(x):
    """Haar analysis over the last two (even) axes.

    Returns an array of shape ``(..., 4, H/2, W/2)`` with the subband axis
    ordered LL, LH, HL, HH.
    """
    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]
    return 0.5 * np.stack(
        [a + b + c + d, a + b - c - d, a - b + c - d, a - b - c + d], axis=-3
    )


def haar_synthesis(coeffs):
    """Inverse of :func:`haar_analysis`; also its adjoint (orthonormal)."""
    ll, lh, hl, hh = np.moveaxis(coeffs, -3, 0)
    h2, w2 = ll.shape[-2:]
    out = np.empty(ll.shape[:-2] + (2 * h2, 2 * w2))
    out[..., 0::2, 0::2] = 0.5 * (ll + lh + hl + hh)
    out[..., 0::2, 1::2] = 0.5 * (ll + lh - hl - hh)
    out[..., 1::2, 0::2] = 0.5 * (ll - lh + hl - hh)
    out[..., 1::2, 1::2] = 0.5 * (ll - lh - hl + hh)
    return out


def padding_for(height, width):
    return height % 2, width % 2


def pad_even(x):
    """Symmetric-pad the last two axes up to even length."""
    pr, pc = padding_for(*x.shape[-2:])
    if not (pr or pc):
        return x
    widths = [(0, 0)] * (x.ndim - 2) + [(0, pr), (0, pc)]
    return np.pad(x, widths, mode="symmetric")


@dataclass(frozen=True)
class SubbandSet:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray

    def stack(self):
        return np.stack([self.ll, self.lh, self.hl, self.hh])

    def energy(self):
        return float(sum(np.sum(band**2) for band in (self.ll, self.lh, self.hl, self.hh)))


def dwt2_haar(plane):
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or plane.size == 0:
        raise ShapeError(f"expected a non-empty 2-D plane, got shape {plane.shape}")
    return SubbandSet(*haar_analysis(pad_even(plane)))


def idwt2_haar(subbands, original_dims):
    height, width = original_dims
    coeffs = subbands.stack()
    shapes = {band.shape for band in coeffs}
    expected = ((height + 1) // 2, (width + 1) // 2)
    if len(shapes) != 1 or coeffs.shape[1:] != expected:
        raise ShapeError(
            f"subbands of shape {coeffs.shape[1:]} cannot restore a {height}x{width} plane"
        )
    return haar_synthesis(coeffs)[:height, :width]


@dataclass(frozen=True)
class PackedSubbands:
    """16 Haar channels of one quaternion field plus the metadata to undo padding."""

    channels: np.ndarray  # (16, ceil(H/2), ceil(W/2))
    height: int
    width: int

    @property
    def padding(self):
        return padding_for(self.height, self.width)

    def __len__(self):
        return self.channels.shape[0]

    def channel(self, component, subband):
        return self.channels[4 * COMPONENTS.index(component) + SUBBANDS.index(subband)]


def pack_quaternion(field):
    field = as_field(field)
    height, width = field.shape[:2]
    planes = pad_even(np.moveaxis(field, -1, 0))  # (4, H', W')
    coeffs = haar_analysis(planes)  # (4, 4, h2, w2)
    return PackedSubbands(coeffs.reshape((N_PACKED,) + coeffs.shape[-2:]), height, width)


def unpack_quaternion(packed):
    channels = np.asarray(packed.channels, dtype=np.float64)
    if channels.ndim != 3 or channels.shape[0] != N_PACKED:
        raise ShapeError(f"expected {N_PACKED} packed channels, got shape {channels.shape}")
    expected = ((packed.height + 1) // 2, (packed.width + 1) // 2)
    if channels.shape[1:] != expected:
        raise ShapeError(
            f"channel size {channels.shape[1:]} inconsistent with {packed.height}x{packed.width}"
        )
    planes = haar_synthesis(channels.reshape((4, 4) + expected))
    return np.moveaxis(planes[:, : packed.height, : packed.width], 0, -1).copy()


def pack_pair(q_r, q_i):
    """The 32-channel stack: 16 reflectance channels followed by 16 illumination."""
    return np.concatenate([pack_quaternion(q_r).channels, pack_quaternion(q_i).channels])


def unpack_pair(channels, height, width):
    if channels.shape[0] != 2 * N_PACKED:
        raise ShapeError(f"expected {2 * N_PACKED} channels, got {channels.shape[0]}")
    q_r = unpack_quaternion(PackedSubbands(channels[:N_PACKED], height, width))
    q_i = unpack_quaternion(PackedSubbands(channels[N_PACKED:], height, width))
    return q_r, q_i


def field_adjoint(grad_field):
    """Pull a pixel-domain gradient back onto packed coefficients.

    The synthesis path is ``crop(haar_synthesis(c))``; its adjoint is
    zero-padding followed by analysis (the orthonormal synthesis is
    adjoint to analysis).  Note zero padding here, not symmetric.
    """
    grad_field = as_field(grad_field)
    pr, pc = padding_for(*grad_field.shape[:2])
    planes = np.moveaxis(grad_field, -1, 0)
    if pr or pc:
        planes = np.pad(planes, [(0, 0), (0, pr), (0, pc)])
    coeffs = haar_analysis(planes)
    return coeffs.reshape((N_PACKED,) + coeffs.shape[-2:])
