"""Seven-term decomposition objective with analytic (sub)gradients.

Terms, each reported unweighted in :class:`LossBreakdown`:

    recon_low, recon_high     mean |imag(Q_R ⊗ Q_I) - S| per image
    mutual_low, mutual_high   same with reflectances swapped between images
    smooth                    edge-aware illumination smoothness, both images
    equal_r                   mean |Q_R_low - Q_R_high| over all 4 components
    freq                      gamma * mean high-frequency DFT magnitude of both
                              reconstructions, summed over color channels

All L1 reductions are means.  Subgradients use sign(0) = 0.
"""

from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from .quaternion import ShapeError, as_field, as_rgb, conjugate, hamilton

TERMS = ("recon_low", "recon_high", "mutual_low", "mutual_high", "smooth", "equal_r", "freq")


@dataclass(frozen=True)
class LossWeights:
    w_recon_low: float = 1.0
    w_recon_high: float = 1.0
    w_mutual_low: float = 0.01
    w_mutual_high: float = 0.01
    w_smooth: float = 0.05
    w_equal_r: float = 0.01
    w_freq: float = 0.01
    gamma: float = 0.01
    smooth_sharpness: float = 10.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def vector(self):
        return np.array([getattr(self, "w_" + t) for t in TERMS])

    def only(self, *terms):
        """Copy with every term weight zero except ``terms`` (set to 1)."""
        zeros = {"w_" + t: (1.0 if t in terms else 0.0) for t in TERMS}
        return LossWeights(**zeros, gamma=self.gamma, smooth_sharpness=self.smooth_sharpness)

    def scaled(self, factor):
        return LossWeights(
            **{"w_" + t: factor * getattr(self, "w_" + t) for t in TERMS},
            gamma=self.gamma,
            smooth_sharpness=self.smooth_sharpness,
        )

    @property
    def coupled(self):
        """True when any term ties the low and high decompositions together."""
        return self.w_mutual_low > 0 or self.w_mutual_high > 0 or self.w_equal_r > 0


@dataclass(frozen=True)
class LossBreakdown:
    recon_low: float = 0.0
    recon_high: float = 0.0
    mutual_low: float = 0.0
    mutual_high: float = 0.0
    smooth: float = 0.0
    equal_r: float = 0.0
    freq: float = 0.0
    total: float = 0.0

    def terms(self):
        return np.array([getattr(self, t) for t in TERMS])

    def __add__(self, other):
        return LossBreakdown(**{k: v + getattr(other, k) for k, v in asdict(self).items()})

    def as_dict(self):
        return asdict(self)


class FieldGradients(NamedTuple):
    r_low: np.ndarray
    i_low: np.ndarray
    r_high: np.ndarray
    i_high: np.ndarray


def _check_same(*arrays):
    shapes = {a.shape[:2] for a in arrays}
    if len(shapes) != 1:
        raise ShapeError(f"dimension mismatch: {sorted(shapes)}")


def _imag_product(q_r, q_i):
    return hamilton(q_r, q_i)[..., 1:]


def _embed_grad(g_rgb):
    g = np.zeros(g_rgb.shape[:2] + (4,))
    g[..., 1:] = g_rgb
    return g


def _product_adjoint(g_rgb, q_r, q_i):
    """Gradients w.r.t. q_r and q_i of <g, imag(q_r ⊗ q_i)>."""
    g = _embed_grad(g_rgb)
    return hamilton(g, conjugate(q_i)), hamilton(conjugate(q_r), g)


# -- individual terms ---------------------------------------------------------


def l1_recon(recon, target):
    recon = as_rgb(recon)
    target = as_rgb(target)
    _check_same(recon, target)
    return float(np.mean(np.abs(recon - target)))


def mutual_recon(pair_low, pair_high, s_low, s_high):
    """L1 errors of the swapped products imag(R_high ⊗ I_low) and imag(R_low ⊗ I_high)."""
    _check_same(pair_low.q_r, pair_high.q_r, s_low, s_high)
    mutual_low = _imag_product(pair_high.q_r, pair_low.q_i)
    mutual_high = _imag_product(pair_low.q_r, pair_high.q_i)
    return l1_recon(mutual_low, s_low), l1_recon(mutual_high, s_high)


def forward_diff(x, axis):
    """Forward difference with a replicated boundary (last slice is zero)."""
    d = np.zeros_like(x)
    src = [slice(None)] * x.ndim
    lo = list(src)
    hi = list(src)
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    d[tuple(lo)] = x[tuple(hi)] - x[tuple(lo)]
    return d


def forward_diff_adjoint(g, axis):
    n = g.shape[axis]
    idx = [slice(None)] * g.ndim
    g = g.copy()
    idx[axis] = n - 1
    g[tuple(idx)] = 0.0
    out = -g
    lo = list(idx)
    hi = list(idx)
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    out[tuple(hi)] += g[tuple(lo)]
    return out


def _gray(field):
    return field[..., 1:].mean(axis=-1)


def _smooth_term(q_i, q_r, sharpness, need_grad):
    i_gray = _gray(q_i)
    r_gray = _gray(q_r)
    n = i_gray.size
    value = 0.0
    g_ig = np.zeros_like(i_gray)
    g_rg = np.zeros_like(r_gray)
    for axis in (0, 1):
        a = forward_diff(i_gray, axis)
        b = forward_diff(r_gray, axis)
        edge = np.exp(-sharpness * np.abs(b))
        value += float(np.sum(np.abs(a) * edge)) / n
        if need_grad:
            g_ig += forward_diff_adjoint(np.sign(a) * edge / n, axis)
            g_rg += forward_diff_adjoint(-sharpness * np.abs(a) * edge * np.sign(b) / n, axis)
    if not need_grad:
        return value, None, None
    g_i = np.zeros(q_i.shape)
    g_r = np.zeros(q_r.shape)
    g_i[..., 1:] = g_ig[..., None] / 3.0
    g_r[..., 1:] = g_rg[..., None] / 3.0
    return value, g_i, g_r


def smoothness(q_i, q_r, sharpness=10.0):
    """Edge-aware smoothness of one illumination field given its reflectance.

    Sum over both axes of mean(|grad I_gray| * exp(-sharpness |grad R_gray|)),
    with gray = mean of the three imaginary components.
    """
    q_i = as_field(q_i)
    q_r = as_field(q_r)
    _check_same(q_i, q_r)
    return _smooth_term(q_i, q_r, sharpness, False)[0]


def equal_r(q_r_low, q_r_high):
    q_r_low = as_field(q_r_low)
    q_r_high = as_field(q_r_high)
    _check_same(q_r_low, q_r_high)
    return float(np.mean(np.abs(q_r_low - q_r_high)))


def _next_pow2(n):
    return 1 << max(0, int(n - 1).bit_length())


def hf_mask(height, width, cutoff=0.25):
    """Centered-spectrum high-frequency selector on an FFT-ordered grid."""
    fu = np.abs(np.fft.fftfreq(height))[:, None]
    fv = np.abs(np.fft.fftfreq(width))[None, :]
    return np.maximum(fu, fv) > cutoff


def _hf_channels(recon, need_grad):
    """Sum over channels of the mean masked |DFT|, with its gradient."""
    h, w = recon.shape[:2]
    ph, pw = _next_pow2(h), _next_pow2(w)
    planes = np.zeros((3, ph, pw))
    planes[:, :h, :w] = np.moveaxis(recon, -1, 0)
    spectrum = np.fft.fft2(planes)
    mask = hf_mask(ph, pw)
    count = int(mask.sum())
    if count == 0:
        return 0.0, (np.zeros(recon.shape) if need_grad else None)
    mag = np.abs(spectrum)
    value = float(np.sum(mag[:, mask]) / count)
    if not need_grad:
        return value, None
    phase = np.divide(np.conj(spectrum), mag, out=np.zeros_like(spectrum), where=mag > 0)
    grad = np.real(np.fft.fft2(phase * mask)) / count
    return value, np.moveaxis(grad[:, :h, :w], 0, -1)


def freq_reg(recon_low, recon_high, gamma=0.01):
    recon_low = as_rgb(recon_low)
    recon_high = as_rgb(recon_high)
    _check_same(recon_low, recon_high)
    return gamma * (_hf_channels(recon_low, False)[0] + _hf_channels(recon_high, False)[0])


# -- assembled objective ------------------------------------------------------


def evaluate_half(pair, s, weights, side, need_grad=False):
    """Terms that depend on one image only: recon, its smooth share, its freq share.

    Returns ``(breakdown, (g_r, g_i))``; the breakdown carries zeros for the
    other side's terms, so two halves and :func:`evaluate_cross` add up to
    the full objective.
    """
    q_r, q_i = pair.q_r, pair.q_i
    s = as_rgb(s)
    _check_same(q_r, q_i, s)
    w_recon = weights.w_recon_low if side == "low" else weights.w_recon_high
    recon = _imag_product(q_r, q_i)
    residual = recon - s
    recon_val = float(np.mean(np.abs(residual)))
    smooth_val, g_i_s, g_r_s = _smooth_term(q_i, q_r, weights.smooth_sharpness, need_grad)
    hf_val, g_hf = _hf_channels(recon, need_grad)
    freq_val = weights.gamma * hf_val

    total = w_recon * recon_val + weights.w_smooth * smooth_val + weights.w_freq * freq_val
    terms = {"recon_" + side: recon_val, "smooth": smooth_val, "freq": freq_val}
    breakdown = LossBreakdown(**terms, total=total)
    if not need_grad:
        return breakdown, None

    g_recon = w_recon * np.sign(residual) / residual.size + weights.w_freq * weights.gamma * g_hf
    g_r, g_i = _product_adjoint(g_recon, q_r, q_i)
    g_r += weights.w_smooth * g_r_s
    g_i += weights.w_smooth * g_i_s
    return breakdown, (g_r, g_i)


def evaluate_cross(pair_low, pair_high, s_low, s_high, weights, need_grad=False):
    """Coupling terms: the two mutual reconstructions and reflectance equality."""
    s_low = as_rgb(s_low)
    s_high = as_rgb(s_high)
    r_lo, i_lo, r_hi, i_hi = pair_low.q_r, pair_low.q_i, pair_high.q_r, pair_high.q_i
    _check_same(r_lo, r_hi, s_low, s_high)

    res_ml = _imag_product(r_hi, i_lo) - s_low
    res_mh = _imag_product(r_lo, i_hi) - s_high
    diff_r = r_lo - r_hi
    ml = float(np.mean(np.abs(res_ml)))
    mh = float(np.mean(np.abs(res_mh)))
    eq = float(np.mean(np.abs(diff_r)))
    total = weights.w_mutual_low * ml + weights.w_mutual_high * mh + weights.w_equal_r * eq
    breakdown = LossBreakdown(mutual_low=ml, mutual_high=mh, equal_r=eq, total=total)
    if not need_grad:
        return breakdown, None

    g_r_hi, g_i_lo = _product_adjoint(
        weights.w_mutual_low * np.sign(res_ml) / res_ml.size, r_hi, i_lo
    )
    g_r_lo, g_i_hi = _product_adjoint(
        weights.w_mutual_high * np.sign(res_mh) / res_mh.size, r_lo, i_hi
    )
    g_eq = weights.w_equal_r * np.sign(diff_r) / diff_r.size
    return breakdown, FieldGradients(g_r_lo + g_eq, g_i_lo, g_r_hi - g_eq, g_i_hi)


def evaluate(pair_low, pair_high, s_low, s_high, weights, need_grad=False):
    low, g_low = evaluate_half(pair_low, s_low, weights, "low", need_grad)
    high, g_high = evaluate_half(pair_high, s_high, weights, "high", need_grad)
    cross, g_cross = evaluate_cross(pair_low, pair_high, s_low, s_high, weights, need_grad)
    # Recompute the total from the summed terms so it is exactly the weighted sum.
    summed = low + high + cross
    breakdown = LossBreakdown(
        **{t: getattr(summed, t) for t in TERMS},
        total=float(weights.vector() @ summed.terms()),
    )
    if not need_grad:
        return breakdown, None
    grads = FieldGradients(
        g_low[0] + g_cross.r_low,
        g_low[1] + g_cross.i_low,
        g_high[0] + g_cross.r_high,
        g_high[1] + g_cross.i_high,
    )
    return breakdown, grads


def total_loss(pair_low, pair_high, s_low, s_high, weights=None):
    return evaluate(pair_low, pair_high, s_low, s_high, weights or LossWeights())[0]


def gradient(pair_low, pair_high, s_low, s_high, weights=None):
    return evaluate(pair_low, pair_high, s_low, s_high, weights or LossWeights(), True)[1]
