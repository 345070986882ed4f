"""Finite-difference verification of the analytic loss gradients.

Also carries a direct O(N^4) DFT evaluation of the frequency term and its
gradient, used as an oracle independent of ``numpy.fft``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .decompose import DecompositionPair
from .losses import (
    TERMS,
    LossWeights,
    _gray,
    _hf_channels,
    _imag_product,
    evaluate,
    forward_diff,
    freq_reg,
)

FD_STEP = 1e-6
KINK_TOL = 1e-8
# Relative errors are taken against max(|analytic|, |numeric|, GRAD_FLOOR):
# central differences at h = 1e-6 carry ~1e-10 absolute roundoff.
GRAD_FLOOR = 1e-6


def dft2_direct(x):
    """Unnormalized 2-D DFT by explicit summation over the full index tensor."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape
    u = np.arange(h)[:, None, None, None]
    v = np.arange(w)[None, :, None, None]
    p = np.arange(h)[None, None, :, None]
    q = np.arange(w)[None, None, None, :]
    kernel = np.exp(-2j * np.pi * (u * p / h + v * q / w))
    return np.einsum("uvpq,pq->uv", kernel, x), kernel


def _direct_mask(h, w, cutoff=0.25):
    signed_u = np.array([k if k < h / 2 else k - h for k in range(h)])
    signed_v = np.array([k if k < w / 2 else k - w for k in range(w)])
    mask = np.zeros((h, w), dtype=bool)
    for a in range(h):
        for b in range(w):
            mask[a, b] = max(abs(signed_u[a]) / h, abs(signed_v[b]) / w) > cutoff
    return mask


def freq_reg_direct(recon_low, recon_high, gamma=0.01):
    """Frequency term evaluated with :func:`dft2_direct` on the unpadded grid."""
    total = 0.0
    for recon in (recon_low, recon_high):
        h, w = recon.shape[:2]
        mask = _direct_mask(h, w)
        if not mask.any():
            continue
        for c in range(recon.shape[2]):
            spectrum, _ = dft2_direct(recon[..., c])
            total += np.abs(spectrum[mask]).sum() / mask.sum()
    return gamma * total


def freq_grad_direct(recon, gamma=0.01):
    """Gradient of gamma * sum_c mean_HF |F(recon_c)| w.r.t. ``recon``."""
    h, w = recon.shape[:2]
    mask = _direct_mask(h, w)
    grad = np.zeros(recon.shape)
    for c in range(recon.shape[2]):
        spectrum, kernel = dft2_direct(recon[..., c])
        mag = np.abs(spectrum)
        phase = np.where(mag > 0, np.conj(spectrum) / np.where(mag > 0, mag, 1.0), 0.0)
        weight = np.where(mask, phase, 0.0) / max(int(mask.sum()), 1)
        grad[..., c] = np.real(np.einsum("uv,uvpq->pq", weight, kernel))
    return gamma * grad


# -- finite differences -------------------------------------------------------


def _unflatten(x, shape):
    n = int(np.prod(shape))
    parts = [x[k * n : (k + 1) * n].reshape(shape) for k in range(4)]
    return DecompositionPair(parts[0], parts[1]), DecompositionPair(parts[2], parts[3])


def kink_arguments(pair_low, pair_high, s_low, s_high, weights):
    """Every value fed to |.| or sign(.) by the active terms, flattened."""
    args = []
    r_lo, i_lo, r_hi, i_hi = pair_low.q_r, pair_low.q_i, pair_high.q_r, pair_high.q_i
    if weights.w_recon_low or weights.w_freq:
        args.append(_imag_product(r_lo, i_lo) - s_low)
    if weights.w_recon_high or weights.w_freq:
        args.append(_imag_product(r_hi, i_hi) - s_high)
    if weights.w_mutual_low:
        args.append(_imag_product(r_hi, i_lo) - s_low)
    if weights.w_mutual_high:
        args.append(_imag_product(r_lo, i_hi) - s_high)
    if weights.w_smooth:
        for q_i, q_r in ((i_lo, r_lo), (i_hi, r_hi)):
            for axis in (0, 1):
                args.append(forward_diff(_gray(q_i), axis))
                args.append(forward_diff(_gray(q_r), axis))
    if weights.w_equal_r:
        args.append(r_lo - r_hi)
    return np.concatenate([a.ravel() for a in args]) if args else np.zeros(0)


def finite_difference_check(pair_low, pair_high, s_low, s_high, weights, step=FD_STEP):
    """Compare analytic and central-difference gradients coordinate by coordinate.

    Returns ``(rel_err, skipped)`` arrays over all 4*H*W*4 coordinates.
    Coordinates whose perturbation moves any |.| argument within
    ``KINK_TOL`` of zero, or across it, are skipped.
    """
    shape = pair_low.q_r.shape
    _, grads = evaluate(pair_low, pair_high, s_low, s_high, weights, need_grad=True)
    analytic = np.concatenate([g.ravel() for g in grads])
    x0 = np.concatenate(
        [pair_low.q_r.ravel(), pair_low.q_i.ravel(), pair_high.q_r.ravel(), pair_high.q_i.ravel()]
    )
    args0 = kink_arguments(pair_low, pair_high, s_low, s_high, weights)

    def at(x):
        lo, hi = _unflatten(x, shape)
        return evaluate(lo, hi, s_low, s_high, weights)[0].total, kink_arguments(
            lo, hi, s_low, s_high, weights
        )

    numeric = np.zeros_like(x0)
    skipped = np.zeros(x0.size, dtype=bool)
    for j in range(x0.size):
        x = x0.copy()
        x[j] += step
        f_plus, a_plus = at(x)
        x[j] -= 2 * step
        f_minus, a_minus = at(x)
        numeric[j] = (f_plus - f_minus) / (2 * step)
        moved = a_plus != a_minus
        if np.any(moved):
            near = np.minimum(np.abs(args0[moved]), np.minimum(np.abs(a_plus[moved]), np.abs(a_minus[moved])))
            flipped = np.sign(a_plus[moved]) != np.sign(a_minus[moved])
            skipped[j] = bool(np.any(near < KINK_TOL) or np.any(flipped))
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), GRAD_FLOOR)
    rel_err = np.abs(analytic - numeric) / denom
    return rel_err, skipped


@dataclass
class GradCheckReport:
    dims: tuple
    seed: int
    tolerance: float
    max_rel_err: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    freq_oracle_value_err: Optional[float] = None
    freq_oracle_grad_err: Optional[float] = None

    @property
    def passed(self):
        oracle = [e for e in (self.freq_oracle_value_err, self.freq_oracle_grad_err) if e is not None]
        return all(err < self.tolerance for err in self.max_rel_err.values()) and all(
            e < 1e-9 for e in oracle
        )

    def as_dict(self):
        return {
            "dims": list(self.dims),
            "seed": self.seed,
            "tolerance": self.tolerance,
            "max_rel_err": self.max_rel_err,
            "skipped": self.skipped,
            "freq_oracle_value_err": self.freq_oracle_value_err,
            "freq_oracle_grad_err": self.freq_oracle_grad_err,
            "passed": self.passed,
        }


def random_problem(dims, seed):
    """Random fields in [-1, 1] and random images in [0, 1]."""
    rng = np.random.default_rng(seed)
    h, w = dims
    fields_ = [rng.uniform(-1.0, 1.0, (h, w, 4)) for _ in range(4)]
    s_low = rng.uniform(0.0, 1.0, (h, w, 3))
    s_high = rng.uniform(0.0, 1.0, (h, w, 3))
    return (
        DecompositionPair(fields_[0], fields_[1]),
        DecompositionPair(fields_[2], fields_[3]),
        s_low,
        s_high,
    )


def grad_check(dims=(8, 8), seed=0, tolerance=1e-4, weights=None):
    """Check each term in isolation and the weighted total against finite differences."""
    if dims[0] > 16 or dims[1] > 16:
        raise ValueError("grad_check is limited to 16x16 fields")
    weights = weights or LossWeights()
    pair_low, pair_high, s_low, s_high = random_problem(dims, seed)
    report = GradCheckReport(tuple(dims), seed, tolerance)
    cases = {t: weights.only(t) for t in TERMS}
    cases["total"] = weights
    for name, w in cases.items():
        rel_err, skipped = finite_difference_check(pair_low, pair_high, s_low, s_high, w)
        kept = rel_err[~skipped]
        report.max_rel_err[name] = float(kept.max()) if kept.size else 0.0
        report.skipped[name] = int(skipped.sum())

    if any(n & (n - 1) for n in dims):
        # The fast path zero-pads to a power of two; the direct oracle does not.
        report.freq_oracle_value_err = report.freq_oracle_grad_err = None
        return report
    recon_low = _imag_product(pair_low.q_r, pair_low.q_i)
    recon_high = _imag_product(pair_high.q_r, pair_high.q_i)
    fast = freq_reg(recon_low, recon_high, weights.gamma)
    slow = freq_reg_direct(recon_low, recon_high, weights.gamma)
    report.freq_oracle_value_err = abs(fast - slow) / max(abs(slow), 1e-300)
    fast_grad = weights.gamma * _hf_channels(recon_low, True)[1]
    slow_grad = freq_grad_direct(recon_low, weights.gamma)
    report.freq_oracle_grad_err = float(
        np.max(np.abs(fast_grad - slow_grad)) / max(np.max(np.abs(slow_grad)), 1e-300)
    )
    return report
