"""Per-image variational decomposition: Adam on the analytic loss gradient.

The four fields (reflectance/illumination for the low- and normal-light
images) start from the exact factorization and are optimized either as
packed Haar coefficients or directly in the pixel domain.
"""

from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from .decompose import EPSILON_BLACK, DecompositionPair, analytic_exact_init
from .losses import LossBreakdown, LossWeights, evaluate, evaluate_cross, evaluate_half
from .quaternion import ShapeError, as_rgb
from .wavelet import PackedSubbands, field_adjoint, pack_quaternion, unpack_quaternion


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    step_size: float = 1e-2
    weights: LossWeights = field(default_factory=LossWeights)
    epsilon_black: float = EPSILON_BLACK
    use_wavelet_domain: bool = True
    use_cross_attention: bool = True
    use_freq_reg: bool = True
    seed: int = 0
    convergence_tol: float = 1e-7
    convergence_window: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    # "cosine" anneals the step from step_size to 0 over max_iters; "constant" keeps it fixed.
    step_schedule: str = "cosine"
    # Network-training schedule, recorded for reference; the solver does not use it.
    train_optimizer: str = "adamw"
    train_lr_initial: float = 3e-4
    train_lr_final: float = 1e-7
    train_warmup_epochs: int = 10
    train_epochs: int = 1000
    train_patch_size: int = 256

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.epsilon_black <= 0:
            raise ValueError("epsilon_black must be positive")
        if self.step_schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown step_schedule {self.step_schedule!r}")

    def step_at(self, it):
        if self.step_schedule == "constant":
            return self.step_size
        return 0.5 * self.step_size * (1.0 + np.cos(np.pi * it / self.max_iters))

    def effective_weights(self):
        """Loss weights after the ablation flags.

        Without cross-attention the terms coupling the two images (mutual
        reconstructions, reflectance equality) are dropped; without FR the
        frequency term is dropped.
        """
        w = self.weights
        if not self.use_cross_attention:
            w = replace(w, w_mutual_low=0.0, w_mutual_high=0.0, w_equal_r=0.0)
        if not self.use_freq_reg:
            w = replace(w, w_freq=0.0)
        return w


class SolverDiverged(RuntimeError):
    """Non-finite loss; carries the last finite state."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass
class SolveResult:
    pair_low: DecompositionPair
    pair_high: DecompositionPair
    trace: List[LossBreakdown]
    best_total: np.ndarray  # best-so-far total loss per trace entry
    converged: bool

    @property
    def iterations(self):
        return len(self.trace) - 1


class _Adam:
    def __init__(self, params, cfg):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        lr = c.step_at(self.t)
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)


class _Block:
    """A group of fields optimized together, with its own Adam state and best-so-far."""

    def __init__(self, fields, objective, cfg):
        self.objective = objective
        self.cfg = cfg
        self.height, self.width = fields[0].shape[:2]
        if cfg.use_wavelet_domain:
            self.params = [pack_quaternion(f).channels.copy() for f in fields]
        else:
            self.params = [f.copy() for f in fields]
        self.adam = _Adam(self.params, cfg)
        self.history = []
        self.best_total = np.inf
        self.best_fields = self.fields()
        self.converged = False

    def fields(self):
        if self.cfg.use_wavelet_domain:
            return [
                unpack_quaternion(PackedSubbands(p, self.height, self.width)) for p in self.params
            ]
        return [p.copy() for p in self.params]

    def evaluate(self):
        current = self.fields()
        # Overflow here is reported as divergence by the caller.
        with np.errstate(over="ignore", invalid="ignore"):
            breakdown, grads = self.objective(current)
        return current, breakdown, grads

    def record(self, current, breakdown):
        self.history.append(breakdown.total)
        if breakdown.total < self.best_total:
            self.best_total = breakdown.total
            self.best_fields = current
        k = self.cfg.convergence_window
        if len(self.history) > k:
            ref = self.history[-1 - k]
            if abs(breakdown.total - ref) <= self.cfg.convergence_tol * max(abs(ref), 1e-300):
                self.converged = True

    def step(self, grads):
        if self.cfg.use_wavelet_domain:
            grads = [field_adjoint(g) for g in grads]
        self.adam.step(self.params, grads)


def _pairs(fields):
    return DecompositionPair(fields[0], fields[1]), DecompositionPair(fields[2], fields[3])


def variational_decompose(s_low, s_high, cfg=None):
    """Jointly decompose a low-light / normal-light pair.

    When no loss term couples the two images the problem separates and
    each image is solved on its own, so ``pair_low`` depends on ``s_low``
    alone.
    """
    cfg = cfg or SolverConfig()
    s_low = as_rgb(s_low)
    s_high = as_rgb(s_high)
    if s_low.shape != s_high.shape:
        raise ShapeError(f"image dimensions differ: {s_low.shape[:2]} vs {s_high.shape[:2]}")
    weights = cfg.effective_weights()
    init_low = analytic_exact_init(s_low, cfg.epsilon_black)
    init_high = analytic_exact_init(s_high, cfg.epsilon_black)

    if weights.coupled:

        def objective(fs):
            breakdown, g = evaluate(*_pairs(fs), s_low, s_high, weights, need_grad=True)
            return breakdown, list(g)

        blocks = [
            _Block([init_low.q_r, init_low.q_i, init_high.q_r, init_high.q_i], objective, cfg)
        ]
    else:
        blocks = []
        for init, s, side in ((init_low, s_low, "low"), (init_high, s_high, "high")):

            def objective(fs, s=s, side=side):
                pair = DecompositionPair(fs[0], fs[1])
                breakdown, g = evaluate_half(pair, s, weights, side, need_grad=True)
                return breakdown, list(g)

            blocks.append(_Block([init.q_r, init.q_i], objective, cfg))

    trace, best_total = [], []
    last = {id(b): None for b in blocks}
    failure = None
    for it in range(cfg.max_iters + 1):
        active = [b for b in blocks if not b.converged]
        if not active:
            break
        for b in active:
            current, breakdown, grads = b.evaluate()
            if not np.isfinite(breakdown.total):
                failure = it
                break
            b.record(current, breakdown)
            last[id(b)] = (current, breakdown, grads)
        if failure is not None:
            break
        fields = [f for b in blocks for f in last[id(b)][0]]
        if len(blocks) == 1:
            trace.append(last[id(blocks[0])][1])
        else:
            cross = evaluate_cross(*_pairs(fields), s_low, s_high, weights)[0]
            trace.append(last[id(blocks[0])][1] + last[id(blocks[1])][1] + cross)
        best_total.append(sum(b.best_total for b in blocks))
        if it < cfg.max_iters:
            for b in active:
                if not b.converged:
                    b.step(last[id(b)][2])

    best_fields = [f for b in blocks for f in b.best_fields]
    result = SolveResult(
        *_pairs(best_fields),
        trace,
        np.asarray(best_total),
        all(b.converged for b in blocks),
    )
    if failure is not None:
        raise SolverDiverged(f"non-finite loss at iteration {failure}", result)
    return result
