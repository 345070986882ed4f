from dataclasses import replace

import numpy as np
import pytest

from conftest import smooth_image
from qretinex.decompose import reconstruct
from qretinex.losses import LossWeights
from qretinex.metrics import psnr
from qretinex.quaternion import ShapeError
from qretinex.solver import SolverConfig, SolverDiverged, variational_decompose

RECON_ONLY = LossWeights().only("recon_low", "recon_high")


@pytest.fixture
def pair16(rng):
    s_high = smooth_image(rng, 16, 16)
    return 0.2 * s_high, s_high


def test_recon_only_stays_at_optimum(pair16):
    s_low, s_high = pair16
    res = variational_decompose(s_low, s_high, SolverConfig(max_iters=200, weights=RECON_ONLY))
    assert res.best_total[-1] <= 1e-12
    assert np.all(np.diff(res.best_total) <= 0)
    assert len(res.trace) == len(res.best_total) == res.iterations + 1


@pytest.mark.parametrize("wavelet", [True, False])
def test_wavelet_toggle_reaches_same_optimum(pair16, wavelet):
    s_low, s_high = pair16
    cfg = SolverConfig(max_iters=100, weights=RECON_ONLY, use_wavelet_domain=wavelet)
    res = variational_decompose(s_low, s_high, cfg)
    assert res.best_total[-1] <= 1e-10


def test_default_weights_monotone_best_and_fidelity(pair16):
    s_low, s_high = pair16
    res = variational_decompose(s_low, s_high, SolverConfig(max_iters=300))
    assert np.all(np.diff(res.best_total) <= 0)
    assert res.best_total[-1] == pytest.approx(min(t.total for t in res.trace))
    for pair, s in ((res.pair_low, s_low), (res.pair_high, s_high)):
        assert psnr(s, reconstruct(pair)[0]) >= 45


def test_final_iterate_recovers_after_annealing(pair16):
    s_low, s_high = pair16
    res = variational_decompose(s_low, s_high, SolverConfig(max_iters=400, use_freq_reg=False))
    assert res.trace[-1].recon_low < 1e-3
    assert res.trace[-1].recon_high < 1e-3


@pytest.mark.parametrize(
    "weights",
    [RECON_ONLY, replace(LossWeights(), w_mutual_low=0.0, w_mutual_high=0.0, w_equal_r=0.0)],
    ids=["recon-only", "uncoupled"],
)
def test_uncoupled_solve_ignores_other_image(rng, weights):
    s_low = smooth_image(rng, 12, 12)
    s_high = smooth_image(rng, 12, 12)
    perm = rng.permutation(144)
    shuffled = s_high.reshape(144, 3)[perm].reshape(12, 12, 3)
    cfg = SolverConfig(max_iters=60, weights=weights)
    a = variational_decompose(s_low, s_high, cfg)
    b = variational_decompose(s_low, shuffled, cfg)
    np.testing.assert_array_equal(a.pair_low.q_r, b.pair_low.q_r)
    np.testing.assert_array_equal(a.pair_low.q_i, b.pair_low.q_i)
    assert [t.recon_low for t in a.trace] == [t.recon_low for t in b.trace]


def test_ca_flag_drops_coupling_terms():
    w = SolverConfig(use_cross_attention=False).effective_weights()
    assert w.w_mutual_low == w.w_mutual_high == w.w_equal_r == 0
    assert not w.coupled
    assert SolverConfig(use_freq_reg=False).effective_weights().w_freq == 0
    assert SolverConfig().effective_weights() == LossWeights()


def test_cosine_schedule():
    cfg = SolverConfig(max_iters=10, step_size=0.5)
    assert cfg.step_at(0) == 0.5
    assert cfg.step_at(10) == pytest.approx(0.0, abs=1e-16)
    assert SolverConfig(step_schedule="constant").step_at(7) == 1e-2


@pytest.mark.parametrize(
    "kwargs",
    [{"max_iters": 0}, {"step_size": 0.0}, {"epsilon_black": -1.0}, {"step_schedule": "linear"}],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_training_constants_recorded():
    cfg = SolverConfig()
    assert (cfg.train_optimizer, cfg.train_lr_initial, cfg.train_lr_final) == ("adamw", 3e-4, 1e-7)
    assert (cfg.train_warmup_epochs, cfg.train_epochs, cfg.train_patch_size) == (10, 1000, 256)


def test_dimension_mismatch():
    with pytest.raises(ShapeError):
        variational_decompose(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


def test_divergence_keeps_last_finite_state(rng):
    s = smooth_image(rng, 8, 8)
    cfg = SolverConfig(max_iters=50, step_size=1e200, step_schedule="constant")
    with pytest.raises(SolverDiverged) as info:
        variational_decompose(0.2 * s, s, cfg)
    res = info.value.result
    assert np.all(np.isfinite(res.best_total))
    assert np.all(np.isfinite(res.pair_low.q_r)) and np.all(np.isfinite(res.pair_high.q_i))
