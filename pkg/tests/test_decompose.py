import numpy as np
import pytest

from conftest import lit_image
from qretinex.decompose import (
    DecompositionPair,
    analytic_exact_init,
    init_illumination,
    init_reflectance,
    parallel_init,
    reconstruct,
    ssr_baseline,
)
from qretinex.quaternion import IDENTITY, ShapeError, embed_rgb, hamilton


def px(*rgb):
    return np.array(rgb, dtype=float).reshape(1, 1, 3)


def test_init_reflectance_examples():
    np.testing.assert_allclose(init_reflectance(px(0.2, 0.4, 0.8))[0, 0], [0, 0.25, 0.5, 1.0], rtol=1e-15)
    np.testing.assert_array_equal(init_reflectance(px(0.3, 0.3, 0.3))[0, 0], [0, 1, 1, 1])
    np.testing.assert_array_equal(init_reflectance(px(0, 0, 0))[0, 0], [0, 0, 0, 0])


def test_init_reflectance_max_component_is_one(rng):
    img = lit_image(rng, 9, 7)
    r = init_reflectance(img)
    np.testing.assert_array_equal(r[..., 1:].max(axis=-1), 1.0)
    assert np.all(r[..., 0] == 0)


def test_black_threshold():
    img = px(5e-5, 2e-5, 0.0)
    assert not init_reflectance(img, 1e-4).any()
    assert init_reflectance(img, 1e-5)[0, 0, 1] == 1.0


def test_init_illumination():
    np.testing.assert_array_equal(init_illumination(px(0.5, 0.25, 1.0))[0, 0], [0, 0.5, 0.25, 1.0])
    np.testing.assert_array_equal(init_illumination(px(0, 0, 0))[0, 0], [0, 0, 0, 0])
    img = np.random.default_rng(3).uniform(size=(4, 5, 3))
    np.testing.assert_array_equal(init_illumination(img), embed_rgb(img))


def test_exact_init_example():
    pair = analytic_exact_init(px(0.2, 0.4, 0.8))
    np.testing.assert_allclose(pair.q_r[0, 0], [0, 0.25, 0.5, 1.0], rtol=1e-15)
    np.testing.assert_array_equal(pair.q_i[0, 0], [0.8, 0, 0, 0])
    np.testing.assert_allclose(hamilton(pair.q_r, pair.q_i)[0, 0], [0, 0.2, 0.4, 0.8], atol=1e-16)


def test_exact_init_black_pixel():
    pair = analytic_exact_init(px(0, 0, 0))
    assert not pair.q_r.any() and not pair.q_i.any()
    np.testing.assert_array_equal(reconstruct(pair)[0], px(0, 0, 0))


def test_exact_reconstruction(rng):
    img = lit_image(rng, 16, 12)
    recon, residue = reconstruct(analytic_exact_init(img))
    assert np.max(np.abs(recon - img)) <= 1e-12
    assert residue == 0.0


def test_parallel_init_reconstructs_to_zero(rng):
    img = lit_image(rng, 8, 8)
    recon, residue = reconstruct(parallel_init(img))
    assert np.max(np.abs(recon)) <= 1e-15
    assert residue > 0  # all the energy lands in the real part


def test_identity_reflectance():
    q_i = np.random.default_rng(0).normal(size=(3, 3, 4))
    pair = DecompositionPair(np.broadcast_to(IDENTITY, q_i.shape), q_i)
    np.testing.assert_array_equal(reconstruct(pair)[0], q_i[..., 1:])


def test_pair_shape_check():
    with pytest.raises(ShapeError):
        DecompositionPair(np.zeros((2, 2, 4)), np.zeros((2, 3, 4)))


def test_reflectance_intensity_invariance(rng):
    img = lit_image(rng, 10, 10, floor=0.05)
    for c in (0.5, 0.01, 3.0):
        np.testing.assert_allclose(init_reflectance(c * img), init_reflectance(img), rtol=1e-15, atol=0)


def test_ssr_constant_image():
    img = np.full((6, 6, 3), 0.4)
    reflectance, illumination = ssr_baseline(img, 2.0)
    np.testing.assert_allclose(illumination, 0.4, rtol=1e-12)
    np.testing.assert_array_equal(reflectance, 0.5)


def test_ssr_large_sigma_tends_to_mean(rng):
    img = rng.uniform(0.1, 0.9, (12, 16, 3))
    _, illumination = ssr_baseline(img, sigma=10 * 16)
    mean = img.mean(axis=(0, 1))
    assert np.max(np.abs(illumination - mean) / mean) < 0.01


def test_ssr_impulse_peak():
    img = np.full((9, 9, 3), 0.1)
    img[4, 5] = 0.9
    reflectance, _ = ssr_baseline(img, 1.5)
    for c in range(3):
        assert np.unravel_index(np.argmax(reflectance[..., c]), (9, 9)) == (4, 5)


def test_ssr_rejects_bad_sigma():
    with pytest.raises(ValueError):
        ssr_baseline(np.ones((3, 3, 3)), 0.0)
