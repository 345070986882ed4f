import numpy as np
import pytest
from scipy.ndimage import gaussian_filter


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_image(rng, h, w, sigma=4.0, lo=0.1, hi=0.9):
    """Random smooth RGB image with values in [lo, hi]."""
    planes = [gaussian_filter(rng.uniform(size=(h, w)), sigma, mode="wrap") for _ in range(3)]
    img = np.stack(planes, axis=-1)
    img = (img - img.min()) / (img.max() - img.min())
    return lo + (hi - lo) * img


def lit_image(rng, h, w, floor=1 / 255):
    """Random image whose per-pixel channel maximum is at least ``floor``."""
    img = rng.uniform(0.0, 1.0, (h, w, 3))
    m = img.max(axis=-1, keepdims=True)
    return np.where(m < floor, img + floor, img)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
