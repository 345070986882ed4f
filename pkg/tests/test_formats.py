import json
import struct
import zlib

import numpy as np
import pytest
from PIL import Image

from qretinex.formats import (
    ConfigError,
    FormatError,
    RunConfig,
    config_from_dict,
    config_to_dict,
    decode_qrtx,
    encode_qrtx,
    load_config,
    load_png,
    load_qrtx,
    save_field_pngs,
    save_load_qrtx,
    save_png,
)


def write_png(path, rows, colortype, bit_depth=8):
    """Minimal PNG encoder (filter 0 on every row) built from the file-format definition."""
    rows = np.asarray(rows)
    h, w = rows.shape[:2]
    dtype = ">u2" if bit_depth == 16 else "u1"
    raw = b"".join(b"\x00" + rows[i].astype(dtype).tobytes() for i in range(h))

    def chunk(tag, data):
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data))

    ihdr = struct.pack(">IIBBBBB", w, h, bit_depth, colortype, 0, 0, 0)
    path.write_bytes(
        b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b"")
    )


def test_load_png_example(tmp_path):
    px = [[[255, 0, 0], [0, 255, 0]], [[0, 0, 255], [128, 128, 128]]]
    write_png(tmp_path / "a.png", px, 2)
    img = load_png(tmp_path / "a.png")
    assert img.dtype == np.float64 and img.shape == (2, 2, 3)
    np.testing.assert_array_equal(img[0, 0], [1, 0, 0])
    np.testing.assert_array_equal(img[1, 0], [0, 0, 1])
    np.testing.assert_allclose(img[1, 1], 128 / 255, rtol=0)
    assert img[1, 1, 0] == pytest.approx(0.50196, abs=1e-5)


def test_rgba_matches_rgb_twin(tmp_path, rng):
    rgb = rng.integers(0, 256, (3, 4, 3))
    alpha = rng.integers(0, 256, (3, 4, 1))
    write_png(tmp_path / "rgb.png", rgb, 2)
    write_png(tmp_path / "rgba.png", np.concatenate([rgb, alpha], axis=2), 6)
    np.testing.assert_array_equal(load_png(tmp_path / "rgba.png"), load_png(tmp_path / "rgb.png"))


def test_grayscale_rejected(tmp_path):
    write_png(tmp_path / "g.png", np.zeros((2, 2)), 0)
    with pytest.raises(FormatError, match="unsupported colortype"):
        load_png(tmp_path / "g.png")


def test_sixteen_bit_rejected(tmp_path):
    write_png(tmp_path / "d.png", np.zeros((2, 2, 3)), 2, bit_depth=16)
    with pytest.raises(FormatError, match="unsupported bit depth"):
        load_png(tmp_path / "d.png")


def test_not_png_and_missing(tmp_path):
    (tmp_path / "x.png").write_bytes(b"hello")
    with pytest.raises(FormatError):
        load_png(tmp_path / "x.png")
    with pytest.raises(OSError):
        load_png(tmp_path / "missing.png")


def test_png_roundtrip_idempotent(tmp_path, rng):
    img = rng.uniform(size=(5, 6, 3))
    save_png(tmp_path / "a.png", img)
    first = load_png(tmp_path / "a.png")
    np.testing.assert_allclose(first, img, atol=0.5 / 255 + 1e-12)
    save_png(tmp_path / "b.png", first)
    assert (tmp_path / "b.png").read_bytes() == (tmp_path / "a.png").read_bytes()
    np.testing.assert_array_equal(load_png(tmp_path / "b.png"), first)


def test_field_pngs(tmp_path):
    field = np.zeros((2, 3, 4))
    field[..., 0] = 2.0
    field[..., 1] = 0.5
    save_field_pngs(tmp_path / "R", field)
    rgb = np.asarray(Image.open(tmp_path / "R.png"))
    real = np.asarray(Image.open(tmp_path / "R_real.png"))
    assert rgb.shape == (2, 3, 3) and real.shape == (2, 3)
    assert np.all(rgb[..., 0] == 128) and np.all(real == 255)


def test_qrtx_byte_layout():
    data = encode_qrtx(np.array([0.5, 0.25, 0.125, 1.0]).reshape(1, 1, 4))
    expected = (
        b"QRTX"
        + bytes([1, 0, 0, 0])
        + bytes([1, 0, 0, 0])
        + bytes([1, 0, 0, 0])
        + bytes([4])
        + struct.pack("<4f", 0.5, 0.25, 0.125, 1.0)
    )
    assert data == expected
    assert len(data) == 33
    np.testing.assert_array_equal(decode_qrtx(data)[0, 0], [0.5, 0.25, 0.125, 1.0])


def test_qrtx_plane_order():
    field = np.arange(2 * 3 * 4, dtype=float).reshape(2, 3, 4)
    payload = np.frombuffer(encode_qrtx(field)[17:], "<f4")
    np.testing.assert_array_equal(payload[:6], field[..., 0].ravel())
    np.testing.assert_array_equal(payload[18:], field[..., 3].ravel())


def test_qrtx_roundtrip(tmp_path, rng):
    field = rng.uniform(-1, 2, (7, 5, 4))
    back = save_load_qrtx(field, tmp_path / "f.qrtx")
    assert np.max(np.abs(back - field)) <= 6e-8
    exact = field.astype(np.float32).astype(np.float64)
    np.testing.assert_array_equal(save_load_qrtx(exact, tmp_path / "g.qrtx"), exact)
    zero = np.zeros((3, 3, 4))
    np.testing.assert_array_equal(save_load_qrtx(zero, tmp_path / "z.qrtx"), zero)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d[:10], "short file"),
        (lambda d: d[:-1], "payload length mismatch"),
        (lambda d: d + b"\x00", "payload length mismatch"),
        (lambda d: b"QRTY" + d[4:], "bad magic"),
        (lambda d: d[:4] + struct.pack("<I", 2) + d[8:], "version mismatch"),
        (lambda d: d[:16] + bytes([3]) + d[17:], "channel count"),
    ],
)
def test_qrtx_malformed(tmp_path, mutate, message):
    data = mutate(encode_qrtx(np.ones((2, 2, 4))))
    (tmp_path / "bad.qrtx").write_bytes(data)
    with pytest.raises(FormatError, match=message):
        load_qrtx(tmp_path / "bad.qrtx")


def test_config_defaults_and_roundtrip():
    cfg = config_from_dict({})
    assert cfg == RunConfig()
    assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg
    w = cfg.solver.weights
    assert (w.w_recon_low, w.w_smooth, w.w_freq, w.gamma) == (1.0, 0.05, 0.01, 0.01)


def test_config_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(
        json.dumps(
            {
                "solver": {"max_iters": 5, "use_freq_reg": False},
                "weights": {"w_smooth": 0.5},
                "rci": {"alphas": [0, 0.5, 1]},
                "seed": 3,
            }
        )
    )
    cfg = load_config(path)
    assert cfg.solver.max_iters == 5 and not cfg.solver.use_freq_reg
    assert cfg.solver.weights.w_smooth == 0.5 and cfg.solver.weights.w_recon_low == 1.0
    assert cfg.alphas == (0.0, 0.5, 1.0) and cfg.seed == 3


@pytest.mark.parametrize(
    "data",
    [
        {"bogus": 1},
        {"solver": {"iters": 3}},
        {"weights": {"w_other": 1}},
        {"rci": {"sigma": 1}},
        {"solver": {"max_iters": 0}},
        {"solver": []},
        [],
    ],
)
def test_config_rejects(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_config_invalid_json(tmp_path):
    (tmp_path / "c.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.json")
