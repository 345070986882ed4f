"""PNG ingestion, the QRTX quaternion-field format, and JSON run configuration.

QRTX layout (little-endian throughout)::

    offset  size  field
    0       4     magic b"QRTX"
    4       4     version (uint32) = 1
    8       4     height (uint32)
    12      4     width (uint32)
    16      1     channel count (uint8) = 4
    17      ...   float32 planes w, x, y, z; each row-major H x W
"""

import json
import struct
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .losses import LossWeights
from .metrics import DEFAULT_ALPHAS
from .network import NetworkConfig
from .quaternion import as_field, as_rgb
from .solver import SolverConfig

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PNG_COLORTYPES = {0: "grayscale", 2: "RGB", 3: "palette", 4: "grayscale+alpha", 6: "RGBA"}

QRTX_MAGIC = b"QRTX"
QRTX_VERSION = 1
QRTX_HEADER = struct.Struct("<4sIIIB")


class FormatError(ValueError):
    """Malformed or unsupported file contents."""


class ConfigError(ValueError):
    pass


# -- PNG ------------------------------------------------------------------------


def load_png(path):
    """Read an 8-bit RGB or RGBA PNG as float64 (H, W, 3) in [0, 1]; alpha dropped."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(29)
    if len(head) < 29 or head[:8] != PNG_SIGNATURE or head[12:16] != b"IHDR":
        raise FormatError(f"{path}: not a PNG file")
    bit_depth, colortype = head[24], head[25]
    if colortype not in (2, 6):
        name = PNG_COLORTYPES.get(colortype, str(colortype))
        raise FormatError(f"{path}: unsupported colortype {colortype} ({name}); need RGB or RGBA")
    if bit_depth != 8:
        raise FormatError(f"{path}: unsupported bit depth {bit_depth}; need 8")
    with Image.open(path) as im:
        data = np.asarray(im)
    return data[..., :3].astype(np.float64) / 255.0


def quantize(img):
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path, img):
    Image.fromarray(quantize(as_rgb(img))).save(path)


def save_png_gray(path, plane):
    Image.fromarray(quantize(np.asarray(plane, dtype=np.float64))).save(path)


def save_field_pngs(prefix, field_):
    """Imaginary parts as an RGB image and the real part as grayscale, both clamped."""
    field_ = as_field(field_)
    save_png(f"{prefix}.png", field_[..., 1:])
    save_png_gray(f"{prefix}_real.png", field_[..., 0])


# -- QRTX -----------------------------------------------------------------------


def encode_qrtx(field_):
    field_ = as_field(field_)
    h, w = field_.shape[:2]
    header = QRTX_HEADER.pack(QRTX_MAGIC, QRTX_VERSION, h, w, 4)
    planes = np.ascontiguousarray(np.moveaxis(field_, -1, 0), dtype="<f4")
    return header + planes.tobytes()


def decode_qrtx(data):
    if len(data) < QRTX_HEADER.size:
        raise FormatError("short file: truncated header")
    magic, version, h, w, channels = QRTX_HEADER.unpack_from(data)
    if magic != QRTX_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {QRTX_MAGIC!r}")
    if version != QRTX_VERSION:
        raise FormatError(f"version mismatch: file has {version}, expected {QRTX_VERSION}")
    if channels != 4:
        raise FormatError(f"unsupported channel count {channels}, expected 4")
    payload = data[QRTX_HEADER.size :]
    if len(payload) != 4 * h * w * 4:
        raise FormatError(f"payload length mismatch: {len(payload)} bytes for {h}x{w}x4 float32")
    planes = np.frombuffer(payload, dtype="<f4").reshape(4, h, w)
    return np.moveaxis(planes, 0, -1).astype(np.float64)


def save_qrtx(path, field_):
    Path(path).write_bytes(encode_qrtx(field_))


def load_qrtx(path):
    return decode_qrtx(Path(path).read_bytes())


def save_load_qrtx(field_, path):
    save_qrtx(path, field_)
    return load_qrtx(path)


# -- run configuration ------------------------------------------------------------


@dataclass
class RunConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    alphas: tuple = DEFAULT_ALPHAS
    ssr_sigma: float = 15.0
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    seed: int = 0
    out_dir: str = "."


def _section(cls, data, name, exclude=()):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    allowed = {f.name for f in fields(cls)} - set(exclude)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(unknown)}")
    return data


_TOP = {"solver", "weights", "network", "rci", "metrics", "seed", "paths"}


def config_from_dict(data):
    """Build a :class:`RunConfig`; unknown keys raise, missing keys take defaults."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(data) - _TOP)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    try:
        weights = LossWeights(**_section(LossWeights, data.get("weights", {}), "weights"))
        solver = SolverConfig(
            weights=weights,
            **_section(SolverConfig, data.get("solver", {}), "solver", exclude=("weights",)),
        )
        network = NetworkConfig(**_section(NetworkConfig, data.get("network", {}), "network"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    rci = data.get("rci", {})
    metrics = data.get("metrics", {})
    paths = data.get("paths", {})
    for name, section, keys in (
        ("rci", rci, {"alphas", "ssr_sigma"}),
        ("metrics", metrics, {"ssim_window", "ssim_sigma"}),
        ("paths", paths, {"out_dir"}),
    ):
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be an object")
        extra = sorted(set(section) - keys)
        if extra:
            raise ConfigError(f"unknown keys in {name!r}: {', '.join(extra)}")
    cfg = RunConfig(solver=solver, network=network, seed=int(data.get("seed", 0)))
    return replace(
        cfg,
        alphas=tuple(float(a) for a in rci.get("alphas", cfg.alphas)),
        ssr_sigma=float(rci.get("ssr_sigma", cfg.ssr_sigma)),
        ssim_window=int(metrics.get("ssim_window", cfg.ssim_window)),
        ssim_sigma=float(metrics.get("ssim_sigma", cfg.ssim_sigma)),
        out_dir=str(paths.get("out_dir", cfg.out_dir)),
    )


def config_to_dict(cfg):
    solver = asdict(cfg.solver)
    weights = solver.pop("weights")
    return {
        "solver": solver,
        "weights": weights,
        "network": asdict(cfg.network),
        "rci": {"alphas": list(cfg.alphas), "ssr_sigma": cfg.ssr_sigma},
        "metrics": {"ssim_window": cfg.ssim_window, "ssim_sigma": cfg.ssim_sigma},
        "seed": cfg.seed,
        "paths": {"out_dir": cfg.out_dir},
    }


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)
