"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 numerical
failure (non-finite loss, failed gradient check).
"""

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import formats
from .decompose import (
    DecompositionPair,
    analytic_exact_init,
    parallel_init,
    reconstruct,
    ssr_baseline,
)
from .gradcheck import grad_check
from .losses import TERMS
from .metrics import (
    MAX_VARIANCE,
    exact_reflectance,
    mse,
    parallel_init_reflectance,
    psnr,
    rci,
    ssim,
    ssr_reflectance,
)
from .network import NetworkWeights, network_forward
from .quaternion import ShapeError, embed_rgb
from .solver import SolverDiverged, variational_decompose

MAX_NETWORK_SIDE = 128
DEGENERACY_WARNING = (
    "warning: reconstruction is identically zero. Reflectance and illumination are parallel "
    "pure-imaginary fields (the paper-init mode), so their Hamilton product is purely real."
)

ABLATION_ROWS = (
    ("Baseline", dict(use_wavelet_domain=False, use_cross_attention=False, use_freq_reg=False)),
    ("+WT", dict(use_wavelet_domain=True, use_cross_attention=False, use_freq_reg=False)),
    ("+WT+CA", dict(use_wavelet_domain=True, use_cross_attention=True, use_freq_reg=False)),
    ("+WT+CA+FR", dict(use_wavelet_domain=True, use_cross_attention=True, use_freq_reg=True)),
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _out_dir(args, cfg):
    out = Path(args.out if args.out is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args):
    iters = getattr(args, "iters", None)
    if iters is not None and iters < 1:
        raise UsageError("--iters must be at least 1")
    if getattr(args, "config", None):
        return formats.load_config(args.config)
    return formats.RunConfig()


def _check_network_size(img):
    h, w = img.shape[:2]
    if h > MAX_NETWORK_SIDE or w > MAX_NETWORK_SIDE:
        raise UsageError(
            f"network input {h}x{w} exceeds {MAX_NETWORK_SIDE}x{MAX_NETWORK_SIDE} "
            "(attention cost grows with (HW)^2)"
        )


def _network_pair(img, cfg, seed):
    _check_network_size(img)
    weights = NetworkWeights.random(seed, width=cfg.network.width, heads=cfg.network.heads)
    return network_forward(img, weights, cfg.network)


def _write_pair(out, pair, suffix=""):
    for name, f in (("R", pair.q_r), ("I", pair.q_i)):
        formats.save_qrtx(out / f"{name}{suffix}.qrtx", f)
        formats.save_field_pngs(str(out / f"{name}{suffix}"), f)


def _decompose(img, mode, cfg, seed):
    eps = cfg.solver.epsilon_black
    if mode == "exact":
        return analytic_exact_init(img, eps)
    if mode == "paper-init":
        return parallel_init(img, eps)
    if mode == "ssr":
        reflectance, illumination = ssr_baseline(img, cfg.ssr_sigma)
        return DecompositionPair(embed_rgb(reflectance), embed_rgb(illumination))
    return _network_pair(img, cfg, seed)


def cmd_decompose(args):
    cfg = _config(args)
    img = formats.load_png(args.input)
    pair = _decompose(img, args.mode, cfg, cfg.seed if args.seed is None else args.seed)
    out = _out_dir(args, cfg)
    _write_pair(out, pair)
    if args.mode == "paper-init":
        print(DEGENERACY_WARNING, file=sys.stderr)
    print(json.dumps({"mode": args.mode, "height": img.shape[0], "width": img.shape[1], "out": str(out)}))
    return 0


def cmd_reconstruct(args):
    q_r = formats.load_qrtx(args.r)
    q_i = formats.load_qrtx(args.i)
    pair = DecompositionPair(q_r, q_i)
    recon, mean_residue = reconstruct(pair)
    real = pair.q_r[..., 0] * pair.q_i[..., 0] - np.sum(pair.q_r[..., 1:] * pair.q_i[..., 1:], axis=-1)
    out = _out_dir(args, formats.RunConfig())
    formats.save_png(out / "recon.png", recon)
    # Stored fields are f32, so a parallel pair leaves rounding-level imaginary parts.
    if np.max(np.abs(recon)) <= 1e-6 * np.max(np.abs(real)):
        print(DEGENERACY_WARNING, file=sys.stderr)
    print(
        json.dumps(
            {
                "max_abs_real_residue": float(np.max(np.abs(real))),
                "mean_abs_real_residue": mean_residue,
                "out": str(out / "recon.png"),
            }
        )
    )
    return 0


def _load_pair_images(args):
    s_low = formats.load_png(args.low)
    s_high = formats.load_png(args.high)
    if s_low.shape != s_high.shape:
        raise ShapeError(f"--low is {s_low.shape[:2]} but --high is {s_high.shape[:2]}")
    return s_low, s_high


def _write_trace(path, result):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", *TERMS, "total", "best_total"])
        for it, (b, best) in enumerate(zip(result.trace, result.best_total)):
            writer.writerow([it, *(repr(float(getattr(b, t))) for t in TERMS), repr(b.total), repr(float(best))])


def _fidelity(result, s_low, s_high):
    row = {}
    for side, pair, s in (("low", result.pair_low, s_low), ("high", result.pair_high, s_high)):
        recon = reconstruct(pair)[0]
        row[f"psnr_{side}"] = psnr(recon, s)
        row[f"ssim_{side}"] = ssim(recon, s) if min(s.shape[:2]) >= 11 else float("nan")
        row[f"mse_{side}"] = mse(recon, s)
    row["total"] = float(result.best_total[-1])
    row["iterations"] = result.iterations
    return row


def _json_number(x):
    if isinstance(x, float) and not np.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def cmd_solve(args):
    cfg = _config(args)
    solver_cfg = cfg.solver if args.iters is None else replace(cfg.solver, max_iters=args.iters)
    s_low, s_high = _load_pair_images(args)
    out = _out_dir(args, cfg)
    status = 0
    try:
        result = variational_decompose(s_low, s_high, solver_cfg)
    except SolverDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        result = exc.result
        status = 3
    _write_pair(out, result.pair_low, "_low")
    _write_pair(out, result.pair_high, "_high")
    _write_trace(out / "loss_trace.csv", result)
    summary = {k: _json_number(v) for k, v in _fidelity(result, s_low, s_high).items()}
    print(json.dumps(summary))
    return status


def cmd_forward(args):
    cfg = _config(args)
    img = formats.load_png(args.input)
    pair = _network_pair(img, cfg, args.seed)
    out = _out_dir(args, cfg)
    _write_pair(out, pair)
    print(json.dumps({"seed": args.seed, "height": img.shape[0], "width": img.shape[1], "out": str(out)}))
    return 0


def cmd_rci(args):
    cfg = _config(args)
    s_low, s_high = _load_pair_images(args)
    eps = cfg.solver.epsilon_black
    if args.mode == "exact":
        decomposer = exact_reflectance(eps)
    elif args.mode == "paper-init":
        decomposer = parallel_init_reflectance(eps)
    elif args.mode == "ssr":
        decomposer = ssr_reflectance(cfg.ssr_sigma)
    else:
        _check_network_size(s_low)
        weights = NetworkWeights.random(args.seed, width=cfg.network.width, heads=cfg.network.heads)
        decomposer = lambda img: network_forward(img, weights, cfg.network).q_r  # noqa: E731
    alphas = cfg.alphas if args.alphas is None else tuple(float(a) for a in args.alphas.split(","))
    try:
        report = rci(decomposer, s_low, s_high, alphas)
    except ValueError as exc:
        if isinstance(exc, ShapeError):
            raise
        raise UsageError(str(exc)) from exc
    out = _out_dir(args, cfg)
    doc = {"mode": args.mode, **report.as_dict()}
    (out / "rci.json").write_text(json.dumps(doc, indent=2))
    formats.save_png_gray(out / "variance_map.png", report.variance_map.max(axis=-1) / MAX_VARIANCE)
    print(json.dumps(doc))
    return 0


def cmd_metrics(args):
    a = formats.load_png(args.a)
    b = formats.load_png(args.b)
    if a.shape != b.shape:
        raise ShapeError(f"--a is {a.shape[:2]} but --b is {b.shape[:2]}")
    doc = {"mse": mse(a, b), "psnr": _json_number(psnr(a, b))}
    doc["ssim"] = ssim(a, b) if min(a.shape[:2]) >= 11 else None
    print(json.dumps(doc))
    return 0


def cmd_gradcheck(args):
    if not 1 <= args.size <= 16:
        raise UsageError("--size must be between 1 and 16")
    report = grad_check((args.size, args.size), args.seed, args.tol)
    print(json.dumps(report.as_dict(), indent=2))
    return 0 if report.passed else 3


def cmd_ablate(args):
    cfg = _config(args)
    s_low, s_high = _load_pair_images(args)
    out = _out_dir(args, cfg)
    base = cfg.solver if args.iters is None else replace(cfg.solver, max_iters=args.iters)
    rows = []
    status = 0
    for name, flags in ABLATION_ROWS:
        start = time.perf_counter()
        try:
            result = variational_decompose(s_low, s_high, replace(base, **flags))
        except SolverDiverged as exc:
            print(f"error: {name}: {exc}", file=sys.stderr)
            result, status = exc.result, 3
        row = {"row": name, **flags, **_fidelity(result, s_low, s_high)}
        row["seconds"] = time.perf_counter() - start
        rows.append(row)
    with open(out / "ablation.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"{'row':<12}{'PSNR_low':>10}{'SSIM_low':>10}{'MSE_low':>12}{'PSNR_high':>11}{'total':>12}")
    for r in rows:
        print(
            f"{r['row']:<12}{r['psnr_low']:>10.3f}{r['ssim_low']:>10.4f}{r['mse_low']:>12.3e}"
            f"{r['psnr_high']:>11.3f}{r['total']:>12.3e}"
        )
    return status


def build_parser():
    parser = _Parser(prog="qretinex", description="Quaternion Retinex decomposition tools.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", help="split an image into reflectance/illumination fields")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mode", choices=["paper-init", "exact", "network", "ssr"], default="exact")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct", help="Hamilton product of two QRTX fields")
    p.add_argument("--r", required=True)
    p.add_argument("--i", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("solve", help="variational decomposition of a low/normal pair")
    p.add_argument("--low", required=True)
    p.add_argument("--high", required=True)
    p.add_argument("--config")
    p.add_argument("--iters", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("forward", help="network forward pass with seeded random weights")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("rci", help="reflectance consistency index over an illumination sweep")
    p.add_argument("--low", required=True)
    p.add_argument("--high", required=True)
    p.add_argument("--mode", choices=["exact", "paper-init", "ssr", "network"], default="exact")
    p.add_argument("--alphas", help="comma-separated interpolation weights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rci)

    p = sub.add_parser("metrics", help="MSE, PSNR and SSIM between two PNGs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("gradcheck", help="finite-difference check of the loss gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="solver under the four ablation flag rows")
    p.add_argument("--low", required=True)
    p.add_argument("--high", required=True)
    p.add_argument("--config")
    p.add_argument("--iters", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, formats.FormatError, formats.ConfigError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
