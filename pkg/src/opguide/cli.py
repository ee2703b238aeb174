"""Command-line entry points tying the pipeline together.

Subcommands: upsample, denoise, add-noise, downsample, psnr, validate,
dump-weights.  Every tunable flag may also come from a flat key=value config
file (--config); explicit flags override the file, the file overrides built-in
defaults.  CSV output uses ',' separators, '.' decimal points, and
newline-terminated rows.

Exit codes: 0 when every CG run converged to tolerance, 2 when a run stopped
at the iteration cap, 1 on any error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import Image, flatten
from .guidance import (
    KernelParams,
    build_guiding_operator,
    build_weights,
    dump_weights,
    sinkhorn_balance,
)
from .image_io import load_image, save_image
from .metrics import NoiseSpec, add_noise, psnr
from .reconstruct import ReconstructionConfig, reconstruct_image
from .sampling import SamplingOperator, downsample, upsample_adjoint
from .solver import CgControls
from .synthetic import blocks_scene
from .validation import assemble_dense, schur_limit_check

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_ITER = 2


class CliError(ValueError):
    pass


_DEFAULTS = {
    "factor": "4",
    "offset": "0",
    "init": "bilinear",
    "kernel": "bilateral",
    "radius": 3,
    "sigma_spatial": 2.0,
    "sigma_range": 0.2,
    "epsilon": 1e-4,
    "poly_degree": 1,
    "sinkhorn_tol": 1e-8,
    "sinkhorn_iters": 100,
    "cg_iters": 100,
    "cg_tol": 1e-8,
    "cg_history": None,
    "rho_pre": 0.0,
    "rho_post": 0.0,
    "pre_mode": "projected",
    "adjust_dc": False,
    "variance": 0.01,
    "seed": 0,
    "size": 8,
    "rho": "1e-1,1e-2,1e-3,1e-4",
    "bit_depth": 8,
    "raw": False,
}

_BOOL_KEYS = {"adjust_dc", "raw"}
_INT_KEYS = {"radius", "poly_degree", "sinkhorn_iters", "cg_iters", "seed", "size", "bit_depth"}
_FLOAT_KEYS = {
    "sigma_spatial",
    "sigma_range",
    "epsilon",
    "sinkhorn_tol",
    "cg_tol",
    "rho_pre",
    "rho_post",
    "variance",
}


def _coerce(key: str, raw: str):
    if key in _BOOL_KEYS:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise CliError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError as err:
        raise CliError(f"config key {key!r}: {err}") from err
    return raw


def load_config(path: str | Path) -> dict:
    """Flat key=value file; '#' starts a comment, keys mirror the CLI flags."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise CliError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _DEFAULTS:
            raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


class _Settings:
    """Three-layer lookup: CLI flag, then config file, then built-in default."""

    def __init__(self, args: argparse.Namespace):
        self._args = args
        config_path = getattr(args, "config", None)
        self._config = load_config(config_path) if config_path else {}

    def __getattr__(self, name: str):
        value = getattr(self._args, name, None)
        if value is None:
            value = self._config.get(name)
        if value is None:
            value = _DEFAULTS[name]
        return value


def _int_pair(value, what: str) -> int | tuple[int, int]:
    if isinstance(value, int):
        return value
    parts = str(value).split(",")
    try:
        if len(parts) == 1:
            return int(parts[0])
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise CliError(f"{what} must be an integer or x,y pair, got {value!r}")


def _kernel_params(s: _Settings) -> KernelParams:
    return KernelParams(
        kind=s.kernel,
        radius=s.radius,
        sigma_spatial=s.sigma_spatial,
        sigma_range=s.sigma_range,
        epsilon=s.epsilon,
    )


def _recon_config(s: _Settings, factor) -> ReconstructionConfig:
    return ReconstructionConfig(
        factor=factor,
        offset=_int_pair(s.offset, "--offset"),
        kernel=_kernel_params(s),
        poly_degree=s.poly_degree,
        cg=CgControls(
            max_iter=s.cg_iters,
            rel_tol=s.cg_tol,
            record_history=s.cg_history is not None,
        ),
        rho_pre=s.rho_pre,
        rho_post=s.rho_post,
        adjust_dc=bool(s.adjust_dc),
        init_mode=s.init,
        pre_mode=s.pre_mode,
        sinkhorn_tol=s.sinkhorn_tol,
        sinkhorn_max_iter=s.sinkhorn_iters,
    )


def _write_history(path: str | Path, reports) -> None:
    with open(path, "w") as f:
        f.write("iteration,relative_residual\n")
        for report in reports:
            for k, rel in enumerate(report.residual_history or [], start=1):
                f.write(f"{k},{rel!r}\n")


def _run_reconstruction(args: argparse.Namespace, factor) -> int:
    s = _Settings(args)
    lr = load_image(args.input)
    guide = load_image(args.guide)
    cfg = _recon_config(s, factor)
    out, reports = reconstruct_image(lr, cfg, guide)
    save_image(out, args.output, bit_depth=s.bit_depth)
    if s.cg_history is not None:
        _write_history(s.cg_history, reports)
    for c, report in enumerate(reports):
        print(
            f"channel {c}: {report.iterations_used} iterations, "
            f"relative residual {report.final_rel_residual:.3e}"
            + ("" if report.converged else " (not converged)")
        )
    return EXIT_OK if all(r.converged for r in reports) else EXIT_MAX_ITER


def _cmd_upsample(args: argparse.Namespace) -> int:
    s = _Settings(args)
    return _run_reconstruction(args, _int_pair(s.factor, "--factor"))


def _cmd_denoise(args: argparse.Namespace) -> int:
    # factor-1 path: every pixel is retained, smoothing does the denoising
    return _run_reconstruction(args, 1)


def _cmd_add_noise(args: argparse.Namespace) -> int:
    s = _Settings(args)
    img = load_image(args.input)
    noisy = add_noise(img, NoiseSpec(variance=s.variance, seed=s.seed))
    save_image(noisy, args.output, bit_depth=s.bit_depth)
    return EXIT_OK


def _cmd_downsample(args: argparse.Namespace) -> int:
    s = _Settings(args)
    img = load_image(args.input)
    op = SamplingOperator(
        hr_width=img.width,
        hr_height=img.height,
        factor=_int_pair(s.factor, "--factor"),
        offset=_int_pair(s.offset, "--offset"),
    )
    planes = [downsample(op, flatten(img, c)) for c in range(img.channels)]
    lr = np.stack([p.reshape(op.lr_height, op.lr_width) for p in planes], axis=2)
    save_image(Image(lr), args.output, bit_depth=s.bit_depth)
    return EXIT_OK


def _cmd_psnr(args: argparse.Namespace) -> int:
    report = psnr(load_image(args.input), load_image(args.reference))
    print("psnr,mse")
    print(f"{report.psnr!r},{report.mse!r}")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    s = _Settings(args)
    size = s.size
    factor = _int_pair(s.factor, "--factor")
    target, guide = blocks_scene(size, size, seed=s.seed)
    sampling = SamplingOperator(
        hr_width=size, hr_height=size, factor=factor, offset=_int_pair(s.offset, "--offset")
    )
    guiding, _ = build_guiding_operator(
        guide,
        _kernel_params(s),
        poly_degree=s.poly_degree,
        sinkhorn_tol=s.sinkhorn_tol,
        sinkhorn_max_iter=s.sinkhorn_iters,
    )
    sample = upsample_adjoint(sampling, downsample(sampling, flatten(target)))
    system = assemble_dense(guiding, sampling, sample)
    try:
        rhos = [float(r) for r in str(s.rho).split(",") if r.strip()]
    except ValueError as err:
        raise CliError(f"--rho: {err}") from err
    report = schur_limit_check(system, rhos)
    text = report.to_csv()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_dump_weights(args: argparse.Namespace) -> int:
    s = _Settings(args)
    weights = build_weights(load_image(args.guide), _kernel_params(s))
    if not s.raw:
        weights, _ = sinkhorn_balance(weights, tol=s.sinkhorn_tol, max_iter=s.sinkhorn_iters)
    if args.output:
        with open(args.output, "w") as f:
            dump_weights(weights, f)
    else:
        dump_weights(weights, sys.stdout)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1; exit 2 is reserved for the iteration-cap outcome."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_config_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file supplying defaults for any flag")


def _add_kernel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=("bilateral", "tv"))
    p.add_argument("--radius", type=int)
    p.add_argument("--sigma-spatial", type=float)
    p.add_argument("--sigma-range", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--poly-degree", type=int)
    p.add_argument("--sinkhorn-tol", type=float)
    p.add_argument("--sinkhorn-iters", type=int)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cg-iters", type=int)
    p.add_argument("--cg-tol", type=float)
    p.add_argument("--cg-history", metavar="PATH", help="write iteration,relative_residual CSV")


def _add_recon_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho-pre", type=float)
    p.add_argument("--rho-post", type=float)
    p.add_argument("--pre-mode", choices=("projected", "lr-filter"))
    p.add_argument("--adjust-dc", action="store_true", default=None)
    p.add_argument("--init", choices=("zero", "nearest", "bilinear"))
    p.add_argument("--bit-depth", type=int, choices=(8, 16))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="opguide", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    up = sub.add_parser("upsample", help="guided super-resolution of a decimated image")
    up.add_argument("--input", required=True, help="low-resolution image")
    up.add_argument("--guide", required=True, help="high-resolution guidance image")
    up.add_argument("--output", required=True)
    up.add_argument("--factor")
    up.add_argument("--offset")
    _add_kernel_flags(up)
    _add_solver_flags(up)
    _add_recon_flags(up)
    _add_config_flag(up)
    up.set_defaults(func=_cmd_upsample)

    de = sub.add_parser("denoise", help="guided smoothing at full resolution (factor 1)")
    de.add_argument("--input", required=True)
    de.add_argument("--guide", required=True)
    de.add_argument("--output", required=True)
    _add_kernel_flags(de)
    _add_solver_flags(de)
    _add_recon_flags(de)
    _add_config_flag(de)
    de.set_defaults(func=_cmd_denoise)

    an = sub.add_parser("add-noise", help="add seeded Gaussian noise")
    an.add_argument("--input", required=True)
    an.add_argument("--output", required=True)
    an.add_argument("--variance", type=float)
    an.add_argument("--seed", type=int)
    an.add_argument("--bit-depth", type=int, choices=(8, 16))
    _add_config_flag(an)
    an.set_defaults(func=_cmd_add_noise)

    dn = sub.add_parser("downsample", help="keep every k-th pixel")
    dn.add_argument("--input", required=True)
    dn.add_argument("--output", required=True)
    dn.add_argument("--factor")
    dn.add_argument("--offset")
    dn.add_argument("--bit-depth", type=int, choices=(8, 16))
    _add_config_flag(dn)
    dn.set_defaults(func=_cmd_downsample)

    ps = sub.add_parser("psnr", help="PSNR/MSE of an image against a reference")
    ps.add_argument("--input", required=True)
    ps.add_argument("--reference", required=True)
    ps.set_defaults(func=_cmd_psnr)

    va = sub.add_parser("validate", help="dense vanishing-penalty analysis on a synthetic scene")
    va.add_argument("--size", type=int)
    va.add_argument("--factor")
    va.add_argument("--offset")
    va.add_argument("--seed", type=int)
    va.add_argument("--rho", help="comma-separated penalty weights")
    va.add_argument("--output", help="CSV path (default: stdout)")
    _add_kernel_flags(va)
    _add_config_flag(va)
    va.set_defaults(func=_cmd_validate)

    dw = sub.add_parser("dump-weights", help="write `i j w` affinity triplets")
    dw.add_argument("--guide", required=True)
    dw.add_argument("--output", help="text path (default: stdout)")
    dw.add_argument("--raw", action="store_true", default=None, help="skip Sinkhorn balancing")
    _add_kernel_flags(dw)
    _add_config_flag(dw)
    dw.set_defaults(func=_cmd_dump_weights)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as err:  # noqa: BLE001 - the CLI boundary reports, not crashes
        print(f"opguide: error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
