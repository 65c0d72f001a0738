"""``falcontk`` command line interface.

Exit codes: 0 success, 1 verification failed, 2 input/format error,
3 computation error (rank too large, divergence).
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis
from .archconfig import load_config
from .conv import conv2d_standard
from .errors import DivergenceError, FalconError, FormatError, RankError, ShapeError
from .falcon import dpconv_forward, falcon_rank_k_forward
from .fitting import FitConfig, channel_residuals, fit, reconstruct, residual
from .ftk import factors_to_tensors, read_ftk, tensors_to_factors, write_ftk
from .gep import DpconvFactors
from .tensor import ConvDims, frobenius_norm

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_COMPUTE = 0, 1, 2, 3


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _g(x, digits=6) -> str:
    return format(float(x), f".{digits}g")


def _load(path, what):
    try:
        return read_ftk(path)
    except OSError as exc:
        raise CommandError(f"cannot read {what} file {path}: {exc.strerror or exc}", EXIT_INPUT)
    except FormatError as exc:
        raise CommandError(f"{what} file {path}: {exc}", EXIT_INPUT)


def _save(path, tensors):
    try:
        write_ftk(path, tensors)
    except OSError as exc:
        raise CommandError(f"cannot write {path}: {exc.strerror or exc}", EXIT_INPUT)


def _kernel_from(tensors, path):
    if "K" not in tensors:
        raise CommandError(f"{path}: no tensor named 'K' (found {sorted(tensors)})", EXIT_INPUT)
    K = tensors["K"]
    if K.ndim != 4 or K.shape[0] != K.shape[1]:
        raise CommandError(f"{path}: 'K' must be a D×D×M×N kernel, got shape {K.shape}", EXIT_INPUT)
    return K


def _factors_from(tensors, path):
    try:
        return tensors_to_factors(tensors)
    except (FormatError, ShapeError) as exc:
        raise CommandError(f"{path}: {exc}", EXIT_INPUT)


def _relative(res, norm):
    if norm == 0:
        return 0.0 if res == 0 else float("inf")
    return res / norm


def cmd_compress(args, out):
    K = _kernel_from(_load(args.input, "kernel"), args.input)
    try:
        cfg = FitConfig(
            method=args.method, rank=args.rank, orientation=args.orientation,
            learning_rate=args.lr, max_iters=args.iters, tolerance=args.tol,
            seed=args.seed, init=args.init,
        )
        factors = fit(K, cfg)
    except (RankError, DivergenceError) as exc:
        raise CommandError(str(exc), EXIT_COMPUTE)
    except ValueError as exc:
        raise CommandError(str(exc), EXIT_INPUT)
    res = residual(K, factors)
    _save(args.output, factors_to_tensors(factors))
    print(f"residual: {_g(res)}", file=out)
    print(f"relative_residual: {_g(_relative(res, frobenius_norm(K)))}", file=out)
    return EXIT_OK


def cmd_reconstruct(args, out):
    factors = _factors_from(_load(args.factors, "factor"), args.factors)
    K = reconstruct(factors)
    _save(args.output, {"K": K})
    print(f"kernel: {'x'.join(map(str, K.shape))}", file=out)
    return EXIT_OK


def cmd_verify(args, out):
    K = _kernel_from(_load(args.kernel, "kernel"), args.kernel)
    factors = _factors_from(_load(args.factors, "factor"), args.factors)
    if K.shape != factors.kernel_shape:
        raise CommandError(
            f"factors describe a {factors.kernel_shape} kernel but {args.kernel} holds {K.shape}",
            EXIT_INPUT,
        )
    d = args.digits
    res = residual(K, factors)
    rel = _relative(res, frobenius_norm(K))
    print(f"residual: {_g(res, d)}", file=out)
    print(f"relative_residual: {_g(rel, d)}", file=out)
    print("channel residual", file=out)
    for n, r in enumerate(channel_residuals(K, factors)):
        print(f"{n} {_g(r, d)}", file=out)
    ok = rel <= args.tol
    print("status: " + ("ok" if ok else "FAILED"), file=out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_forward(args, out):
    model = _load(args.model, "model")
    tensors = _load(args.input, "input")
    if "I" not in tensors or tensors["I"].ndim != 3:
        shape = tensors["I"].shape if "I" in tensors else None
        raise CommandError(f"{args.input}: need a 3-way tensor 'I' (H×W×M), got {shape}", EXIT_INPUT)
    I = tensors["I"]
    try:
        if set(model) == {"K"}:
            K = _kernel_from(model, args.model)
            O = conv2d_standard(I, K, args.stride, args.pad)
        else:
            factors = _factors_from(model, args.model)
            if isinstance(factors, DpconvFactors):
                O = dpconv_forward(I, factors, args.stride, args.pad)
            else:
                O = falcon_rank_k_forward(I, factors, args.stride, args.pad)
    except ShapeError as exc:
        K_shape = model["K"].shape if "K" in model else factors.kernel_shape
        raise CommandError(
            f"{exc} [input H×W×M = {'x'.join(map(str, I.shape))}, "
            f"kernel D×D×M×N = {'x'.join(map(str, K_shape))}, "
            f"stride={args.stride}, pad={args.pad}]",
            EXIT_INPUT,
        )
    _save(args.output, {"O": O})
    print(f"output: {'x'.join(map(str, O.shape))}", file=out)
    return EXIT_OK


def _rates_rows(dims, k):
    return [
        ("params_stconv", analysis.count_params("stconv", dims)),
        ("params_falcon", analysis.count_params("falcon", dims, k)),
        ("flops_stconv", analysis.count_flops("stconv", dims)),
        ("flops_falcon", analysis.count_flops("falcon", dims, k)),
        ("CR", _g(analysis.compression_rate(dims, k))),
        ("CRR", _g(analysis.computation_reduction_rate(dims, k))),
    ]


def cmd_rates(args, out):
    try:
        dims = ConvDims(args.D, args.M, args.N, args.H, args.W, args.s, args.p)
        rows = _rates_rows(dims, args.k)
    except (ValueError, ArithmeticError) as exc:
        raise CommandError(str(exc), EXIT_INPUT)
    for name, value in rows:
        print(f"{name:<14} {value}", file=out)
    return EXIT_OK


def cmd_analyze(args, out):
    try:
        layers = load_config(args.config)
    except OSError as exc:
        raise CommandError(f"cannot read config {args.config}: {exc.strerror or exc}", EXIT_INPUT)
    except FormatError as exc:
        raise CommandError(f"{args.config}: {exc}", EXIT_INPUT)
    try:
        override = analysis.ConvType.parse(args.conv) if args.conv else None
        if override is not None:
            layers = [replace(l, conv=override) for l in layers]
        if args.k is not None:
            layers = [replace(l, k=args.k) for l in layers]
        report = analysis.analyze_architecture(layers)
    except (ValueError, ArithmeticError) as exc:
        raise CommandError(str(exc), EXIT_INPUT)

    print("# convolution layers only: BN, activations and biases are not counted", file=out)
    header = f"{'layer':<12} {'type':<18} {'params':>12} {'flops':>14} {'stconv_params':>14} {'stconv_flops':>14}"
    print(header, file=out)
    for row in report.layers:
        print(
            f"{row.name:<12} {str(row.conv):<18} {row.params:>12} {row.flops:>14} "
            f"{row.stconv_params:>14} {row.stconv_flops:>14}",
            file=out,
        )
    print(
        f"{'total':<12} {'':<18} {report.params:>12} {report.flops:>14} "
        f"{report.stconv_params:>14} {report.stconv_flops:>14}",
        file=out,
    )
    print(f"CR  {_g(report.compression_rate)}", file=out)
    print(f"CRR {_g(report.computation_reduction_rate)}", file=out)
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["layer", "type", "params", "flops"])
        for row in report.layers:
            writer.writerow([row.name, str(row.conv), row.params, row.flops])
        try:
            Path(args.csv).write_text(buf.getvalue(), encoding="utf-8")
        except OSError as exc:
            raise CommandError(f"cannot write {args.csv}: {exc.strerror or exc}", EXIT_INPUT)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="falcontk", description="FALCON kernel factorization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="fit factors to a kernel file")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--method", choices=["svd", "iterative"], default="svd")
    p.add_argument("--orientation", choices=["falcon", "dpconv"], default="falcon")
    p.add_argument("--init", choices=["warm_svd", "random"], default="warm_svd")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("reconstruct", help="rebuild the kernel from a factor file")
    p.add_argument("factors")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("verify", help="check factors against a kernel")
    p.add_argument("kernel")
    p.add_argument("factors")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--digits", type=int, default=6, help="significant digits printed")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("forward", help="run a kernel or factor file over an input")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--pad", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("rates", help="parameter/FLOP counts and FALCON rates for one layer")
    for name, default in (("D", None), ("M", None), ("N", None), ("H", 32), ("W", 32), ("s", 1), ("p", 0), ("k", 1)):
        p.add_argument(f"--{name}", type=int, default=default, required=default is None)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("analyze", help="count a whole architecture config")
    p.add_argument("config")
    p.add_argument("--conv", help="override every layer's convolution type")
    p.add_argument("--k", type=int, help="override every layer's rank")
    p.add_argument("--csv", help="also write layer,type,params,flops CSV here")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except CommandError as exc:
        print(f"falcontk {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except FalconError as exc:
        print(f"falcontk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
