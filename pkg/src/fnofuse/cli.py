"""Command-line entry point.

Commands: verify, report, count-ops, simulate-banks, fno-run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import banks
from .core import (DEFAULT_TILES, FnoLayerConfig, FnofuseError, SpectralTensor,
                   TileConfig, validate_config)
from .cgemm import ComplexMatrix
from .fft import FORWARD, full_op_count, plan
from .pipeline import MODES, run_layer
from .reporting import (compute_report_rows, default_grids, load_grids,
                        read_raw_matrix, read_raw_tensor, write_raw_tensor,
                        write_report_csv, write_report_json)
from .verify import run_suites


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fnofuse",
        description="Spectral layer modeling: pruned FFT, tiled complex GEMM, "
                    "fused-pipeline traffic accounting, bank simulation.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the invariant suites over a grid")
    p.add_argument("--config", help="grid JSON (single grid or {'grids': [...]})")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("report", help="op-count and traffic report over a grid")
    p.add_argument("--config", help="grid JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", action="append", choices=MODES,
                   help="restrict to these modes (repeatable)")
    p.add_argument("--jobs", type=int, default=1, help="parallel grid points")
    p.add_argument("--no-figures", action="store_true",
                   help="skip heatmap rendering")

    p = sub.add_parser("count-ops", help="pruned/full op counts for one plan")
    p.add_argument("n", type=int)
    p.add_argument("keep", type=int)
    p.add_argument("src_len", type=int, nargs="?", default=None)

    p = sub.add_parser("simulate-banks", help="bank report for a swizzle layout")
    p.add_argument("--layout", required=True, choices=banks.LAYOUT_NAMES)
    p.add_argument("--fft-size", type=int, default=None, choices=(8, 16))
    p.add_argument("--step", type=int, default=None,
                   help="write phase (default: all phases)")
    p.add_argument("--gemm-read", action="store_true",
                   help="simulate the GEMM A-operand read instead of the write")

    p = sub.add_parser("fno-run", help="run one spectral layer on a raw tensor file")
    p.add_argument("--input", required=True, help="raw complex tensor (see README)")
    p.add_argument("--out", required=True, help="output tensor path")
    p.add_argument("--config", required=True,
                   help="JSON with layer (FnoLayerConfig fields) and optional tiles")
    p.add_argument("--weights", help="raw weight container; random if omitted")
    p.add_argument("--mode", default="fully_fused", choices=MODES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ledger-out", help="write the traffic ledger JSON here")
    return ap


def _cmd_verify(args) -> int:
    grids = load_grids(args.config) if args.config else default_grids()
    if not grids or all(not list(g.dims) or not list(g.hidden_range)
                        or not list(g.batch_range) for g in grids):
        print("warning: empty grid, nothing to verify")
        return 0
    results = run_suites(grids, args.seed)
    failed_suites = 0
    failed_checks = 0
    for r in results:
        status = "ok" if r.ok else "FAIL"
        print(f"{r.name}: {r.passed} passed, {r.failed} failed [{status}]")
        for msg in r.messages[:20]:
            print(f"  - {msg}")
        failed_suites += 0 if r.ok else 1
        failed_checks += r.failed
    print(f"verify: {'PASS' if failed_checks == 0 else f'FAIL ({failed_checks} checks)'}")
    # exit code counts the failing suites, one per failure class
    return min(failed_suites, 120)


def _cmd_report(args) -> int:
    grids = load_grids(args.config) if args.config else default_grids()
    if args.mode:
        grids = [type(g)(**{**g.to_json_dict(), "modes": tuple(args.mode)})
                 for g in grids]
    os.makedirs(args.out, exist_ok=True)
    rows = compute_report_rows(grids, args.seed, jobs=max(1, args.jobs))
    csv_path = os.path.join(args.out, "report.csv")
    json_path = os.path.join(args.out, "report.json")
    write_report_csv(rows, csv_path)
    write_report_json(rows, args.seed, json_path)
    written = [csv_path, json_path]
    if not args.no_figures:
        from .plots import render_heatmaps
        written += render_heatmaps(rows, args.out)
    for path in written:
        print(path)
    print(f"report: {len(rows)} rows")
    return 0


def _cmd_count_ops(args) -> int:
    src = args.n if args.src_len is None else args.src_len
    p = plan(args.n, FORWARD, keep=args.keep, src_len=src)
    full = full_op_count(args.n)
    print(f"n={args.n} keep={args.keep} src_len={src}")
    print(f"ops: {p.op_budget} / {full} = {p.op_budget / full:.6g}")
    print(f"twiddle muls: {p.twiddle_budget}  skipped: {full - p.op_budget}")
    return 0


def _cmd_simulate_banks(args) -> int:
    fft_size = args.fft_size
    if fft_size is None:
        fft_size = 8 if "fft8" in args.layout else 16
    if args.gemm_read:
        pattern = banks.gemm_read_pattern(args.layout)
        reports = [("gemm-read", banks.simulate(pattern))]
    else:
        spec = banks.get_layout(args.layout, fft_size)
        steps = range(spec.elements_per_thread) if args.step is None \
            else [args.step]
        reports = [(f"step {s}",
                    banks.simulate(banks.layout_pattern(spec, fft_size, s)))
                   for s in steps]
    doc = {label: rep.to_json_dict() for label, rep in reports}
    print(json.dumps(doc, indent=1, sort_keys=True))
    print(f"banks {'0123456789' * 3}01")
    for label, rep in reports:
        print(f"      {banks.ascii_bank_strip(rep)}  {label} "
              f"(util {rep.utilization:.4g})")
    return 0


def _load_layer_config(path: str, dims) -> tuple:
    with open(path) as f:
        doc = json.load(f)
    layer = dict(doc.get("layer", doc))
    defaults = {"batch": dims[0], "hidden_dim": dims[1],
                "dim_x": dims[2], "dim_y": dims[3]}
    for key, val in defaults.items():
        layer.setdefault(key, val)
        if int(layer[key]) != val:
            raise FnofuseError(
                f"config {key}={layer[key]} disagrees with file header {val}")
    layer.setdefault("rank", 2 if dims[2] > 1 else 1)
    layer.setdefault("keep_x", 1 if layer["rank"] == 1 else None)
    if layer.get("keep_x") is None or layer.get("keep_y") is None:
        raise FnofuseError("config must set keep_x and keep_y")
    if "output_dim" not in layer:
        raise FnofuseError("config must set output_dim")
    cfg = FnoLayerConfig.from_json_dict(layer)
    tiles = TileConfig.from_json_dict(doc["tiles"]) if "tiles" in doc \
        else DEFAULT_TILES
    return cfg, tiles


def _cmd_fno_run(args) -> int:
    data = read_raw_tensor(args.input)
    cfg, tiles = _load_layer_config(args.config, data.shape)
    validate_config(cfg, tiles)
    if args.weights:
        w = read_raw_matrix(args.weights)
    else:
        rng = np.random.default_rng(args.seed)
        w = ComplexMatrix.random(cfg.hidden_dim, cfg.output_dim, rng)
    out, led = run_layer(cfg, SpectralTensor(data), w, tiles, args.mode)
    write_raw_tensor(args.out, out.data)
    if args.ledger_out:
        with open(args.ledger_out, "w") as f:
            json.dump(led.to_json_dict(), f, indent=1, sort_keys=True)
            f.write("\n")
    print(f"{args.mode}: {data.shape} -> {out.data.shape}, "
          f"{led.kernel_launches} passes, "
          f"{led.total_bytes()} modeled global bytes")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "verify": _cmd_verify,
        "report": _cmd_report,
        "count-ops": _cmd_count_ops,
        "simulate-banks": _cmd_simulate_banks,
        "fno-run": _cmd_fno_run,
    }
    try:
        return handlers[args.command](args)
    except FnofuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
