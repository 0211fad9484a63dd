"""Experiment grids, CSV/JSON report generation, and the raw tensor file
format used by the fno-run command.

A grid point is (dim, keep) x hidden x (batch * dim_x product).  The
output channel count tracks the hidden dimension, matching the evaluation
sweeps the grid mirrors.  Points whose input tensor would exceed
``max_point_elements`` are skipped so the default suites stay desk-scale;
the batch product never exceeds 2**14.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (COMPLEX_BYTES, COMPLEX_DTYPE, DEFAULT_TILES, FnoLayerConfig,
                   FnofuseError, max_rel_error, random_spectral)
from .cgemm import ComplexMatrix
from .pipeline import ARRAY_NAMES, MODES, layer_op_stats, run_layer

MAX_BATCH_DIMX = 1 << 14


class InvalidGrid(FnofuseError):
    pass


DEFAULT_DIMS = ((128, 64), (128, 128), (256, 64), (256, 128))
DEFAULT_HIDDEN = (16, 32, 64, 128)
DEFAULT_BATCH_RANGE = (64, 512, 4096)
DEFAULT_MAX_POINT_ELEMENTS = 1 << 23


@dataclass(frozen=True)
class ExperimentGrid:
    """One sweep: (dim, keep) pairs x hidden sizes x batch*dim_x products,
    for one rank, over a subset of the execution modes."""

    dims: tuple = DEFAULT_DIMS
    hidden_range: tuple = DEFAULT_HIDDEN
    batch_range: tuple = DEFAULT_BATCH_RANGE
    rank: int = 1
    modes: tuple = MODES
    max_point_elements: int = DEFAULT_MAX_POINT_ELEMENTS

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple((int(d), int(k)) for d, k in self.dims))
        object.__setattr__(self, "hidden_range", tuple(int(h) for h in self.hidden_range))
        object.__setattr__(self, "batch_range", tuple(int(b) for b in self.batch_range))
        object.__setattr__(self, "modes", tuple(self.modes))
        for m in self.modes:
            if m not in MODES:
                raise InvalidGrid(f"unknown mode {m!r}; expected subset of {MODES}")
        if self.rank not in (1, 2):
            raise InvalidGrid(f"rank must be 1 or 2, got {self.rank}")
        if any(b > MAX_BATCH_DIMX for b in self.batch_range):
            raise InvalidGrid(f"batch*dim_x products must stay <= {MAX_BATCH_DIMX}")

    def to_json_dict(self) -> dict:
        return {
            "dims": [list(p) for p in self.dims],
            "hidden_range": list(self.hidden_range),
            "batch_range": list(self.batch_range),
            "rank": self.rank,
            "modes": list(self.modes),
            "max_point_elements": self.max_point_elements,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentGrid":
        kwargs = {}
        for name in ("dims", "hidden_range", "batch_range", "rank", "modes",
                     "max_point_elements"):
            if name in d:
                kwargs[name] = d[name]
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise InvalidGrid(str(exc)) from None


def default_grids() -> list:
    return [ExperimentGrid(rank=1), ExperimentGrid(rank=2)]


def load_grids(path: str) -> list:
    with open(path) as f:
        doc = json.load(f)
    if isinstance(doc, dict) and "grids" in doc:
        return [ExperimentGrid.from_json_dict(g) for g in doc["grids"]]
    if isinstance(doc, dict):
        return [ExperimentGrid.from_json_dict(doc)]
    raise InvalidGrid(f"{path}: expected a grid object or {{'grids': [...]}}")


def point_config(grid: ExperimentGrid, dim: int, keep: int, hidden: int,
                 batch_dimx: int) -> FnoLayerConfig:
    """Concrete layer config for one grid point (output channels = hidden)."""
    if grid.rank == 1:
        return FnoLayerConfig(batch=batch_dimx, hidden_dim=hidden,
                              output_dim=hidden, dim_x=1, dim_y=dim,
                              keep_x=1, keep_y=keep, rank=1)
    batch = max(1, batch_dimx // dim)
    return FnoLayerConfig(batch=batch, hidden_dim=hidden, output_dim=hidden,
                          dim_x=dim, dim_y=dim, keep_x=keep, keep_y=keep, rank=2)


def grid_points(grid: ExperimentGrid):
    """Yield (point_index, dim, keep, hidden, batch_dimx) for runnable
    points; oversized points are skipped."""
    idx = 0
    for dim, keep in grid.dims:
        for hidden in grid.hidden_range:
            for bd in grid.batch_range:
                cfg = point_config(grid, dim, keep, hidden, bd)
                elems = cfg.batch * cfg.hidden_dim * cfg.dim_x * cfg.dim_y
                if elems <= grid.max_point_elements:
                    yield idx, dim, keep, hidden, bd
                idx += 1


REPORT_COLUMNS = (
    "rank", "mode", "dim", "keep", "hidden", "output_dim", "batch",
    "batch_dimx", "log2_batch_dimx", "kernel_launches",
    "input_read", "input_written",
    "spectrum_stage1_read", "spectrum_stage1_written",
    "a_panel_read", "a_panel_written",
    "b_read", "b_written",
    "c_read", "c_written",
    "output_read", "output_written",
    "total_bytes", "traffic_ratio_vs_staged",
    "a_panel_saved_bytes", "c_saved_bytes",
    "stage1_write_ratio", "stage2_compute_ratio",
    "fft_op_budget", "fft_twiddle_muls", "fft_op_baseline",
    "fft_op_ratio", "fft_op_reduction",
    "max_rel_err_vs_staged",
)


def _point_rows(args) -> tuple:
    """Run all requested modes at one grid point; returns (index, rows)."""
    grid_dict, seed, grid_index, point = args
    grid = ExperimentGrid.from_json_dict(grid_dict)
    idx, dim, keep, hidden, bd = point
    cfg = point_config(grid, dim, keep, hidden, bd)
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((seed, grid_index, idx))))
    x = random_spectral(cfg, rng)
    w = ComplexMatrix.random(cfg.hidden_dim, cfg.output_dim, rng)

    out_staged, led_staged = run_layer(cfg, x, w, DEFAULT_TILES, "staged")
    untrunc_s1 = cfg.batch * cfg.hidden_dim * cfg.dim_x * cfg.dim_y * COMPLEX_BYTES
    rows = []
    for mode in grid.modes:
        if mode == "staged":
            out, led = out_staged, led_staged
        else:
            out, led = run_layer(cfg, x, w, DEFAULT_TILES, mode)
        ops = layer_op_stats(cfg, mode)
        row = {
            "rank": grid.rank, "mode": mode, "dim": dim, "keep": keep,
            "hidden": hidden, "output_dim": cfg.output_dim, "batch": cfg.batch,
            "batch_dimx": cfg.batch * cfg.dim_x,
            "log2_batch_dimx": math.log2(cfg.batch * cfg.dim_x),
            "kernel_launches": led.kernel_launches,
        }
        for name in ARRAY_NAMES:
            col = name.lower()
            row[f"{col}_read"] = led.arrays[name].bytes_read
            row[f"{col}_written"] = led.arrays[name].bytes_written
        row["total_bytes"] = led.total_bytes()
        staged_total = led_staged.total_bytes()
        row["traffic_ratio_vs_staged"] = (led.total_bytes() / staged_total
                                          if staged_total else 1.0)
        row["a_panel_saved_bytes"] = led_staged.total("A_panel") - led.total("A_panel")
        row["c_saved_bytes"] = led_staged.total("C") - led.total("C")
        row["stage1_write_ratio"] = \
            led.arrays["spectrum_stage1"].bytes_written / untrunc_s1 \
            if cfg.rank == 2 else 1.0
        row["stage2_compute_ratio"] = (ops["stage2_elements"]
                                       / ops["stage2_elements_untruncated"])
        for key in ("fft_op_budget", "fft_twiddle_muls", "fft_op_baseline",
                    "fft_op_ratio", "fft_op_reduction"):
            row[key] = ops[key]
        row["max_rel_err_vs_staged"] = max_rel_error(out.data, out_staged.data)
        rows.append(row)
    return (grid_index, idx), rows


def compute_report_rows(grids, seed: int, jobs: int = 1) -> list:
    """Rows for every runnable point of every grid, in deterministic grid
    order regardless of execution parallelism."""
    tasks = []
    for gi, grid in enumerate(grids):
        gd = grid.to_json_dict()
        for point in grid_points(grid):
            tasks.append((gd, seed, gi, point))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_point_rows, tasks))
    else:
        results = [_point_rows(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    rows = []
    for _, point_rows in results:
        rows.extend(point_rows)
    return rows


def write_report_csv(rows, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(REPORT_COLUMNS))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row[k]) for k in REPORT_COLUMNS})


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_report_json(rows, seed: int, path: str) -> None:
    doc = {"seed": seed, "columns": list(REPORT_COLUMNS), "rows": rows}
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


# ---------------------------------------------------------------------------
# Raw tensor container: little-endian, header of four uint32 dims followed
# by interleaved (re, im) float32 pairs in row-major order.
# ---------------------------------------------------------------------------

_HEADER_DTYPE = np.dtype("<u4")
_DATA_DTYPE = np.dtype("<c8")


def write_raw_tensor(path: str, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=COMPLEX_DTYPE)
    if arr.ndim != 4:
        raise FnofuseError(f"raw tensors are 4-D, got {arr.ndim}-D")
    with open(path, "wb") as f:
        np.asarray(arr.shape, dtype=_HEADER_DTYPE).tofile(f)
        arr.astype(_DATA_DTYPE, copy=False).tofile(f)


def read_raw_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        dims = np.fromfile(f, dtype=_HEADER_DTYPE, count=4)
        if dims.size != 4:
            raise FnofuseError(f"{path}: truncated header")
        count = int(np.prod(dims.astype(np.int64)))
        data = np.fromfile(f, dtype=_DATA_DTYPE, count=count)
        if data.size != count:
            raise FnofuseError(
                f"{path}: expected {count} complex elements, found {data.size}")
        trailing = f.read(1)
        if trailing:
            raise FnofuseError(f"{path}: trailing bytes after payload")
    return data.astype(COMPLEX_DTYPE).reshape(tuple(int(d) for d in dims))


def write_raw_matrix(path: str, mat: ComplexMatrix) -> None:
    """Weights container: dims [rows, cols, 1, 1], row-major payload."""
    write_raw_tensor(path, np.ascontiguousarray(mat.values)
                     .reshape(mat.rows, mat.cols, 1, 1))


def read_raw_matrix(path: str) -> ComplexMatrix:
    arr = read_raw_tensor(path)
    if arr.shape[2:] != (1, 1):
        raise FnofuseError(
            f"{path}: weight container must have dims [rows, cols, 1, 1], "
            f"got {arr.shape}")
    return ComplexMatrix(arr.reshape(arr.shape[0], arr.shape[1]))
