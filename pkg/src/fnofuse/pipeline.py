"""The spectral layer in five executions, from fully staged to fully fused.

Numerically every mode computes the same thing: forward transform(s),
truncation to the retained low bins, a complex channel-mixing GEMM, zero
padding back to full length, inverse transform(s).  What differs is which
logical passes cross the modeled global memory, tracked byte-exactly in a
TrafficLedger:

* ``staged``:          FFT, truncate, GEMM, pad and iFFT are separate
                       passes; truncation/padding are memory-copy kernels.
* ``fft_optimized``:   truncation, padding and pruning are built into the
                       transforms; FFT, GEMM, iFFT stay separate kernels.
* ``fused_fft_gemm``:  the stage-2 FFT runs inside the GEMM k-loop and its
                       output panel never leaves the tile buffer.
* ``fused_gemm_ifft``: the inverse transform consumes GEMM output tiles as
                       an epilogue; pre-iFFT C never hits global memory.
* ``fully_fused``:     both fusions at once; for rank 1 the whole layer is
                       a single logical kernel.

For rank 2 the stage-1 transform (along dim_x) is always a separate pass;
only stage-2 + GEMM + iFFT participate in fusion.  "Global memory" is the
set of named arrays crossed between passes (input, spectrum_stage1,
A_panel, B, C, output); the B operand is re-read once per m-tile in every
mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (COMPLEX_BYTES, COMPLEX_DTYPE, DEFAULT_TILES, FFT_BLOCK_BATCH,
                   FnoLayerConfig, FnofuseError, ShapeMismatch, SpectralTensor,
                   TileConfig, validate_config)
from .cgemm import ComplexMatrix, gemm_kloop
from .fft import FORWARD, INVERSE, _run_rows, full_op_count, plan

ARRAY_NAMES = ("input", "spectrum_stage1", "A_panel", "B", "C", "output")

MODES = ("staged", "fft_optimized", "fused_fft_gemm", "fused_gemm_ifft",
         "fully_fused")


class ScheduleInvalid(FnofuseError):
    pass


class ConfigMismatch(FnofuseError):
    pass


@dataclass
class ArrayTraffic:
    bytes_read: int = 0
    bytes_written: int = 0

    @property
    def total(self) -> int:
        return self.bytes_read + self.bytes_written


@dataclass
class TrafficLedger:
    """Per-array global byte counters plus the logical pass count."""

    arrays: dict = field(default_factory=lambda: {n: ArrayTraffic() for n in ARRAY_NAMES})
    kernel_launches: int = 0
    config_key: tuple = ()

    def read(self, name: str, nbytes: int) -> None:
        self.arrays[name].bytes_read += int(nbytes)

    def write(self, name: str, nbytes: int) -> None:
        self.arrays[name].bytes_written += int(nbytes)

    def launch(self) -> None:
        self.kernel_launches += 1

    def total(self, name: str) -> int:
        return self.arrays[name].total

    def total_bytes(self) -> int:
        return sum(t.total for t in self.arrays.values())

    def to_json_dict(self) -> dict:
        return {
            "arrays": {n: {"bytes_read": t.bytes_read, "bytes_written": t.bytes_written}
                       for n, t in self.arrays.items()},
            "kernel_launches": self.kernel_launches,
        }


@dataclass(frozen=True)
class FusedSchedule:
    """k-loop shape of the fused kernel: the FFT feeds panels of
    panel_rows x panel_cols, one hidden-dim tile per iteration, and the
    epilogue walks the block's n-dimension tiles in order."""

    panel_rows: int
    panel_cols: int
    k_loop_order: tuple
    epilogue_tiles: tuple


def build_schedule(cfg: FnoLayerConfig, tiles: TileConfig,
                   fft_batch_size: int = FFT_BLOCK_BATCH) -> FusedSchedule:
    if tiles.k_tb != fft_batch_size:
        raise ScheduleInvalid(
            f"FFT block batch bs={fft_batch_size} must equal k_tb={tiles.k_tb}")
    n_chunks = -(-cfg.hidden_dim // tiles.k_tb)
    n_tiles = tuple((n0, min(cfg.output_dim, n0 + tiles.n_tb))
                    for n0 in range(0, cfg.output_dim, tiles.n_tb))
    return FusedSchedule(panel_rows=tiles.m_tb, panel_cols=tiles.k_tb,
                         k_loop_order=tuple(range(n_chunks)),
                         epilogue_tiles=n_tiles)


def _check_layer_args(cfg, x, w):
    shape = (cfg.batch, cfg.hidden_dim, cfg.dim_x, cfg.dim_y)
    if x.data.shape != shape:
        raise ShapeMismatch(f"tensor shape {x.data.shape} != config shape {shape}")
    if (w.rows, w.cols) != (cfg.hidden_dim, cfg.output_dim):
        raise ShapeMismatch(
            f"weights are {w.rows}x{w.cols}, config wants "
            f"{cfg.hidden_dim}x{cfg.output_dim}")


def run_layer(cfg: FnoLayerConfig, x: SpectralTensor, w: ComplexMatrix,
              tiles: TileConfig = DEFAULT_TILES, mode: str = "fully_fused",
              fft_batch_size: int = FFT_BLOCK_BATCH):
    """Run one spectral layer; returns (output tensor, traffic ledger)."""
    if mode not in MODES:
        raise FnofuseError(f"unknown mode {mode!r}; expected one of {MODES}")
    sched = build_schedule(cfg, tiles, fft_batch_size)
    validate_config(cfg, tiles, fft_batch_size)
    _check_layer_args(cfg, x, w)

    fuse_fg = mode in ("fused_fft_gemm", "fully_fused")
    fuse_gi = mode in ("fused_gemm_ifft", "fully_fused")
    builtin = mode != "staged"

    E = COMPLEX_BYTES
    B, H, N = cfg.batch, cfg.hidden_dim, cfg.output_dim
    dx, dy, kx, ky = cfg.dim_x, cfg.dim_y, cfg.keep_x, cfg.keep_y
    m_size = B * kx * ky
    led = TrafficLedger(config_key=(B, H, N, dx, dy, kx, ky, cfg.rank))

    # ---- stage 1 (rank 2): transform along dim_x, its own pass in every mode.
    if cfg.rank == 2:
        xcols = x.data.transpose(0, 1, 3, 2).reshape(-1, dx)
        if builtin:
            s1rows = _run_rows(plan(dx, FORWARD, keep=kx), xcols)
            led.read("input", B * H * dx * dy * E)
            led.write("spectrum_stage1", B * H * kx * dy * E)
            led.launch()
        else:
            s1full = _run_rows(plan(dx, FORWARD), xcols)
            led.read("input", B * H * dx * dy * E)
            led.write("spectrum_stage1", B * H * dx * dy * E)
            led.launch()
            s1rows = s1full[:, :kx].copy()
            del s1full
            led.read("spectrum_stage1", B * H * kx * dy * E)
            led.write("spectrum_stage1", B * H * kx * dy * E)
            led.launch()
        source = np.ascontiguousarray(
            s1rows.reshape(B, H, dy, kx).transpose(0, 1, 3, 2))
        del s1rows
        src_name = "spectrum_stage1"
    else:
        source = x.data.reshape(B, H, 1, dy)
        src_name = "input"
    src_elems = B * H * kx * dy

    # ---- stage 2 forward + GEMM (+ epilogue when fused).
    wv = w.values
    b_read = -(-m_size // tiles.m_tb) * H * N * E
    p_fwd = plan(dy, FORWARD, keep=(ky if builtin else dy))

    def to_panel(spec, channels):
        block = spec.reshape(B, channels, kx, ky).transpose(0, 2, 3, 1)
        return np.ascontiguousarray(block).reshape(m_size, channels)

    if fuse_fg:
        # Fig-8 control flow: the first panel transform runs before the
        # k-loop (taking the place of the A prefetch), each iteration then
        # transforms the next hidden slice straight into the tile buffer.
        acc = np.zeros((m_size, N), dtype=COMPLEX_DTYPE)
        panel = None
        for ki in sched.k_loop_order:
            k0 = ki * sched.panel_cols
            k1 = min(H, k0 + sched.panel_cols)
            if panel is None:
                spec = _run_rows(p_fwd, source[:, k0:k1].reshape(-1, dy))
                panel = to_panel(spec, k1 - k0)
            led.read(src_name, B * (k1 - k0) * kx * dy * E)
            for n0, n1 in sched.epilogue_tiles:
                acc[:, n0:n1] += panel @ wv[k0:k1, n0:n1]
            nk0 = (ki + 1) * sched.panel_cols
            if nk0 < H:
                nk1 = min(H, nk0 + sched.panel_cols)
                spec = _run_rows(p_fwd, source[:, nk0:nk1].reshape(-1, dy))
                panel = to_panel(spec, nk1 - nk0)
        led.read("B", b_read)
        c_mat = acc
    else:
        rows = source.reshape(-1, dy)
        if builtin:
            spec = _run_rows(p_fwd, rows)
            led.read(src_name, src_elems * E)
            led.write("A_panel", m_size * H * E)
            led.launch()
        else:
            # Full-length transform leaves an untruncated spectrum in the
            # scratch array; a separate copy pass compacts it into the GEMM
            # operand.  A_panel always holds exactly the M x K operand.
            spec_full = _run_rows(p_fwd, rows)
            led.read(src_name, src_elems * E)
            led.write("spectrum_stage1", src_elems * E)
            led.launch()
            spec = spec_full[:, :ky].copy()
            del spec_full
            led.read("spectrum_stage1", m_size * H * E)
            led.write("A_panel", m_size * H * E)
            led.launch()
        a_mat = to_panel(spec, H)
        del spec
        led.read("A_panel", m_size * H * E)
        led.read("B", b_read)
        c_mat = gemm_kloop(a_mat, wv, tiles.k_tb)
        del a_mat
    if cfg.rank == 1:
        del source

    # ---- inverse along dim_y: GEMM epilogue when fused, else its own pass.
    p_inv = plan(dy, INVERSE, src_len=(ky if builtin else dy))
    mid_elems = B * N * kx * dy

    def ifft_y_block(cols, n0, n1, out_mid):
        block = cols.reshape(B, kx, ky, n1 - n0).transpose(0, 3, 1, 2)
        res = _run_rows(p_inv, block.reshape(-1, ky))
        out_mid[:, n0:n1] = res.reshape(B, n1 - n0, kx, dy)

    if fuse_gi:
        out_mid = np.empty((B, N, kx, dy), dtype=COMPLEX_DTYPE)
        for n0, n1 in sched.epilogue_tiles:
            ifft_y_block(c_mat[:, n0:n1], n0, n1, out_mid)
        led.write("output", mid_elems * E)
        led.launch()                      # the fused kernel itself
    else:
        led.write("C", m_size * N * E)
        led.launch()                      # GEMM (or fused FFT+GEMM) kernel
        if builtin:
            out_mid = np.empty((B, N, kx, dy), dtype=COMPLEX_DTYPE)
            ifft_y_block(c_mat, 0, N, out_mid)
            led.read("C", m_size * N * E)
            led.write("output", mid_elems * E)
            led.launch()
        else:
            # pad pass materializes the full zero-extended array, then a
            # full-length inverse runs over every row.
            padded = np.zeros((B, N, dx, dy), dtype=COMPLEX_DTYPE)
            padded[:, :, :kx, :ky] = \
                c_mat.reshape(B, kx, ky, N).transpose(0, 3, 1, 2)
            led.read("C", m_size * N * E)
            led.write("output", B * N * dx * dy * E)
            led.launch()
            res = _run_rows(p_inv, padded.reshape(-1, dy))
            out_mid = res.reshape(B, N, dx, dy)
            del padded
            led.read("output", B * N * dx * dy * E)
            led.write("output", B * N * dx * dy * E)
            led.launch()
    del c_mat

    # ---- inverse along dim_x (rank 2): separate pass in every mode.
    if cfg.rank == 2:
        if builtin:
            cols = out_mid.transpose(0, 1, 3, 2).reshape(-1, kx)
            res = _run_rows(plan(dx, INVERSE, src_len=kx), cols)
            led.read("output", mid_elems * E)
        else:
            cols = out_mid.transpose(0, 1, 3, 2).reshape(-1, dx)
            res = _run_rows(plan(dx, INVERSE), cols)
            led.read("output", B * N * dx * dy * E)
        out = np.ascontiguousarray(
            res.reshape(B, N, dy, dx).transpose(0, 1, 3, 2))
        led.write("output", B * N * dx * dy * E)
        led.launch()
    else:
        out = out_mid

    return SpectralTensor(out), led


def run_staged(cfg, x, w, tiles=DEFAULT_TILES, fft_batch_size=FFT_BLOCK_BATCH):
    """Baseline execution: every stage is a separate pass through global
    memory, with dedicated truncate and pad memory-copy passes."""
    return run_layer(cfg, x, w, tiles, "staged", fft_batch_size)


def run_fused(cfg, x, w, tiles=DEFAULT_TILES, fft_batch_size=FFT_BLOCK_BATCH):
    """Fully fused execution: stage-2 FFT inside the GEMM k-loop, inverse
    transform as the GEMM epilogue, built-in truncation/padding/pruning."""
    return run_layer(cfg, x, w, tiles, "fully_fused", fft_batch_size)


@dataclass(frozen=True)
class TrafficDelta:
    """Per-array byte savings of one ledger against a baseline ledger."""

    arrays: dict
    baseline_launches: int
    fused_launches: int
    stage1_write_ratio: float
    stage2_compute_ratio: float

    def to_json_dict(self) -> dict:
        return {
            "arrays": self.arrays,
            "baseline_launches": self.baseline_launches,
            "fused_launches": self.fused_launches,
            "stage1_write_ratio": self.stage1_write_ratio,
            "stage2_compute_ratio": self.stage2_compute_ratio,
        }


def stage_ratios(cfg_key: tuple) -> tuple:
    """(stage-1 spectrum write ratio, stage-2 output-element ratio) of the
    truncating execution against the untruncated workload.

    Stage-2 compute is measured in produced output elements, the unit in
    which the saving is quadratic for rank 2 with equal keep ratios.
    """
    _, _, _, dx, dy, kx, ky, rank = cfg_key
    if rank == 2:
        return kx / dx, (kx * ky) / (dx * dy)
    return 1.0, ky / dy


def traffic_delta(staged: TrafficLedger, fused: TrafficLedger) -> TrafficDelta:
    """Per-array savings report; both ledgers must come from the same
    configuration (ConfigMismatch otherwise)."""
    if staged.config_key != fused.config_key:
        raise ConfigMismatch(
            f"ledgers from different configs: {staged.config_key} vs "
            f"{fused.config_key}")
    arrays = {}
    for name in ARRAY_NAMES:
        s, f = staged.arrays[name], fused.arrays[name]
        arrays[name] = {
            "staged_read": s.bytes_read,
            "staged_written": s.bytes_written,
            "fused_read": f.bytes_read,
            "fused_written": f.bytes_written,
            "saved_read": s.bytes_read - f.bytes_read,
            "saved_written": s.bytes_written - f.bytes_written,
            "traffic_ratio": (f.total / s.total) if s.total else 1.0,
        }
    s1, s2 = stage_ratios(staged.config_key)
    return TrafficDelta(arrays=arrays,
                        baseline_launches=staged.kernel_launches,
                        fused_launches=fused.kernel_launches,
                        stage1_write_ratio=s1,
                        stage2_compute_ratio=s2)


def layer_op_stats(cfg: FnoLayerConfig, mode: str) -> dict:
    """Transform op counts for one mode of one layer configuration.

    The baseline is the staged workload (full plans at the staged pencil
    counts); the ratio/reduction columns compare this mode against it.
    """
    if mode not in MODES:
        raise FnofuseError(f"unknown mode {mode!r}")
    builtin = mode != "staged"
    B, H, N = cfg.batch, cfg.hidden_dim, cfg.output_dim
    dx, dy, kx, ky = cfg.dim_x, cfg.dim_y, cfg.keep_x, cfg.keep_y

    stages = []  # (pencils, plan) for this mode
    base = []    # (pencils, n) for the staged baseline
    if cfg.rank == 2:
        stages.append((B * H * dy, plan(dx, FORWARD, keep=(kx if builtin else dx))))
        base.append((B * H * dy, dx))
    stages.append((B * H * kx, plan(dy, FORWARD, keep=(ky if builtin else dy))))
    base.append((B * H * kx, dy))
    if builtin:
        stages.append((B * N * kx, plan(dy, INVERSE, src_len=ky)))
    else:
        stages.append((B * N * dx, plan(dy, INVERSE)))
    base.append((B * N * dx, dy))
    if cfg.rank == 2:
        stages.append((B * N * dy, plan(dx, INVERSE, src_len=(kx if builtin else dx))))
        base.append((B * N * dy, dx))

    budget = sum(p * pl.op_budget for p, pl in stages)
    twiddles = sum(p * pl.twiddle_budget for p, pl in stages)
    baseline = sum(p * full_op_count(n) for p, n in base)
    ratio = budget / baseline if baseline else 1.0

    if cfg.rank == 2:
        s2_elems = B * H * kx * (ky if builtin else dy)
        s2_untrunc = B * H * dx * dy
    else:
        s2_elems = B * H * (ky if builtin else dy)
        s2_untrunc = B * H * dy
    return {
        "fft_op_budget": budget,
        "fft_twiddle_muls": twiddles,
        "fft_op_baseline": baseline,
        "fft_op_ratio": ratio,
        "fft_op_reduction": 1.0 - ratio,
        "stage2_elements": s2_elems,
        "stage2_elements_untruncated": s2_untrunc,
    }
