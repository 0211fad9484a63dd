import numpy as np
import pytest

from fnofuse.core import (COMPLEX_BYTES as E, DEFAULT_TILES, ConfigError,
                          FnoLayerConfig, ShapeMismatch, SpectralTensor,
                          max_rel_error, random_spectral)
from fnofuse.cgemm import ComplexMatrix
from fnofuse.pipeline import (ARRAY_NAMES, MODES, ConfigMismatch, ScheduleInvalid,
                              build_schedule, layer_op_stats, run_fused,
                              run_layer, run_staged, traffic_delta)
from oracles import reference_layer

RNG = np.random.default_rng(5150)


def layer(rank=1, batch=2, hidden=16, out=16, dim=64, keep=16, dim_x=8, keep_x=4):
    if rank == 1:
        return FnoLayerConfig(batch, hidden, out, 1, dim, 1, keep, rank=1)
    return FnoLayerConfig(batch, hidden, out, dim_x, dim, keep_x, keep, rank=2)


def data_for(cfg):
    x = random_spectral(cfg, RNG)
    w = ComplexMatrix.random(cfg.hidden_dim, cfg.output_dim, RNG)
    return x, w


# ---------------------------------------------------------------------------
# numerics
# ---------------------------------------------------------------------------

def test_identity_weight_no_truncation_is_identity():
    cfg = FnoLayerConfig(3, 8, 8, 1, 64, 1, 64, rank=1)
    x, _ = data_for(cfg)
    w = ComplexMatrix.identity(8)
    for mode in ("staged", "fully_fused"):
        out, _ = run_layer(cfg, x, w, mode=mode)
        assert max_rel_error(out.data, x.data) < 1e-3


def test_zero_input_zero_output_nonzero_ledger():
    cfg = layer()
    x = SpectralTensor.zeros(cfg.batch, cfg.hidden_dim, 1, cfg.dim_y)
    _, w = data_for(cfg)
    out, led = run_staged(cfg, x, w)
    assert not out.data.any()
    assert led.total_bytes() > 0


@pytest.mark.parametrize("rank", [1, 2])
@pytest.mark.parametrize("mode", MODES)
def test_modes_match_reference_composition(rank, mode):
    cfg = layer(rank=rank, batch=2, hidden=16, out=24, dim=128, keep=32)
    x, w = data_for(cfg)
    ref = reference_layer(cfg, x.data, w.values)
    out, _ = run_layer(cfg, x, w, mode=mode)
    assert out.data.shape == (cfg.batch, cfg.output_dim, cfg.dim_x, cfg.dim_y)
    assert max_rel_error(out.data, ref) < 1e-3


@pytest.mark.parametrize("rank", [1, 2])
def test_fused_equals_staged(rank):
    for keep_frac in (4, 2, 1):
        cfg = layer(rank=rank, batch=3, hidden=24, out=16, dim=64,
                    keep=64 // keep_frac, dim_x=16, keep_x=16 // keep_frac)
        x, w = data_for(cfg)
        out_s, _ = run_staged(cfg, x, w)
        out_f, _ = run_fused(cfg, x, w)
        assert max_rel_error(out_f.data, out_s.data) < 1e-3


def test_epilogue_equals_whole_matrix_inverse():
    # the epilogue walks n-tiles; a separate whole-matrix inverse pass over
    # the same C must produce bitwise-identical output
    cfg = layer(rank=1, batch=2, hidden=16, out=80, dim=64, keep=16)
    x, w = data_for(cfg)
    out_tiles, _ = run_layer(cfg, x, w, mode="fused_gemm_ifft")
    out_whole, _ = run_layer(cfg, x, w, mode="fft_optimized")
    assert np.array_equal(out_tiles.data, out_whole.data)


def test_deterministic_across_runs():
    cfg = layer(rank=2, dim=32, keep=8, dim_x=16, keep_x=4)
    x, w = data_for(cfg)
    a, la = run_fused(cfg, x, w)
    b, lb = run_fused(cfg, x, w)
    assert np.array_equal(a.data, b.data)
    assert la.to_json_dict() == lb.to_json_dict()


# ---------------------------------------------------------------------------
# ledger bytes: full expected tables for both ranks, all modes
# ---------------------------------------------------------------------------

def expected_traffic(cfg, mode):
    B, H, N = cfg.batch, cfg.hidden_dim, cfg.output_dim
    dx, dy, kx, ky = cfg.dim_x, cfg.dim_y, cfg.keep_x, cfg.keep_y
    m = B * kx * ky
    din = B * H * dx * dy * E
    s1t = B * H * kx * dy * E
    sa = m * H * E
    sc = m * N * E
    dmid = B * N * kx * dy * E
    dout = B * N * dx * dy * E
    bb = -(-m // DEFAULT_TILES.m_tb) * H * N * E
    t = {name: [0, 0] for name in ARRAY_NAMES}  # [read, written]

    def add(name, r=0, w=0):
        t[name][0] += r
        t[name][1] += w

    rank2 = cfg.rank == 2
    if mode == "staged":
        launches = 8 if rank2 else 5
        add("input", r=din)
        if rank2:
            add("spectrum_stage1", w=din)                 # stage-1 full
            add("spectrum_stage1", r=s1t, w=s1t)          # truncate x
            add("spectrum_stage1", r=s1t, w=s1t)          # stage-2 full
            add("spectrum_stage1", r=sa)                  # truncate y reads
            add("A_panel", w=sa)
        else:
            add("spectrum_stage1", w=din)
            add("spectrum_stage1", r=sa)
            add("A_panel", w=sa)
        add("A_panel", r=sa)
        add("B", r=bb)
        add("C", w=sc, r=sc)
        add("output", w=dout)                             # pad
        add("output", r=dout, w=dout)                     # inverse y
        if rank2:
            add("output", r=dout, w=dout)                 # inverse x
        return t, launches

    fuse_fg = mode in ("fused_fft_gemm", "fully_fused")
    fuse_gi = mode in ("fused_gemm_ifft", "fully_fused")
    launches = 1
    if rank2:
        add("input", r=din)
        add("spectrum_stage1", w=s1t)
        add("spectrum_stage1", r=s1t)
        launches += 1
    else:
        add("input", r=din)
    if not fuse_fg:
        add("A_panel", w=sa, r=sa)
        launches += 1
    add("B", r=bb)
    if not fuse_gi:
        add("C", w=sc, r=sc)
        launches += 1
    add("output", w=dmid)
    if rank2:
        add("output", r=dmid, w=dout)
        launches += 1
    return t, launches


@pytest.mark.parametrize("rank", [1, 2])
@pytest.mark.parametrize("mode", MODES)
def test_ledger_matches_expected_table(rank, mode):
    cfg = layer(rank=rank, batch=3, hidden=24, out=40, dim=64, keep=16,
                dim_x=32, keep_x=8)
    x, w = data_for(cfg)
    _, led = run_layer(cfg, x, w, mode=mode)
    want, launches = expected_traffic(cfg, mode)
    got = {n: [led.arrays[n].bytes_read, led.arrays[n].bytes_written]
           for n in ARRAY_NAMES}
    assert got == want
    assert led.kernel_launches == launches


@pytest.mark.parametrize("rank", [1, 2])
def test_fused_never_exceeds_staged_and_eliminates_intermediates(rank):
    cfg = layer(rank=rank, batch=2, hidden=16, out=16, dim=64, keep=16,
                dim_x=16, keep_x=4)
    x, w = data_for(cfg)
    _, led_s = run_staged(cfg, x, w)
    for mode in MODES[1:]:
        _, led = run_layer(cfg, x, w, mode=mode)
        for name in ARRAY_NAMES:
            assert led.total(name) <= led_s.total(name), (mode, name)
    _, led_f = run_fused(cfg, x, w)
    assert led_f.total("A_panel") == 0
    assert led_f.total("C") == 0
    assert led_s.total("A_panel") > 0
    assert led_s.total("C") > 0


def test_staged_write_read_conservation():
    # bytes a later pass reads from an array never exceed what was written
    cfg = layer(rank=2, batch=2, hidden=16, out=16, dim=64, keep=16,
                dim_x=16, keep_x=4)
    x, w = data_for(cfg)
    for mode in MODES:
        _, led = run_layer(cfg, x, w, mode=mode)
        for name in ("spectrum_stage1", "A_panel", "C"):
            t = led.arrays[name]
            assert t.bytes_read <= t.bytes_written, (mode, name)


def test_rank1_kernel_launch_counts():
    cfg = layer(rank=1)
    x, w = data_for(cfg)
    counts = {mode: run_layer(cfg, x, w, mode=mode)[1].kernel_launches
              for mode in MODES}
    assert counts == {"staged": 5, "fft_optimized": 3, "fused_fft_gemm": 2,
                      "fused_gemm_ifft": 2, "fully_fused": 1}


# ---------------------------------------------------------------------------
# traffic_delta
# ---------------------------------------------------------------------------

def test_delta_zero_for_identical_ledgers():
    cfg = layer()
    x, w = data_for(cfg)
    _, led = run_staged(cfg, x, w)
    d = traffic_delta(led, led)
    for name in ARRAY_NAMES:
        assert d.arrays[name]["saved_read"] == 0
        assert d.arrays[name]["saved_written"] == 0


def test_delta_a_panel_saving_matches_analytic_count():
    cfg = FnoLayerConfig(batch=1024, hidden_dim=64, output_dim=64, dim_x=1,
                         dim_y=256, keep_x=1, keep_y=64, rank=1)
    x, w = data_for(cfg)
    _, led_s = run_staged(cfg, x, w)
    _, led_f = run_fused(cfg, x, w)
    d = traffic_delta(led_s, led_f)
    want = 1024 * 64 * 64 * 8
    assert d.arrays["A_panel"]["saved_written"] == want
    assert d.arrays["A_panel"]["saved_read"] == want
    assert d.arrays["C"]["saved_written"] == led_s.arrays["C"].bytes_written
    assert d.arrays["C"]["saved_read"] == led_s.arrays["C"].bytes_read


def test_delta_quadratic_stage2_ratio():
    cfg = layer(rank=2, dim=64, keep=16, dim_x=64, keep_x=16)
    x, w = data_for(cfg)
    _, led_s = run_staged(cfg, x, w)
    _, led_f = run_fused(cfg, x, w)
    d = traffic_delta(led_s, led_f)
    assert d.stage1_write_ratio == 16 / 64
    assert d.stage2_compute_ratio == (16 / 64) ** 2


def test_delta_config_mismatch():
    cfg_a, cfg_b = layer(keep=16), layer(keep=32)
    xa, wa = data_for(cfg_a)
    xb, wb = data_for(cfg_b)
    _, la = run_staged(cfg_a, xa, wa)
    _, lb = run_fused(cfg_b, xb, wb)
    with pytest.raises(ConfigMismatch):
        traffic_delta(la, lb)


# ---------------------------------------------------------------------------
# schedules, op stats, errors
# ---------------------------------------------------------------------------

def test_schedule_alignment():
    cfg = layer(hidden=24)
    sched = build_schedule(cfg, DEFAULT_TILES)
    assert sched.panel_cols == DEFAULT_TILES.k_tb
    assert sched.k_loop_order == (0, 1, 2)
    assert sched.epilogue_tiles == ((0, 16),)
    with pytest.raises(ScheduleInvalid):
        build_schedule(cfg, DEFAULT_TILES, fft_batch_size=4)
    with pytest.raises(ScheduleInvalid):
        run_layer(cfg, *data_for(cfg), mode="fully_fused", fft_batch_size=4)


def test_shape_mismatch_errors():
    cfg = layer()
    x, w = data_for(cfg)
    wrong = SpectralTensor.zeros(cfg.batch, cfg.hidden_dim, 1, cfg.dim_y * 2)
    with pytest.raises(ShapeMismatch):
        run_staged(cfg, wrong, w)
    with pytest.raises(ShapeMismatch):
        run_staged(cfg, x, ComplexMatrix.random(cfg.hidden_dim + 1,
                                                cfg.output_dim, RNG))
    bad_cfg = FnoLayerConfig(2, 16, 16, 1, 100, 1, 50, rank=1)
    with pytest.raises(ConfigError):
        run_staged(bad_cfg, x, w)


def test_op_stats_reduction_bound():
    cfg = FnoLayerConfig(batch=8, hidden_dim=32, output_dim=32, dim_x=1,
                         dim_y=256, keep_x=1, keep_y=64, rank=1)
    stats = layer_op_stats(cfg, "fully_fused")
    assert 0.0 < stats["fft_op_reduction"] <= 0.675
    assert stats["fft_op_budget"] < stats["fft_op_baseline"]
    staged = layer_op_stats(cfg, "staged")
    assert staged["fft_op_ratio"] == 1.0
    assert staged["fft_op_budget"] == staged["fft_op_baseline"]
