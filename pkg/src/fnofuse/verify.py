"""Seeded self-check suites behind the ``verify`` CLI command.

Each suite exercises one module's invariants over randomized inputs (and
over the configured experiment grid where it applies) and reports
pass/fail counts; any failure makes the command exit nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import banks
from .core import (DEFAULT_TILES, TALL_TILES, WIDE_TILES, FnoLayerConfig,
                   SpectralTensor, TileConfig, config_violations, max_rel_error,
                   random_spectral)
from .cgemm import ComplexMatrix, GemmProblem, gemm_oracle, gemm_tiled
from .fft import INVERSE, execute, full_op_count, plan
from .pipeline import run_layer, traffic_delta
from .reporting import grid_points, point_config


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    messages: list = field(default_factory=list)

    def check(self, ok: bool, message: str) -> None:
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            self.messages.append(message)

    @property
    def ok(self) -> bool:
        return self.failed == 0


def suite_core(seed: int) -> SuiteResult:
    res = SuiteResult("core-types")
    rng = np.random.default_rng(seed)
    for _ in range(20):
        shape = tuple(int(v) for v in rng.integers(1, 9, size=4))
        t = SpectralTensor.zeros(*shape)
        idx = rng.integers(0, np.prod(shape), size=500)
        ok = all(t.flat_index(*t.unflatten_index(int(i))) == int(i) for i in idx)
        res.check(ok, f"flatten/unflatten round-trip failed for shape {shape}")

    for dim in (128, 256):
        for keep in (64, 128):
            for hidden in (16, 32, 64, 128):
                for tiles in (DEFAULT_TILES, WIDE_TILES, TALL_TILES):
                    cfg2 = FnoLayerConfig(2, hidden, hidden, dim, dim, keep, keep, rank=2)
                    cfg1 = FnoLayerConfig(64, hidden, hidden, 1, dim, 1, keep, rank=1)
                    for cfg in (cfg1, cfg2):
                        v = config_violations(cfg, tiles)
                        res.check(not v, f"rejected valid config {cfg}: {v}")

    bad = [
        (FnoLayerConfig(1, 16, 16, 1, 100, 1, 50, rank=1), DEFAULT_TILES,
         "NonPowerOfTwoLength"),
        (FnoLayerConfig(1, 16, 16, 1, 256, 1, 300, rank=1), DEFAULT_TILES,
         "TruncationExceedsLength"),
        (FnoLayerConfig(1, 16, 16, 1, 256, 1, 64, rank=1),
         TileConfig(32, 32, 16, 32, 16, 4, 4), "BatchSizeMismatch"),
        (FnoLayerConfig(1, 16, 16, 1, 256, 1, 64, rank=1),
         TileConfig(32, 32, 8, 32, 16, 4, 8), "TileDivisibilityViolation"),
    ]
    for cfg, tiles, code in bad:
        v = config_violations(cfg, tiles)
        res.check(any(x.code == code for x in v),
                  f"expected {code} for {cfg}/{tiles}, got {v}")
    return res


def suite_fft(seed: int) -> SuiteResult:
    res = SuiteResult("fft")
    rng = np.random.default_rng(seed)

    res.check(plan(4, keep=1).op_budget == 3, "plan(4, keep=1) budget != 3")
    res.check(plan(4, keep=2).op_budget == 6, "plan(4, keep=2) budget != 6")
    res.check(full_op_count(4) == 8, "full_op_count(4) != 8")
    res.check(plan(4, keep=1).op_budget / full_op_count(4) == 0.375,
              "keep=1 ratio != 0.375")
    res.check(plan(4, keep=2).op_budget / full_op_count(4) == 0.75,
              "keep=2 ratio != 0.75")

    for n in (8, 64, 256, 1024):
        x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)).astype(np.complex64)
        y = (rng.standard_normal(n) + 1j * rng.standard_normal(n)).astype(np.complex64)
        a, b = (complex(*rng.standard_normal(2)) for _ in range(2))
        p = plan(n)
        fx, _ = execute(p, x)
        fy, _ = execute(p, y)
        fz, _ = execute(p, (a * x + b * y).astype(np.complex64))
        res.check(max_rel_error(fz, a * fx + b * fy) < 1e-4,
                  f"linearity failed at n={n}")
        back, _ = execute(plan(n, INVERSE), fx.astype(np.complex64))
        res.check(max_rel_error(back, x) < 1e-4, f"round-trip failed at n={n}")

    for n in (4, 16, 64, 256):
        x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)).astype(np.complex64)
        full, _ = execute(plan(n), x)
        keeps = range(1, n + 1) if n <= 16 else \
            sorted({1, 2, 3, n // 4, n // 2, n - 1, n})
        for keep in keeps:
            pruned, cnt = execute(plan(n, keep=keep), x)
            res.check(np.array_equal(pruned, full[:keep]),
                      f"pruned output mismatch n={n} keep={keep}")
            res.check(cnt.butterflies + cnt.skipped == full_op_count(n),
                      f"op conservation failed n={n} keep={keep}")
        for src in sorted({1, n // 4, n // 2, n}):
            short = x[:src]
            padded = np.zeros(n, np.complex64)
            padded[:src] = short
            a1, _ = execute(plan(n, src_len=src), short)
            a2, _ = execute(plan(n), padded)
            res.check(np.array_equal(a1, a2),
                      f"padding prune mismatch n={n} src={src}")

    budgets = [plan(64, keep=k).op_budget for k in range(1, 65)]
    res.check(all(b1 <= b2 for b1, b2 in zip(budgets, budgets[1:])),
              "op budget not monotone in keep")
    budgets = [plan(64, src_len=s).op_budget for s in range(1, 65)]
    res.check(all(b1 <= b2 for b1, b2 in zip(budgets, budgets[1:])),
              "op budget not monotone in src_len")
    return res


def suite_cgemm(seed: int) -> SuiteResult:
    res = SuiteResult("cgemm")
    rng = np.random.default_rng(seed)

    a = ComplexMatrix.random(48, 16, rng)
    c = gemm_tiled(GemmProblem(48, 16, 16), a, ComplexMatrix.identity(16))
    res.check(np.array_equal(c.values, a.values), "identity weight not exact")

    one = gemm_tiled(GemmProblem(1, 1, 1),
                     ComplexMatrix(np.array([[2 + 1j]])),
                     ComplexMatrix(np.array([[3 - 1j]])))
    res.check(one.values[0, 0] == np.complex64(7 + 1j), "scalar product wrong")

    for _ in range(12):
        m = int(rng.integers(5, 200))
        n = int(rng.integers(3, 70))
        k = int(rng.integers(1, 40))
        a = ComplexMatrix.random(m, k, rng)
        b = ComplexMatrix.random(k, n, rng)
        got = gemm_tiled(GemmProblem(m, n, k), a, b)
        want = gemm_oracle(a, b)
        res.check(max_rel_error(got.values, want.values) < 1e-3,
                  f"tiled vs oracle mismatch at {m}x{n}x{k}")
        alt = gemm_tiled(GemmProblem(m, n, k, WIDE_TILES), a, b)
        res.check(max_rel_error(alt.values, got.values) < 2e-3,
                  f"tile-parameter dependence at {m}x{n}x{k}")

    a = ComplexMatrix.random(8, 8, rng)
    b = ComplexMatrix.random(8, 8, rng)
    ab_t = gemm_oracle(a, b).values.T
    bt_at = gemm_oracle(ComplexMatrix(b.values.T), ComplexMatrix(a.values.T)).values
    res.check(max_rel_error(ab_t, bt_at) < 1e-6, "oracle transpose identity failed")
    return res


def suite_banks(_seed: int) -> SuiteResult:
    res = SuiteResult("banks")
    combos = [("strided_vkfft", 16), ("strided_vkfft", 8),
              ("consecutive_turbofno", 16), ("consecutive_turbofno", 8),
              ("fft16_naive", 16), ("fft16_swizzled", 16),
              ("fft8_naive", 8), ("fft8_swizzled", 8),
              ("epilogue_naive", 16), ("epilogue_swizzled", 16)]
    for name, fs in combos:
        spec = banks.get_layout(name, fs)
        addrs = {spec.address_fn(t, j)
                 for t in range(spec.threads)
                 for j in range(spec.elements_per_thread)}
        res.check(len(addrs) == spec.threads * spec.elements_per_thread,
                  f"{name}/{fs} address_fn not injective")

    for naive, swz in (("fft16_naive", "fft16_swizzled"),
                       ("fft8_naive", "fft8_swizzled"),
                       ("epilogue_naive", "epilogue_swizzled")):
        fs = 8 if "fft8" in naive else 16
        a = banks.get_layout(naive, fs)
        b = banks.get_layout(swz, fs)
        same_image = all(
            {a.address_fn(t, j) for j in range(a.elements_per_thread)}
            == {b.address_fn(t, j) for j in range(b.elements_per_thread)}
            for t in range(a.threads))
        res.check(same_image, f"{swz} does not permute {naive}'s image per thread")

    pinned = [("fft16_naive", 16, 0.0625), ("fft16_swizzled", 16, 1.0),
              ("fft8_swizzled", 8, 1.0), ("epilogue_swizzled", 16, 1.0)]
    for name, fs, want in pinned:
        utils = {r.utilization for r in banks.layout_phase_reports(name, fs)}
        res.check(utils == {want}, f"{name} utilization {utils}, want {want}")
    degrees = [r.max_conflict_degree
               for r in banks.layout_phase_reports("epilogue_naive", 16)]
    res.check(min(degrees) >= 4, f"naive epilogue degree {degrees} < 4")

    res.check(banks.layout_feeds_gemm("strided_vkfft") is False,
              "strided layout should not feed the GEMM")
    res.check(banks.simulate(banks.gemm_read_pattern("strided_vkfft"))
              .utilization == 0.25, "strided GEMM read utilization != 0.25")
    res.check(banks.layout_feeds_gemm("consecutive_turbofno") is True,
              "consecutive layout should feed the GEMM")
    return res


def suite_pipeline(grids, seed: int) -> SuiteResult:
    res = SuiteResult("pipeline")
    rng_root = np.random.SeedSequence(seed)
    for gi, grid in enumerate(grids):
        for idx, dim, keep, hidden, bd in grid_points(grid):
            cfg = point_config(grid, dim, keep, hidden, bd)
            bad = config_violations(cfg, DEFAULT_TILES)
            res.check(not bad, f"grid point {cfg} invalid: {bad}")
            if bad:
                continue
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence((seed, gi, idx))))
            x = random_spectral(cfg, rng)
            w = ComplexMatrix.random(cfg.hidden_dim, cfg.output_dim, rng)
            out_s, led_s = run_layer(cfg, x, w, DEFAULT_TILES, "staged")
            for mode in grid.modes:
                if mode == "staged":
                    continue
                out, led = run_layer(cfg, x, w, DEFAULT_TILES, mode)
                err = max_rel_error(out.data, out_s.data)
                res.check(err < 1e-3,
                          f"{mode} differs from staged by {err:.2e} at {cfg}")
                for name, t in led.arrays.items():
                    st = led_s.arrays[name]
                    res.check(t.total <= st.total,
                              f"{mode} {name} traffic exceeds staged at {cfg}")
                if mode == "fully_fused":
                    res.check(led.total("A_panel") == 0 and led.total("C") == 0,
                              f"fused touches A_panel/C globally at {cfg}")
                    res.check(led_s.total("A_panel") > 0 and led_s.total("C") > 0,
                              f"staged A_panel/C unexpectedly zero at {cfg}")
                    delta = traffic_delta(led_s, led)
                    res.check(delta.arrays["A_panel"]["traffic_ratio"] == 0.0,
                              f"A_panel ratio nonzero at {cfg}")
    return res


def run_suites(grids, seed: int) -> list:
    return [
        suite_core(seed),
        suite_fft(seed + 1),
        suite_cgemm(seed + 2),
        suite_banks(seed + 3),
        suite_pipeline(grids, seed),
    ]
