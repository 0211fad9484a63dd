"""fnofuse: spectral-layer modeling kit.

Pruned/truncated/zero-padded Stockham FFT with exact op counting, tiled
complex GEMM, staged and fused FFT-GEMM-iFFT pipeline executions with a
byte-exact global-traffic ledger, and a warp-level shared-memory bank
simulator for the forwarding/epilogue swizzle layouts.
"""

from .core import (COMPLEX_BYTES, COMPLEX_DTYPE, DEFAULT_TILES, TALL_TILES,
                   WIDE_TILES, ConfigError, ConstraintViolation, FnoLayerConfig,
                   FnofuseError, ShapeMismatch, SpectralTensor, TileConfig,
                   config_violations, max_rel_error, random_spectral,
                   validate_config)
from .fft import (FORWARD, INVERSE, FftPlan, InvalidKeep, InvalidLength,
                  InvalidSrcLen, LengthMismatch, OpCount, StrideOverlap,
                  batched_execute, execute, full_op_count, plan)
from .cgemm import ComplexMatrix, GemmProblem, gemm_kloop, gemm_oracle, gemm_tiled
from .pipeline import (ARRAY_NAMES, MODES, ConfigMismatch, FusedSchedule,
                       ScheduleInvalid, TrafficDelta, TrafficLedger,
                       build_schedule, layer_op_stats, run_fused, run_layer,
                       run_staged, traffic_delta)
from .banks import (BankReport, LAYOUT_NAMES, SwizzleLayout, UndefinedCombination,
                    UnsupportedTile, WarpAccessPattern, gemm_read_pattern,
                    get_layout, layout_feeds_gemm, layout_pattern,
                    layout_phase_reports, simulate, verify_epilogue_swizzle)
from .reporting import (ExperimentGrid, InvalidGrid, compute_report_rows,
                        default_grids, grid_points, point_config,
                        read_raw_matrix, read_raw_tensor, write_raw_matrix,
                        write_raw_tensor)

__version__ = "0.1.0"
