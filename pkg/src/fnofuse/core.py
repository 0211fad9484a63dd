"""Shared domain types for the spectral-layer toolkit.

Everything downstream (FFT, GEMM, pipeline, CLI) operates on single-precision
complex data.  The canonical tensor layout is a 4-D array
``[batch, hidden, dim_x, dim_y]`` stored row-major with ``dim_y`` fastest,
so 1-D transforms along ``dim_y`` read contiguous pencils.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

# Element type of all signals, spectra and matrices: 8 bytes, serialized (re, im).
COMPLEX_DTYPE = np.dtype(np.complex64)
COMPLEX_BYTES = COMPLEX_DTYPE.itemsize
assert COMPLEX_BYTES == 8

AXIS_ORDER = ("batch", "hidden", "dim_x", "dim_y")

# FFT signals processed per block; k_tb must match it for the fused schedule.
FFT_BLOCK_BATCH = 8


class FnofuseError(ValueError):
    """Base class for all errors raised by this package."""


class ShapeMismatch(FnofuseError):
    """Operands do not conform (matrix shapes, tensor/config disagreement)."""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def max_rel_error(actual: np.ndarray, reference: np.ndarray) -> float:
    """Infinity-norm relative error: ||a - r||_inf / ||r||_inf.

    Global normalization is used instead of elementwise division because
    spectra legitimately contain exact zeros.  Returns the absolute error
    when the reference is identically zero.
    """
    a = np.asarray(actual)
    r = np.asarray(reference)
    err = float(np.max(np.abs(a.astype(np.complex128) - r.astype(np.complex128)), initial=0.0))
    scale = float(np.max(np.abs(r.astype(np.complex128)), initial=0.0))
    return err / scale if scale > 0.0 else err


@dataclass(frozen=True)
class SpectralTensor:
    """4-D complex tensor [batch, hidden, dim_x, dim_y], dim_y contiguous."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=COMPLEX_DTYPE)
        if arr.ndim != 4:
            raise ShapeMismatch(f"expected 4-D data, got {arr.ndim}-D")
        object.__setattr__(self, "data", arr)

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def hidden(self) -> int:
        return self.data.shape[1]

    @property
    def dim_x(self) -> int:
        return self.data.shape[2]

    @property
    def dim_y(self) -> int:
        return self.data.shape[3]

    @property
    def layout(self) -> tuple:
        return AXIS_ORDER

    def flat_index(self, b: int, h: int, x: int, y: int) -> int:
        """Row-major flat offset of element (b, h, x, y)."""
        return ((b * self.hidden + h) * self.dim_x + x) * self.dim_y + y

    def unflatten_index(self, i: int) -> tuple:
        """Inverse of :meth:`flat_index`."""
        i, y = divmod(i, self.dim_y)
        i, x = divmod(i, self.dim_x)
        b, h = divmod(i, self.hidden)
        return b, h, x, y

    @classmethod
    def zeros(cls, batch, hidden, dim_x, dim_y) -> "SpectralTensor":
        return cls(np.zeros((batch, hidden, dim_x, dim_y), dtype=COMPLEX_DTYPE))


@dataclass(frozen=True)
class FnoLayerConfig:
    """Spectral layer shape: input channels K, output channels N, spatial
    lengths and the truncation keep-counts along each transformed axis.

    rank 1 transforms along dim_y only; dim_x and keep_x are pinned to 1
    and the spatial batch folds into ``batch``.
    """

    batch: int
    hidden_dim: int
    output_dim: int
    dim_x: int
    dim_y: int
    keep_x: int
    keep_y: int
    rank: int = 2

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "FnoLayerConfig":
        return cls(**{k: int(d[k]) for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class TileConfig:
    """GEMM blocking parameters: threadblock (m_tb, n_tb, k_tb), warp
    (m_w, n_w) and per-thread (m_t, n_t) tile sizes."""

    m_tb: int
    n_tb: int
    k_tb: int
    m_w: int
    n_w: int
    m_t: int
    n_t: int

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "TileConfig":
        return cls(**{k: int(d[k]) for k in cls.__dataclass_fields__})


# Default blocking and the two published alternates; all three validate.
DEFAULT_TILES = TileConfig(m_tb=32, n_tb=32, k_tb=8, m_w=32, n_w=16, m_t=4, n_t=4)
WIDE_TILES = TileConfig(m_tb=64, n_tb=64, k_tb=8, m_w=32, n_w=16, m_t=4, n_t=4)
TALL_TILES = TileConfig(m_tb=64, n_tb=128, k_tb=8, m_w=32, n_w=16, m_t=4, n_t=4)


@dataclass(frozen=True)
class ConstraintViolation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


class ConfigError(FnofuseError):
    """Raised by validate_config; carries the full violation report."""

    def __init__(self, violations: Iterable[ConstraintViolation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def tile_violations(tiles: TileConfig) -> list:
    """Check the TileConfig divisibility and warp-coverage invariants."""
    out = []
    vals = asdict(tiles)
    if any(v < 1 for v in vals.values()):
        out.append(ConstraintViolation(
            "TileDivisibilityViolation", f"tile sizes must be positive: {vals}"))
        return out
    for big, small in (("m_tb", "m_w"), ("n_tb", "n_w"), ("m_w", "m_t"), ("n_w", "n_t")):
        if vals[big] % vals[small]:
            out.append(ConstraintViolation(
                "TileDivisibilityViolation",
                f"{big}={vals[big]} not divisible by {small}={vals[small]}"))
    lanes = (tiles.m_w // tiles.m_t) * (tiles.n_w // tiles.n_t) if not out else 0
    if not out and lanes != 32:
        out.append(ConstraintViolation(
            "TileDivisibilityViolation",
            f"warp tile covers {lanes} lanes, expected 32"))
    return out


def config_violations(cfg: FnoLayerConfig, tiles: TileConfig,
                      fft_batch_size: int = FFT_BLOCK_BATCH) -> list:
    """Collect every violated constraint of (cfg, tiles); empty means valid."""
    out = []
    if cfg.rank not in (1, 2):
        out.append(ConstraintViolation("InvalidRankShape", f"rank must be 1 or 2, got {cfg.rank}"))
    for name in ("batch", "hidden_dim", "output_dim"):
        if getattr(cfg, name) < 1:
            out.append(ConstraintViolation("InvalidRankShape", f"{name} must be >= 1"))
    for name in ("dim_x", "dim_y"):
        n = getattr(cfg, name)
        if not is_power_of_two(n):
            out.append(ConstraintViolation(
                "NonPowerOfTwoLength", f"{name}={n} is not a power of two"))
    for keep, dim in (("keep_x", "dim_x"), ("keep_y", "dim_y")):
        k, n = getattr(cfg, keep), getattr(cfg, dim)
        if not (1 <= k <= n):
            out.append(ConstraintViolation(
                "TruncationExceedsLength", f"{keep}={k} outside [1, {dim}={n}]"))
    if cfg.rank == 1 and (cfg.dim_x != 1 or cfg.keep_x != 1):
        out.append(ConstraintViolation(
            "InvalidRankShape",
            f"rank 1 requires dim_x == keep_x == 1 "
            f"(got dim_x={cfg.dim_x}, keep_x={cfg.keep_x})"))
    out.extend(tile_violations(tiles))
    if tiles.k_tb != fft_batch_size:
        out.append(ConstraintViolation(
            "BatchSizeMismatch",
            f"k_tb={tiles.k_tb} must equal the FFT per-block batch size "
            f"bs={fft_batch_size}"))
    return out


def validate_config(cfg: FnoLayerConfig, tiles: TileConfig,
                    fft_batch_size: int = FFT_BLOCK_BATCH):
    """Return (cfg, tiles) unchanged if all invariants hold.

    Raises :class:`ConfigError` carrying the list of violated constraints
    otherwise; use :func:`config_violations` to obtain the report without
    raising.
    """
    violations = config_violations(cfg, tiles, fft_batch_size)
    if violations:
        raise ConfigError(violations)
    return cfg, tiles


def random_spectral(cfg: FnoLayerConfig, rng: np.random.Generator) -> SpectralTensor:
    """Seeded random layer input matching cfg's shape."""
    shape = (cfg.batch, cfg.hidden_dim, cfg.dim_x, cfg.dim_y)
    re = rng.standard_normal(shape, dtype=np.float32)
    im = rng.standard_normal(shape, dtype=np.float32)
    return SpectralTensor((re + 1j * im).astype(COMPLEX_DTYPE))
