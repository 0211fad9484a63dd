"""Tiled single-precision complex GEMM (C = A @ B) plus a double-precision
brute-force oracle.

The blocking follows the threadblock / warp / thread hierarchy carried by
TileConfig.  Only the threadblock tiling and the ascending k_tb chunking
affect arithmetic: every C element is a k-ascending fp32 sum regardless of
how the m/n plane is partitioned, so the warp and per-thread tiles matter
for the access-pattern models (banks, ledger), not for values here.
Ragged edges are handled with bounds-checked partial tiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import COMPLEX_DTYPE, DEFAULT_TILES, ShapeMismatch, TileConfig, tile_violations


@dataclass(frozen=True)
class ComplexMatrix:
    """Column-major complex64 matrix."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asfortranarray(self.values, dtype=COMPLEX_DTYPE)
        if arr.ndim != 2:
            raise ShapeMismatch(f"expected a 2-D matrix, got {arr.ndim}-D")
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def data(self) -> np.ndarray:
        """Flat column-major buffer (serialization order re, im per element)."""
        return self.values.ravel(order="F")

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "ComplexMatrix":
        return cls(np.zeros((rows, cols), dtype=COMPLEX_DTYPE, order="F"))

    @classmethod
    def identity(cls, n: int) -> "ComplexMatrix":
        return cls(np.eye(n, dtype=COMPLEX_DTYPE, order="F"))

    @classmethod
    def random(cls, rows: int, cols: int, rng: np.random.Generator) -> "ComplexMatrix":
        re = rng.standard_normal((rows, cols), dtype=np.float32)
        im = rng.standard_normal((rows, cols), dtype=np.float32)
        return cls(re + 1j * im)


@dataclass(frozen=True)
class GemmProblem:
    """Problem shape: C is m x n, accumulated over k, blocked per tiles."""

    m: int
    n: int
    k: int
    tiles: TileConfig = DEFAULT_TILES


def _check_shapes(p: GemmProblem, a: ComplexMatrix, b: ComplexMatrix) -> None:
    if (a.rows, a.cols) != (p.m, p.k):
        raise ShapeMismatch(f"A is {a.rows}x{a.cols}, problem wants {p.m}x{p.k}")
    if (b.rows, b.cols) != (p.k, p.n):
        raise ShapeMismatch(f"B is {b.rows}x{b.cols}, problem wants {p.k}x{p.n}")
    if min(p.m, p.n, p.k) < 1:
        raise ShapeMismatch(f"degenerate problem {p.m}x{p.n}x{p.k}")
    bad = tile_violations(p.tiles)
    if bad:
        raise ShapeMismatch("; ".join(str(v) for v in bad))


def gemm_kloop(a: np.ndarray, b: np.ndarray, k_tb: int) -> np.ndarray:
    """Whole-width product accumulated in ascending k_tb chunks (fp32).

    This is the arithmetic core shared with the fused pipeline: identical
    per-element accumulation order to the tile loop in gemm_tiled.
    """
    m, k = a.shape
    n = b.shape[1]
    c = np.zeros((m, n), dtype=COMPLEX_DTYPE)
    for k0 in range(0, k, k_tb):
        k1 = min(k, k0 + k_tb)
        c += a[:, k0:k1] @ b[k0:k1, :]
    return c


def gemm_tiled(p: GemmProblem, a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """Blocked product over m_tb x n_tb output tiles, k ascending in k_tb
    chunks, fp32 accumulation.  Partial edge tiles are bounds-checked."""
    _check_shapes(p, a, b)
    av, bv = a.values, b.values
    t = p.tiles
    c = np.zeros((p.m, p.n), dtype=COMPLEX_DTYPE, order="F")
    for i0 in range(0, p.m, t.m_tb):
        i1 = min(p.m, i0 + t.m_tb)
        for j0 in range(0, p.n, t.n_tb):
            j1 = min(p.n, j0 + t.n_tb)
            acc = np.zeros((i1 - i0, j1 - j0), dtype=COMPLEX_DTYPE)
            for k0 in range(0, p.k, t.k_tb):
                k1 = min(p.k, k0 + t.k_tb)
                acc += av[i0:i1, k0:k1] @ bv[k0:k1, j0:j1]
            c[i0:i1, j0:j1] = acc
    return ComplexMatrix(c)


def gemm_oracle(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """Naive i-j-k product accumulated in double precision, then rounded."""
    if a.cols != b.rows:
        raise ShapeMismatch(f"inner dims differ: {a.cols} vs {b.rows}")
    wide = np.einsum("ik,kj->ij",
                     a.values.astype(np.complex128),
                     b.values.astype(np.complex128))
    return ComplexMatrix(wide.astype(COMPLEX_DTYPE))
