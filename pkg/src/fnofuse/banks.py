"""Deterministic warp-level shared-memory bank simulator.

Shared memory is 32 banks of 4 bytes; byte address a maps to bank
``(a // 4) % 32``.  An 8-byte complex access touches two banks in one
phase.  A warp access serializes into ``phases = max touches on any one
bank`` transactions, so

    utilization = total bank touches / (phases * 32)

which is 1.0 exactly when the touches spread evenly over all 32 banks.
Half-warp workloads (the 16-point writeback uses threads 0..15) keep the
denominator at 32.

The layout registry models the two data arrangements used when an FFT
block forwards its output to the GEMM A operand, the per-thread writeback
patterns of the 16- and 8-point sub-transforms (with and without the
thread-offset swizzle), and the GEMM epilogue tile store feeding the
inverse transform.  Swizzled variants rotate the order in which a thread
writes its own elements; the final memory image is unchanged, so no
padding is required and un-swizzled readers see identical data.

Layout geometry:

* ``strided_vkfft`` / ``consecutive_turbofno``: a tile of ``fft_size``
  retained bins by 8 signals.  The strided arrangement interleaves
  signals (element r of signal p at slot ``r*8 + p``); the consecutive
  arrangement is column-major by signal (slot ``p*fft_size + r``), the
  order the GEMM consumes.
* ``fft16_*``: 16 threads each own one 16-element signal column.
* ``fft8_*``: 32 threads each own one 8-element signal column.
* ``epilogue_*``: a 32x16 output tile stored row-major (written along the
  n direction); thread t owns the 4x4 region at rows ``4*(t//4)``, cols
  ``4*(t%4)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import FnofuseError, TileConfig

N_BANKS = 32
BANK_BYTES = 4
WARP = 32
ELEMENT_BYTES = 8


class UndefinedCombination(FnofuseError):
    pass


class UnsupportedTile(FnofuseError):
    pass


@dataclass(frozen=True)
class WarpAccessPattern:
    """Exactly 32 per-thread entries of (start byte address, width in
    bytes); None marks an idle lane."""

    accesses: tuple
    element_width: int = ELEMENT_BYTES

    def __post_init__(self):
        acc = tuple(self.accesses)
        if len(acc) != WARP:
            raise FnofuseError(f"pattern needs exactly {WARP} entries, got {len(acc)}")
        for entry in acc:
            if entry is None:
                continue
            addr, width = entry
            if addr % BANK_BYTES or width % BANK_BYTES or width <= 0:
                raise FnofuseError(f"access ({addr}, {width}) not 4-byte aligned")
        object.__setattr__(self, "accesses", acc)

    def banks_touched(self) -> np.ndarray:
        """Per-bank touch counts over the whole warp access."""
        load = np.zeros(N_BANKS, dtype=np.int64)
        for entry in self.accesses:
            if entry is None:
                continue
            addr, width = entry
            first = addr // BANK_BYTES
            for w in range(width // BANK_BYTES):
                load[(first + w) % N_BANKS] += 1
        return load


@dataclass(frozen=True)
class BankReport:
    distinct_banks: int
    utilization: float
    max_conflict_degree: int
    phases: int
    bank_load: tuple

    def to_json_dict(self) -> dict:
        return {
            "distinct_banks": self.distinct_banks,
            "utilization": self.utilization,
            "max_conflict_degree": self.max_conflict_degree,
            "phases": self.phases,
            "bank_load": list(self.bank_load),
        }


def simulate(pattern: WarpAccessPattern) -> BankReport:
    """Exact bank arithmetic for one warp access."""
    load = pattern.banks_touched()
    touches = int(load.sum())
    degree = int(load.max()) if touches else 0
    distinct = int(np.count_nonzero(load))
    util = touches / (degree * N_BANKS) if degree else 0.0
    return BankReport(distinct_banks=distinct, utilization=util,
                      max_conflict_degree=degree, phases=degree,
                      bank_load=tuple(int(v) for v in load))


@dataclass(frozen=True)
class SwizzleLayout:
    """Named thread-to-address map: address_fn(thread, element) -> byte
    address, injective over the (threads x elements_per_thread) tile."""

    name: str
    threads: int
    elements_per_thread: int
    address_fn: Callable[[int, int], int]


def _tile_layout(name: str, fft_size: int) -> SwizzleLayout:
    rows = fft_size
    if name == "strided_vkfft":
        elems = rows // 4
        if elems < 1:
            raise UndefinedCombination(f"{name} undefined for fft_size={fft_size}")

        def fn(t, j, rows=rows):
            # thread t holds row (t//8) + 4j of signal t%8; signals interleave.
            return ELEMENT_BYTES * (((t // 8) + 4 * j) * 8 + (t % 8))

        return SwizzleLayout(name, WARP, elems, fn)
    if name == "consecutive_turbofno":
        per = rows // 4
        if per < 1:
            raise UndefinedCombination(f"{name} undefined for fft_size={fft_size}")

        def fn(t, j, rows=rows, per=per):
            # thread t holds rows per*(t%4) .. of signal t//4; column-major.
            return ELEMENT_BYTES * ((t // 4) * rows + per * (t % 4) + j)

        return SwizzleLayout(name, WARP, per, fn)
    raise UndefinedCombination(name)


def _writeback_layout(name: str) -> SwizzleLayout:
    if name == "fft16_naive":
        return SwizzleLayout(name, 16, 16,
                             lambda t, j: ELEMENT_BYTES * (t * 16 + j))
    if name == "fft16_swizzled":
        return SwizzleLayout(name, 16, 16,
                             lambda t, j: ELEMENT_BYTES * (t * 16 + (j + t) % 16))
    if name == "fft8_naive":
        return SwizzleLayout(name, 32, 8,
                             lambda t, j: ELEMENT_BYTES * (t * 8 + j))
    if name == "fft8_swizzled":
        return SwizzleLayout(name, 32, 8,
                             lambda t, j: ELEMENT_BYTES * (t * 8 + (j + t // 2) % 8))
    raise UndefinedCombination(name)


def _epilogue_layout(name: str) -> SwizzleLayout:
    swizzled = name == "epilogue_swizzled"
    if name not in ("epilogue_naive", "epilogue_swizzled"):
        raise UndefinedCombination(name)

    def fn(t, e, swizzled=swizzled):
        rm, cn = t // 4, t % 4
        jr, jc = e // 4, e % 4
        if swizzled:
            jc = (jc + rm) % 4
        return ELEMENT_BYTES * ((4 * rm + jr) * 16 + 4 * cn + jc)

    return SwizzleLayout(name, WARP, 16, fn)


LAYOUT_NAMES = ("strided_vkfft", "consecutive_turbofno",
                "fft16_naive", "fft16_swizzled",
                "fft8_naive", "fft8_swizzled",
                "epilogue_naive", "epilogue_swizzled")


def get_layout(name: str, fft_size: int = 16) -> SwizzleLayout:
    """Resolve a layout name (and tile geometry where it applies)."""
    if name in ("strided_vkfft", "consecutive_turbofno"):
        if fft_size not in (8, 16):
            raise UndefinedCombination(f"{name} defined for fft_size 8 or 16")
        return _tile_layout(name, fft_size)
    if name in ("fft16_naive", "fft16_swizzled"):
        if fft_size != 16:
            raise UndefinedCombination(f"{name} requires fft_size=16")
        return _writeback_layout(name)
    if name in ("fft8_naive", "fft8_swizzled"):
        if fft_size != 8:
            raise UndefinedCombination(f"{name} requires fft_size=8")
        return _writeback_layout(name)
    if name in ("epilogue_naive", "epilogue_swizzled"):
        return _epilogue_layout(name)
    raise UndefinedCombination(f"unknown layout {name!r}")


def layout_pattern(layout, fft_size: int = 16, step: int = 0) -> WarpAccessPattern:
    """Per-thread addresses of one write phase of a layout.

    step indexes the phase (one element per thread per phase); idle lanes
    of half-warp workloads are None.
    """
    spec = layout if isinstance(layout, SwizzleLayout) else get_layout(layout, fft_size)
    if not 0 <= step < spec.elements_per_thread:
        raise UndefinedCombination(
            f"{spec.name} has {spec.elements_per_thread} write phases, got step={step}")
    acc = [None] * WARP
    for t in range(spec.threads):
        acc[t] = (spec.address_fn(t, step), ELEMENT_BYTES)
    return WarpAccessPattern(tuple(acc))


def layout_phase_reports(layout, fft_size: int = 16) -> list:
    spec = layout if isinstance(layout, SwizzleLayout) else get_layout(layout, fft_size)
    return [simulate(layout_pattern(spec, fft_size, step))
            for step in range(spec.elements_per_thread)]


def gemm_read_pattern(layout_name: str) -> WarpAccessPattern:
    """GEMM A-operand read of a forwarding tile: thread t fetches retained
    bin t%16 of signal t//16, i.e. the tile in column-major k order."""
    rows = 16
    if layout_name == "strided_vkfft":
        addr = lambda r, p: ELEMENT_BYTES * (r * 8 + p)
    elif layout_name == "consecutive_turbofno":
        addr = lambda r, p: ELEMENT_BYTES * (p * rows + r)
    else:
        raise UndefinedCombination(
            f"GEMM read defined only for the forwarding layouts, not {layout_name!r}")
    acc = tuple((addr(t % rows, t // rows), ELEMENT_BYTES) for t in range(WARP))
    return WarpAccessPattern(acc)


def layout_feeds_gemm(layout_name: str) -> bool:
    """True iff the arrangement reads back conflict-free in GEMM order."""
    return simulate(gemm_read_pattern(layout_name)).utilization == 1.0


def verify_epilogue_swizzle(tiles: TileConfig) -> dict:
    """Phase-by-phase bank reports for the epilogue tile store.

    Requires the warp geometry the epilogue is designed for (32x16 warp
    tile of 4x4 thread regions); the degenerate 32x1 tile of 1x1 regions
    is accepted and trivially conflict-free.
    """
    if (tiles.m_w, tiles.n_w, tiles.m_t, tiles.n_t) == (32, 1, 1, 1):
        acc = tuple((BANK_BYTES * t, BANK_BYTES) for t in range(WARP))
        report = simulate(WarpAccessPattern(acc, element_width=BANK_BYTES))
        return {"epilogue_naive": [report], "epilogue_swizzled": [report]}
    if (tiles.m_w, tiles.n_w, tiles.m_t, tiles.n_t) != (32, 16, 4, 4):
        raise UnsupportedTile(
            f"epilogue model needs warp tile 32x16 with 4x4 thread regions, "
            f"got {tiles.m_w}x{tiles.n_w}/{tiles.m_t}x{tiles.n_t}")
    return {name: layout_phase_reports(name)
            for name in ("epilogue_naive", "epilogue_swizzled")}


def ascii_bank_strip(report: BankReport) -> str:
    """One char per bank: '.' untouched, hex touch count, '+' above 15."""
    chars = []
    for v in report.bank_load:
        if v == 0:
            chars.append(".")
        elif v < 16:
            chars.append(f"{v:x}")
        else:
            chars.append("+")
    return "".join(chars)
