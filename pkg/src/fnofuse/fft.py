"""Radix-2 Stockham FFT with built-in truncation, zero-padding and pruning.

The transform is the self-sorting Stockham formulation: stage ``j`` (with
``s = 2**j`` and ``m = n / 2**(j+1)``) reads input slots ``q + s*p`` and
``q + s*(p+m)`` and writes ``q + s*(2p + r)`` for ``r in {0, 1}``, leaving
the final spectrum in natural order with no bit-reversal pass.

Pruning works on the butterfly dataflow DAG.  One *operation* is the
production of one butterfly output (a complex add/sub with its twiddle
applied); a full transform therefore costs ``n * log2(n)`` operations.
A stage output is executed iff

* some retained final output (index < ``keep``) transitively depends on
  it, and
* at least one of its inputs is possibly nonzero (inputs at index >=
  ``src_len`` are structurally zero).

Slots pruned away are pinned to exact +0, so the retained outputs of a
pruned execution are bitwise identical to the unpruned ones: pruning only
removes dead or provably-zero subgraphs, never reorders surviving
arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import COMPLEX_DTYPE, FnofuseError, is_power_of_two

FORWARD = "forward"
INVERSE = "inverse"

# Elements per executor block: keeps the ping-pong buffers cache-resident
# across stages.  Purely a working-set bound; results do not depend on it.
_BLOCK_ELEMS = 1 << 18


class InvalidLength(FnofuseError):
    pass


class InvalidKeep(FnofuseError):
    pass


class InvalidSrcLen(FnofuseError):
    pass


class LengthMismatch(FnofuseError):
    pass


class StrideOverlap(FnofuseError):
    pass


@dataclass(frozen=True)
class OpCount:
    """Executed butterfly outputs, nontrivial twiddle multiplies, and the
    outputs eliminated by pruning.  butterflies + skipped equals the full
    transform count for the same length."""

    butterflies: int
    twiddle_muls: int
    skipped: int

    def scaled(self, pencils: int) -> "OpCount":
        return OpCount(self.butterflies * pencils,
                       self.twiddle_muls * pencils,
                       self.skipped * pencils)


@dataclass(frozen=True)
class StageSpec:
    """One radix-2 stage: twiddle stride s and offset of its table slice
    (stage j uses s = 2**j twiddles starting at offset s - 1)."""

    stride: int
    twiddle_offset: int


class FftPlan:
    """Immutable transform plan; safe to share across threads.

    Attributes mirror the planning inputs plus the derived schedule:
    ``stages`` (per-stage descriptors), ``twiddles`` (flat fp32 table,
    built in double precision then rounded), ``prune_mask`` (per-stage
    boolean mask over that stage's n output slots; True = executed) and
    ``op_budget`` / ``twiddle_budget`` / ``full_ops``.
    """

    def __init__(self, n: int, direction: str, keep: int, src_len: int):
        if not is_power_of_two(n):
            raise InvalidLength(f"transform length {n} is not a power of two")
        if direction not in (FORWARD, INVERSE):
            raise FnofuseError(f"direction must be {FORWARD!r} or {INVERSE!r}")
        if not 1 <= keep <= n:
            raise InvalidKeep(f"keep={keep} outside [1, {n}]")
        if not 1 <= src_len <= n:
            raise InvalidSrcLen(f"src_len={src_len} outside [1, {n}]")

        self.n = n
        self.direction = direction
        self.keep = keep
        self.src_len = src_len
        nstages = n.bit_length() - 1
        self.full_ops = n * nstages

        sign = -1.0 if direction == FORWARD else 1.0
        tables = []
        stages = []
        stage_w = []
        for j in range(nstages):
            s = 1 << j
            q = np.arange(s, dtype=np.float64)
            w = np.exp(sign * 1j * math.pi * q / s).astype(COMPLEX_DTYPE)
            stages.append(StageSpec(stride=s, twiddle_offset=s - 1))
            tables.append(w)
            stage_w.append(w)
        self.stages = tuple(stages)
        self.twiddles = (np.concatenate(tables) if tables
                         else np.zeros(0, dtype=COMPLEX_DTYPE))
        self.twiddles.setflags(write=False)
        self._stage_w = stage_w

        # Backward pass: which stage outputs some retained bin depends on.
        needed = [None] * nstages
        need = np.zeros(n, dtype=bool)
        need[:keep] = True
        for j in reversed(range(nstages)):
            s = 1 << j
            m = n >> (j + 1)
            needed[j] = need
            out = need.reshape(m, 2, s)
            pair = out[:, 0, :] | out[:, 1, :]
            prev = np.zeros((2 * m, s), dtype=bool)
            prev[:m][pair] = True
            prev[m:][pair] = True
            need = prev.reshape(n)

        # Forward pass: which stage outputs are possibly nonzero.
        nonzero = [None] * nstages
        nz = np.zeros(n, dtype=bool)
        nz[:src_len] = True
        self._b_nonzero = []
        for j in range(nstages):
            s = 1 << j
            m = n >> (j + 1)
            pairs = nz.reshape(2 * m, s)
            self._b_nonzero.append(pairs[m:].copy())
            pair_nz = pairs[:m] | pairs[m:]
            out = np.empty((m, 2, s), dtype=bool)
            out[:, 0, :] = pair_nz
            out[:, 1, :] = pair_nz
            nz = out.reshape(n)
            nonzero[j] = nz

        masks = []
        self._zero_idx = []
        budget = 0
        twiddle_budget = 0
        for j in range(nstages):
            mask = needed[j] & nonzero[j]
            mask.setflags(write=False)
            masks.append(mask)
            budget += int(mask.sum())
            self._zero_idx.append(np.flatnonzero(~mask))
            s = 1 << j
            m = n >> (j + 1)
            out = mask.reshape(m, 2, s)
            pair_exec = out[:, 0, :] | out[:, 1, :]
            # w_0 == 1 is trivial; a pair whose b-input is structurally zero
            # needs no multiply either.
            twiddle_budget += int((pair_exec & self._b_nonzero[j])[:, 1:].sum())
        self.prune_mask = tuple(masks)
        self.op_budget = budget
        self.twiddle_budget = twiddle_budget

    def op_count(self, pencils: int = 1) -> OpCount:
        return OpCount(self.op_budget, self.twiddle_budget,
                       self.full_ops - self.op_budget).scaled(pencils)

    def __repr__(self):
        return (f"FftPlan(n={self.n}, direction={self.direction!r}, "
                f"keep={self.keep}, src_len={self.src_len}, "
                f"op_budget={self.op_budget})")


def plan(n: int, direction: str = FORWARD, keep: Optional[int] = None,
         src_len: Optional[int] = None) -> FftPlan:
    """Build a transform plan with the minimal prune mask.

    keep defaults to n (no truncation), src_len to n (no padding).
    Deterministic for identical arguments.
    """
    return FftPlan(n, direction, n if keep is None else keep,
                   n if src_len is None else src_len)


def full_op_count(n: int) -> int:
    """Unpruned butterfly-output total: n outputs per stage, log2(n) stages."""
    if not is_power_of_two(n):
        raise InvalidLength(f"transform length {n} is not a power of two")
    return n * (n.bit_length() - 1)


def _run_block(p: FftPlan, rows: np.ndarray, out: np.ndarray) -> None:
    """Transform a (P, src_len) contiguous block into out (P, keep)."""
    nrows = rows.shape[0]
    n = p.n
    buf = np.empty((nrows, n), dtype=COMPLEX_DTYPE)
    buf[:, :p.src_len] = rows
    if p.src_len < n:
        buf[:, p.src_len:] = 0
    # every slot of tmp is written each stage (then dead slots re-zeroed),
    # so it does not need initialization
    tmp = np.empty((nrows, n), dtype=COMPLEX_DTYPE)
    for j, st in enumerate(p.stages):
        s = st.stride
        m = n >> (j + 1)
        x = buf.reshape(nrows, 2 * m, s)
        a = x[:, :m, :]
        b = x[:, m:, :]
        t = p._stage_w[j] * b
        y = tmp.reshape(nrows, m, 2, s)
        np.add(a, t, out=y[:, :, 0, :])
        np.subtract(a, t, out=y[:, :, 1, :])
        dead = p._zero_idx[j]
        if dead.size:
            tmp[:, dead] = 0
        buf, tmp = tmp, buf
    out[:] = buf[:, :p.keep]
    if p.direction == INVERSE:
        out *= np.float32(1.0 / n)


def _run_rows(p: FftPlan, rows: np.ndarray) -> np.ndarray:
    """Vectorized executor over a (P, src_len) array of pencils."""
    rows = np.ascontiguousarray(rows, dtype=COMPLEX_DTYPE)
    if rows.ndim != 2 or rows.shape[1] != p.src_len:
        raise LengthMismatch(
            f"pencil length {rows.shape[-1] if rows.ndim else '?'} != "
            f"plan src_len {p.src_len}")
    nrows = rows.shape[0]
    out = np.empty((nrows, p.keep), dtype=COMPLEX_DTYPE)
    step = max(1, _BLOCK_ELEMS // p.n)
    for r0 in range(0, nrows, step):
        r1 = min(nrows, r0 + step)
        _run_block(p, rows[r0:r1], out[r0:r1])
    return out


def execute(p: FftPlan, x: np.ndarray, out: Optional[np.ndarray] = None):
    """Run one pencil through the plan.

    x must have exactly src_len elements (padding plans read only the
    nonzero prefix).  Writes the first ``keep`` spectrum bins into out
    (allocated if omitted) and returns (out, OpCount); the count always
    equals the plan's budget.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != p.src_len:
        raise LengthMismatch(f"input length {x.shape} != plan src_len {p.src_len}")
    res = _run_rows(p, x[None, :])[0]
    if out is None:
        out = res
    else:
        if out.shape[0] < p.keep:
            raise LengthMismatch(f"out capacity {out.shape[0]} < keep {p.keep}")
        out[:p.keep] = res
    return out, p.op_count()


def _view_aliases(view: np.ndarray) -> bool:
    """True if two (row, col) positions of a 2-D view share an element."""
    nr, nc = view.shape
    sr, sc = view.strides
    idx = (np.arange(nr, dtype=np.int64)[:, None] * sr
           + np.arange(nc, dtype=np.int64)[None, :] * sc)
    return np.unique(idx).size != nr * nc


def batched_execute(p: FftPlan, batch: np.ndarray,
                    out: Optional[np.ndarray] = None):
    """Transform a strided view of pencils sharing one plan.

    batch is (bs, src_len) with arbitrary strides: rows may run along a
    spatial axis or along the hidden axis of a larger tensor.  Raises
    StrideOverlap when two pencils alias the same element.  Returns
    (out, OpCount) with the count scaled by bs.
    """
    batch = np.asarray(batch)
    if batch.ndim != 2:
        raise LengthMismatch("batch must be a 2-D view of pencils")
    if batch.shape[1] != p.src_len:
        raise LengthMismatch(
            f"pencil length {batch.shape[1]} != plan src_len {p.src_len}")
    if _view_aliases(batch):
        raise StrideOverlap("two pencils alias the same element")
    bs = batch.shape[0]
    res = _run_rows(p, batch)
    if out is None:
        out = res
    else:
        if out.shape != (bs, p.keep):
            raise LengthMismatch(f"out shape {out.shape} != {(bs, p.keep)}")
        if _view_aliases(out):
            raise StrideOverlap("two output pencils alias the same element")
        out[:] = res
    return out, p.op_count(bs)
