"""Heatmap rendering for report output.

For each (rank, dim, keep) slice of the report the figure shows modeled
traffic of the fully fused execution relative to the staged baseline and
the transform-op reduction, over hidden dimension K (x axis) and
log2(batch * dim_x) (y axis) -- the same axes the sweeps are defined on.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _slice_matrix(rows, value_key):
    ks = sorted({r["hidden"] for r in rows})
    bds = sorted({r["batch_dimx"] for r in rows})
    mat = np.full((len(bds), len(ks)), np.nan)
    for r in rows:
        mat[bds.index(r["batch_dimx"]), ks.index(r["hidden"])] = r[value_key]
    return ks, bds, mat


def render_heatmaps(rows, out_dir) -> list:
    """Write one PNG per (rank, dim, keep) slice; returns the paths."""
    groups = {}
    for r in rows:
        if r["mode"] != "fully_fused":
            continue
        groups.setdefault((r["rank"], r["dim"], r["keep"]), []).append(r)

    paths = []
    for (rank, dim, keep), grp in sorted(groups.items()):
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
        panels = (
            ("traffic_ratio_vs_staged", "fused / staged global traffic", "viridis_r"),
            ("fft_op_reduction", "transform op reduction", "magma"),
        )
        for ax, (key, title, cmap) in zip(axes, panels):
            ks, bds, mat = _slice_matrix(grp, key)
            im = ax.imshow(mat, origin="lower", aspect="auto", cmap=cmap,
                           vmin=0.0, vmax=1.0)
            ax.set_xticks(range(len(ks)), [str(k) for k in ks])
            ax.set_yticks(range(len(bds)),
                          [f"{int(np.log2(b))}" for b in bds])
            ax.set_xlabel("hidden dimension K")
            ax.set_ylabel("log2(batch * dim_x)")
            ax.set_title(title, fontsize=10)
            for (i, j), v in np.ndenumerate(mat):
                if np.isfinite(v):
                    ax.text(j, i, f"{v:.2f}", ha="center", va="center",
                            fontsize=7,
                            color="white" if v < 0.55 else "black")
            fig.colorbar(im, ax=ax, fraction=0.046)
        fig.suptitle(f"rank {rank}, n = {dim}, keep = {keep}", fontsize=11)
        fig.tight_layout()
        path = os.path.join(out_dir, f"heatmap_rank{rank}_dim{dim}_keep{keep}.png")
        fig.savefig(path, dpi=110)
        plt.close(fig)
        paths.append(path)
    return paths
