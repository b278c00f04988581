"""Boxplot figures of reconstruction errors."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {"kss": "KSS", "asm_nonconvex": "ASM NC"}
COLORS = {"kss": "#1b9e77", "asm_nonconvex": "#d95f02"}

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "kss3d",
}


def error_boxplot(reports, view, path):
    """One box per (basis count, method) for the reports of a single view."""
    reports = [r for r in reports if r.view == view and r.errors]
    counts = sorted({r.basis_count for r in reports})
    methods = [m for m in LABELS if any(r.method == m for r in reports)]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(1.2 + 1.1 * max(len(counts), 1) * max(len(methods), 1), 3.0))
        width = 0.8 / max(len(methods), 1)
        for mi, method in enumerate(methods):
            data, pos = [], []
            for ci, count in enumerate(counts):
                rep = next((r for r in reports
                            if r.method == method and r.basis_count == count), None)
                if rep is not None:
                    data.append(rep.errors)
                    pos.append(ci + (mi - (len(methods) - 1) / 2) * width)
            if not data:
                continue
            bp = ax.boxplot(data, positions=pos, widths=width * 0.9, patch_artist=True,
                            whis=1.5, flierprops={"markersize": 2})
            for box in bp["boxes"]:
                box.set_facecolor(COLORS[method])
                box.set_alpha(0.7)
            ax.plot([], [], "s", color=COLORS[method], label=LABELS[method])
        ax.set_xticks(range(len(counts)))
        ax.set_xticklabels([str(c) for c in counts])
        ax.set_xlabel("number of basis shapes")
        ax.set_ylabel("shape distance to truth (rad)")
        ax.set_title(f"view: {view}", fontsize=9)
        ax.legend(frameon=False)
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=150, metadata={"Software": None})
        plt.close(fig)
    return path
