"""Figures and plot-ready data files for experiment series."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import write_json  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (4.0, 3.0),
    "savefig.dpi": 120,
}


def _reference_line(ax, x, y, slope, label):
    # anchor the reference line at the geometric middle of the data
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = len(x) // 2
    xs = np.array([x.min(), x.max()])
    ax.plot(xs, y[i] * (xs / x[i]) ** slope, "--", lw=0.8, label=f"slope {label} = {slope:.3f}")


def plot_series(series, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x, y = np.asarray(series.x, dtype=float), np.asarray(series.y, dtype=float)
        fmt = "o" if getattr(series, "scatter", False) else ("o-" if len(x) < 50 else "-")
        ax.plot(x, y, fmt, ms=3, lw=1, label=series.label or None)
        if series.loglog:
            ax.set_xscale("log")
            ax.set_yscale("log")
            for name, slope in series.reference_slopes.items():
                _reference_line(ax, x, y, slope, name)
        ax.set_xlabel(series.xlabel)
        ax.set_ylabel(series.ylabel)
        if series.label or series.reference_slopes:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path


def emit_plot_data(result, out_dir) -> dict:
    """Two-column ``.dat`` files, PNG figures and a ``manifest.json`` for every series."""
    out = Path(out_dir) / result.kind
    if not result.series:
        return {}
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for name, s in result.series.items():
        if len(s.x) == 0:
            raise ValueError(f"series {name!r} is empty")
        dat = out / f"{name}.dat"
        np.savetxt(dat, np.column_stack([s.x, s.y]), header=f"{s.xlabel} {s.ylabel}", fmt="%.17g")
        png = plot_series(s, out / f"{name}.png")
        manifest.append({
            "name": name,
            "data": dat.name,
            "figure": png.name,
            "x": s.xlabel,
            "y": s.ylabel,
            "loglog": s.loglog,
            "reference_slopes": s.reference_slopes,
            "expected": s.expected,
        })
    write_json(out / "manifest.json", {"kind": result.kind, "series": manifest})
    return {m["name"]: str(out / m["figure"]) for m in manifest}
