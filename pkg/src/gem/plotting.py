"""Static SVG figures, each written next to a CSV holding exactly the plotted numbers."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamps, so reruns give identical bytes
matplotlib.rcParams["svg.hashsalt"] = "gem"
matplotlib.rcParams["svg.fonttype"] = "none"
matplotlib.rcParams["font.size"] = 11
matplotlib.rcParams["axes.spines.top"] = False
matplotlib.rcParams["axes.spines.right"] = False

FIGSIZE = (8, 6)
DPI = 100
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]
MUTED = "#9a9a9a"


def fmt(x) -> str:
    if isinstance(x, (str, np.str_)):
        return str(x)
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if v == 0:
        return "0"
    return f"{v:.12g}"


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def _save(fig, stem: Path) -> Path:
    stem.parent.mkdir(parents=True, exist_ok=True)
    out = stem.with_suffix(".svg")
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out


def _figure(title, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig, ax


def _group_colors(groups):
    levels = list(dict.fromkeys(groups))
    return {g: PALETTE[k % len(PALETTE)] for k, g in enumerate(levels)}


def scatter_plot(stem, names, x, y, *, title, xlabel, ylabel, groups=None, emphasize=None,
                 circles=(), axes_lines=True, annotate=False):
    """Labelled scatter.  ``emphasize`` draws selected points black and filled, the rest grey."""
    stem = Path(stem)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fig, ax = _figure(title, xlabel, ylabel)
    if axes_lines:
        ax.axhline(0, color=MUTED, lw=0.8, zorder=0)
        ax.axvline(0, color=MUTED, lw=0.8, zorder=0)
    theta = np.linspace(0, 2 * np.pi, 361)
    for r in circles:
        ax.plot(r * np.cos(theta), r * np.sin(theta), color=MUTED, lw=0.8, ls="--")
    if circles:
        ax.set_aspect("equal")
    header = ["name", "x", "y"]
    cols = [list(names), x, y]
    if groups is not None:
        colors = _group_colors(groups)
        for g, c in colors.items():
            m = np.array([gg == g for gg in groups])
            ax.scatter(x[m], y[m], s=22, color=c, label=str(g))
        ax.legend(loc="best", frameon=False)
        header.append("group")
        cols.append(list(groups))
    elif emphasize is not None:
        emphasize = np.asarray(emphasize, dtype=bool)
        ax.scatter(x[~emphasize], y[~emphasize], s=14, facecolors="none", edgecolors=MUTED, label="other")
        ax.scatter(x[emphasize], y[emphasize], s=18, marker="s", color="black", label="significant")
        ax.legend(loc="best", frameon=False)
        header.append("emphasized")
        cols.append(emphasize)
    else:
        ax.scatter(x, y, s=18, color=PALETTE[0])
    if annotate:
        for nm, xi, yi in zip(names, x, y):
            ax.annotate(str(nm), (xi, yi), fontsize=7, xytext=(2, 2), textcoords="offset points")
    write_csv(stem.with_suffix(".csv"), header, zip(*cols))
    return _save(fig, stem)


def line_plot(stem, x, series: dict, *, title, xlabel, ylabel, errors: dict | None = None,
              hline: tuple[str, float] | None = None, vline: tuple[str, float] | None = None,
              markers=True, legend=True, ylim=None):
    """One line per entry of ``series``; optional error bars, reference lines."""
    stem = Path(stem)
    x = np.asarray(x, dtype=float)
    fig, ax = _figure(title, xlabel, ylabel)
    header = ["x"]
    cols = [x]
    for k, (label, yv) in enumerate(series.items()):
        yv = np.asarray(yv, dtype=float)
        color = PALETTE[k % len(PALETTE)] if len(series) <= len(PALETTE) else None
        if errors and label in errors:
            ax.errorbar(x, yv, yerr=errors[label], color=color, marker="o" if markers else None,
                        ms=4, capsize=2, lw=1.2, label=label)
            header.extend([label, f"{label}_se"])
            cols.extend([yv, np.asarray(errors[label], dtype=float)])
        else:
            ax.plot(x, yv, color=color, marker="o" if markers else None, ms=4, lw=1.2, label=label)
            header.append(label)
            cols.append(yv)
    if hline is not None:
        ax.axhline(hline[1], color="black", ls="--", lw=1.0, label=hline[0])
        header.append(hline[0])
        cols.append(np.full(len(x), hline[1]))
    if vline is not None:
        ax.axvline(vline[1], color=MUTED, ls=":", lw=1.0, label=vline[0])
        header.append(vline[0])
        cols.append(np.full(len(x), vline[1]))
    if ylim is not None:
        ax.set_ylim(*ylim)
    if legend and (len(series) > 1 or hline or vline) and len(series) <= 12:
        ax.legend(loc="best", frameon=False)
    ax.grid(True, color="#e5e5e5", lw=0.6)
    write_csv(stem.with_suffix(".csv"), header, zip(*cols))
    return _save(fig, stem)


def bar_plot(stem, labels, values, *, title, xlabel, ylabel):
    stem = Path(stem)
    values = np.asarray(values, dtype=float)
    fig, ax = _figure(title, xlabel, ylabel)
    ax.bar(np.arange(len(values)), values, color=PALETTE[0])
    ax.set_xticks(np.arange(len(values)), [str(s) for s in labels])
    write_csv(stem.with_suffix(".csv"), ["label", "value"], zip(labels, values))
    return _save(fig, stem)


def component_scatter(stem, X, y, axes: dict, *, title):
    """2-d sample cloud coloured by ``y`` with each method's component directions drawn through the mean."""
    stem = Path(stem)
    X = np.asarray(X, dtype=float)
    fig, ax = _figure(title, "x1", "x2")
    sc = ax.scatter(X[:, 0], X[:, 1], c=y, cmap="viridis", s=20)
    fig.colorbar(sc, ax=ax, label="y")
    center = X.mean(axis=0)
    span = 2.5 * np.sqrt(np.max(np.var(X, axis=0)))
    rows = []
    for k, (label, dirs) in enumerate(axes.items()):
        color = PALETTE[k % len(PALETTE)]
        for j, d in enumerate(np.asarray(dirs, dtype=float).T):
            scale = span if j == 0 else span / 2
            p0, p1 = center - scale * d, center + scale * d
            ax.plot([p0[0], p1[0]], [p0[1], p1[1]], color=color, lw=2.0 if j == 0 else 1.2,
                    label=f"{label} comp {j + 1}")
            rows.append((label, j + 1, d[0], d[1]))
    ax.set_aspect("equal")
    ax.legend(loc="best", frameon=False)
    write_csv(stem.with_suffix(".csv"), ["x1", "x2", "y"], zip(X[:, 0], X[:, 1], y))
    write_csv(stem.parent / f"{stem.name}_axes.csv", ["method", "component", "dx1", "dx2"], rows)
    return _save(fig, stem)
