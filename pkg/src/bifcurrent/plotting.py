"""Matplotlib figures written next to the numerical outputs.

The Agg backend and a PNG writer without the Software tag keep files
byte-identical between runs with the same inputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from bifcurrent.measures import AtomCloud, GridSpec  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "image.cmap": "magma",
    "path.simplify": False,
}
PNG_METADATA = {"Software": None}


def _save(fig, path) -> None:
    fig.savefig(path, format="png", metadata=PNG_METADATA)
    plt.close(fig)


def plot_field(values: np.ndarray, spec: GridSpec, path, title: str = "",
               log_scale: bool = False, label: str = "") -> None:
    """Heat map of a grid field; ``log_scale`` plots log10(1 + v)."""
    v = np.asarray(values, dtype=np.float64)
    if log_scale:
        v = np.log10(1.0 + np.maximum(v, 0.0))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4.2))
        im = ax.imshow(v, origin="lower", extent=spec.rect, interpolation="nearest",
                       aspect="equal")
        ax.grid(False)
        ax.set_xlabel("Re")
        ax.set_ylabel("Im")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, label=label)
        fig.tight_layout()
        _save(fig, path)


def plot_cloud(cloud: AtomCloud, path, title: str = "", column: str = "c") -> None:
    """Scatter of the c- or z-coordinates, marker area proportional to weight."""
    pts = cloud.z if column == "z" else cloud.c
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4.2))
        if len(cloud):
            size = 4.0 * cloud.weights / cloud.weights.max()
            if cloud.labels is not None:
                ax.scatter(pts.real, pts.imag, s=size, c=cloud.labels, linewidths=0,
                           cmap="viridis")
            else:
                ax.scatter(pts.real, pts.imag, s=size, c="k", linewidths=0)
        ax.set_aspect("equal")
        ax.set_xlabel(f"Re {column}")
        ax.set_ylabel(f"Im {column}")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_trend(x, series: dict, path, title: str = "", ylabel: str = "",
               log_y: bool = True) -> None:
    """Line plot of one or more sequences against n."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for name, y in series.items():
            ax.plot(list(x), list(y), marker="o", label=name)
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        _save(fig, path)
