"""Report figures, written as PNG files next to the CSV/JSON artifacts.

Everything goes through the Agg backend with fixed rc settings and no
timestamp metadata, so repeated runs on one installation give identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .statecore import to_tensor_order  # noqa: E402

GOLDEN = (np.sqrt(5) - 1.0) / 2.0
FIG_WIDTH = 4.5
COLORS = ("#08589e", "#d95f0e", "#4eb3d3", "#7a0177")

PARAMS = {
    "axes.prop_cycle": matplotlib.cycler(color=COLORS),
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "font.size": 8,
    "mathtext.fontset": "dejavusans",
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "lines.markersize": 2.5,
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "path.simplify": False,
    "svg.hashsalt": "pathqunit",
}

# PNG text chunks matplotlib would otherwise fill with version strings.
_METADATA = {"Software": None}


def _figure(nrows: int = 1, ncols: int = 1, height_ratio: float = GOLDEN, **kw):
    with plt.rc_context(PARAMS):
        fig, ax = plt.subplots(nrows, ncols, figsize=(FIG_WIDTH, FIG_WIDTH * height_ratio), **kw)
    return fig, ax


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    with plt.rc_context(PARAMS):
        fig.savefig(path, format="png", metadata=_METADATA)
    plt.close(fig)
    return path


def plot_fringe(raw, corr, fit_raw, fit_corr, path: str | Path) -> Path:
    """Correlated coincidences against analyzer phase, raw and corrected, with fits."""
    with plt.rc_context(PARAMS):
        fig, ax = _figure()
        grid = np.linspace(0, 2 * np.pi, 400)
        ax.plot(raw.phases, raw.cc_counts, "o", color=COLORS[0], alpha=0.6, label="raw")
        ax.plot(grid, fit_raw.curve(grid), "-", color=COLORS[0],
                label=f"fit, V = {fit_raw.visibility:.4f}")
        ax.plot(corr.phases, corr.cc_counts, "s", color=COLORS[1], alpha=0.4, label="corrected")
        ax.plot(grid, fit_corr.curve(grid), "--", color=COLORS[1],
                label=f"fit, V$_c$ = {fit_corr.visibility:.4f}")
        ax.set_xlim(0, 2 * np.pi)
        ax.set_xticks(np.arange(5) * np.pi / 2)
        ax.set_xticklabels(["0", r"$\pi/2$", r"$\pi$", r"$3\pi/2$", r"$2\pi$"])
        ax.set_xlabel("analyzer phase sum (rad)")
        ax.set_ylabel(f"coincidences per {raw.integration_time_s:g} s")
        ax.legend(loc="upper center")
        fig.tight_layout()
    return _save(fig, path)


def plot_density(rho: np.ndarray, path: str | Path, title: str = "") -> Path:
    """Real and imaginary parts of a two-qubit density matrix (Kronecker order)."""
    labels = ["00", "01", "10", "11"]
    with plt.rc_context(PARAMS):
        fig, axes = _figure(1, 2, height_ratio=0.55, layout="constrained")
        for ax, part, name in zip(axes, (rho.real, rho.imag), ("Re", "Im")):
            im = ax.imshow(part, cmap="RdBu_r", vmin=-0.5, vmax=0.5)
            for (i, j), v in np.ndenumerate(part):
                ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=6,
                        color="white" if abs(v) > 0.3 else "black")
            ax.set_xticks(range(4))
            ax.set_yticks(range(4))
            ax.set_xticklabels(labels)
            ax.set_yticklabels(labels if name == "Re" else [])
            ax.set_title(f"{name} $\\rho$")
            ax.spines[:].set_visible(False)
        fig.colorbar(im, ax=list(axes), shrink=0.8)
        if title:
            fig.suptitle(title)
    return _save(fig, path)


def plot_chsh(e_values: Sequence[float], settings: Sequence[tuple[float, float]], s: float,
              path: str | Path) -> Path:
    with plt.rc_context(PARAMS):
        fig, ax = _figure()
        x = np.arange(len(e_values))
        ax.bar(x, e_values, color=COLORS[2], width=0.6)
        ax.axhline(0, color="0.3", lw=0.6)
        ax.set_xticks(x)
        ax.set_xticklabels([f"({a:.2f}, {b:.2f})" for a, b in settings])
        ax.set_ylim(-1, 1)
        ax.set_xlabel("analyzer phases (a, b) [rad]")
        ax.set_ylabel("correlation E")
        ax.set_title(f"S = {s:.4f}")
        fig.tight_layout()
    return _save(fig, path)


def plot_epr(tables: Sequence[np.ndarray], path: str | Path) -> Path:
    """One coincidence table per EPR phase setting."""
    n = len(tables)
    with plt.rc_context(PARAMS):
        fig, axes = _figure(1, n, height_ratio=1.1 / n + 0.1)
        axes = np.atleast_1d(axes)
        for k, (ax, table) in enumerate(zip(axes, tables)):
            ax.imshow(table, cmap="Greys", vmin=0, vmax=1.0 / table.shape[0])
            ax.set_title(f"k = {k}")
            ax.set_xticks([])
            ax.set_yticks([])
        axes[0].set_ylabel("output A")
        fig.supxlabel("output B")
        fig.tight_layout()
    return _save(fig, path)


def plot_lock(trace, path: str | Path, range_rad: float | None = None) -> Path:
    with plt.rc_context(PARAMS):
        fig, (ax0, ax1) = _figure(2, 1, height_ratio=0.9, sharex=True)
        ax0.plot(trace.t, trace.true_error, color=COLORS[0])
        ax0.set_ylabel("phase error (rad)")
        ax1.plot(trace.t, trace.actuator, color=COLORS[1])
        if range_rad is not None:
            for y in (-range_rad / 2, range_rad / 2):
                ax1.axhline(y, color="0.5", lw=0.6, ls=":")
        for idx in trace.wrap_indices:
            ax1.axvline(trace.t[idx], color=COLORS[3], lw=0.6, alpha=0.6)
        ax1.set_ylabel("actuator (rad)")
        ax1.set_xlabel("time (s)")
        fig.tight_layout()
    return _save(fig, path)


def density_tensor(rho_entries: np.ndarray) -> np.ndarray:
    """Density matrix in the package basis order -> Kronecker order for plotting."""
    return to_tensor_order(np.asarray(rho_entries), 2)
