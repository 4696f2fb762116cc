"""Report figures, rendered off-screen straight to PNG files."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .raster import BandStack, atomic_write_bytes

# no version string or timestamp in the PNG, so reruns are byte-identical
_PNG_META = {"Software": None}


def _save(fig: Figure, path: Path) -> None:
    FigureCanvasAgg(fig)
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=100, metadata=_PNG_META)
    atomic_write_bytes(path, buf.getvalue())


def _new(figsize=(5.0, 4.0)):
    fig = Figure(figsize=figsize)
    ax = fig.add_subplot(1, 1, 1)
    ax.grid(True, alpha=0.3)
    return fig, ax


def plot_roc(points, auc: float, path: Path) -> None:
    fpr = [p[1] for p in points]
    tpr = [p[2] for p in points]
    fig, ax = _new()
    ax.plot(fpr, tpr, lw=1.5, label=f"AUC = {auc:.3f}")
    ax.plot([0, 1], [0, 1], "k--", lw=0.8)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def plot_cumulative(curve, tau: float | None, path: Path) -> None:
    thr = [c[0] for c in curve]
    frac = [100.0 * c[1] for c in curve]
    fig, ax = _new()
    ax.step(thr, frac, where="post")
    if tau is not None:
        ax.axvline(tau, color="r", ls="--", lw=1, label=f"threshold {tau:.3f}")
        ax.legend(loc="upper right")
    ax.set_xlabel("Score")
    ax.set_ylabel("Cumulative percentage downloaded (%)")
    ax.set_xlim(0, 1)
    fig.tight_layout()
    _save(fig, path)


def plot_histograms(hist, tau: float | None, path: Path) -> None:
    centers = 0.5 * (hist.edges[1:] + hist.edges[:-1])
    width = hist.edges[1] - hist.edges[0]
    fig, ax = _new()
    ax.bar(centers, hist.unchanged, width=width, alpha=0.5, label="unchanged")
    ax.bar(centers, hist.changed, width=width, alpha=0.5, label="changed")
    if tau is not None:
        ax.axvline(tau, color="r", ls="--", lw=1)
    ax.set_xlabel("Score")
    ax.set_ylabel("Probability")
    ax.set_xlim(0, 1)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_energy(selected: tuple[float, float], baseline: tuple[float, float],
                savings: float, path: Path) -> None:
    """Stacked (processing, transmission) joules: selection vs. whole image."""
    labels = ["change-based", "all pixels"]
    proc = [selected[0], baseline[0]]
    trans = [selected[1], baseline[1]]
    fig, ax = _new()
    ax.bar(labels, proc, label="processing")
    ax.bar(labels, trans, bottom=proc, label="transmission")
    ax.set_ylabel("Energy (J)")
    ax.set_title(f"savings {100 * savings:.1f}%")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def _rgb(stack: BandStack, lo, hi) -> np.ndarray:
    idx = [stack.band_labels.index(b) for b in ("R", "G", "B")]
    img = stack.samples[idx].transpose(1, 2, 0)
    return np.clip((img - lo) / np.where(hi > lo, hi - lo, 1.0), 0, 1)


def plot_images(reference: BandStack, observed: BandStack, reconstructed: BandStack,
                psnr_text: str, path: Path) -> None:
    """Side-by-side RGB of reference, captured and reconstructed images."""
    if not all(b in reference.band_labels for b in ("R", "G", "B")):
        return
    idx = [reference.band_labels.index(b) for b in ("R", "G", "B")]
    ref_rgb = reference.samples[idx]
    lo = np.percentile(ref_rgb, 2, axis=(1, 2))
    hi = np.percentile(ref_rgb, 98, axis=(1, 2))
    fig = Figure(figsize=(9.0, 3.4))
    titles = ["Reference", "Captured", f"Reconstructed (PSNR {psnr_text})"]
    for k, (st, title) in enumerate(zip((reference, observed, reconstructed), titles)):
        ax = fig.add_subplot(1, 3, k + 1)
        ax.imshow(_rgb(st, lo, hi), interpolation="nearest")
        ax.set_title(title, fontsize=9)
        ax.set_axis_off()
    fig.tight_layout()
    _save(fig, path)
