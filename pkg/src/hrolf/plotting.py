"""Figure rendering for reports: EPIs, loss curves and per-view metric maps.

All functions draw on the Agg backend and write straight to a file; nothing
is shown interactively.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .lightfield import Epi, LightField, center_index, extract_epi  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "image.interpolation": "nearest",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    fig.savefig(tmp, format=path.suffix.lstrip(".") or "png", bbox_inches="tight")
    plt.close(fig)
    tmp.replace(path)
    return path


def to_u8(img: np.ndarray) -> np.ndarray:
    """Round half up and clamp reals on [0, 255] to 8-bit."""
    return np.clip(np.floor(np.asarray(img, np.float64) + 0.5), 0, 255).astype(np.uint8)


def plot_epis(fields: dict[str, LightField], path, orientation: str = "horizontal",
              spatial_index: int | None = None, angular_index: int | None = None, channel: int = 0) -> Path:
    """One EPI per field, stacked vertically with a shared grey scale.

    The angular axis runs down each panel so straight lines are scene points
    and their slope is the disparity.
    """
    names = list(fields)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(len(names), 1, figsize=(6, 1.2 * len(names) + 0.4), squeeze=False)
        for ax, name in zip(axes[:, 0], names):
            lf = fields[name]
            if orientation == "horizontal":
                si = lf.Y // 2 if spatial_index is None else spatial_index
                ai = center_index(lf.T) if angular_index is None else angular_index
            else:
                si = lf.X // 2 if spatial_index is None else spatial_index
                ai = center_index(lf.S) if angular_index is None else angular_index
            epi = extract_epi(lf, orientation, si, ai, channel)
            ax.imshow(epi.values.T, cmap="gray", vmin=0, vmax=255, aspect="auto")
            ax.set_ylabel(name)
            ax.set_yticks([])
        axes[-1, 0].set_xlabel("x" if orientation == "horizontal" else "y")
        return _save(fig, path)


def save_epi_png(epi: Epi, path, upscale: int = 1) -> Path:
    """Raw EPI dump as an 8-bit greyscale PNG (angular axis vertical)."""
    from PIL import Image

    img = to_u8(epi.values.T)
    if upscale > 1:
        img = np.repeat(np.repeat(img, upscale, axis=0), upscale, axis=1)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    Image.fromarray(img).save(tmp, format="PNG")
    tmp.replace(path)
    return path


def plot_feature_epis(features: np.ndarray, path, n_channels: int = 4, title: str = "") -> Path:
    """Horizontal EPIs of the first few channels of a feature map (S, T, X, Y, C)."""
    S, T, X, Y, C = features.shape
    k = min(n_channels, C)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(k, 1, figsize=(6, 1.0 * k + 0.4), squeeze=False)
        for c in range(k):
            # X x S slice at the central row and column of views
            epi = features[:, center_index(T), :, Y // 2, c]
            axes[c, 0].imshow(epi, cmap="magma", aspect="auto")
            axes[c, 0].set_ylabel(f"ch {c}")
            axes[c, 0].set_yticks([])
        if title:
            axes[0, 0].set_title(title)
        return _save(fig, path)


def plot_loss_curves(history: Sequence, path, log_scale: bool = True) -> Path:
    """Loss terms against step; ``history`` rows need step, loss_r, loss_p, loss and lr."""
    steps = np.array([r.step for r in history])
    with plt.rc_context(_RC):
        fig, (ax, ax_lr) = plt.subplots(2, 1, figsize=(6, 4.2), sharex=True,
                                        gridspec_kw={"height_ratios": [3, 1]})
        for key, style in (("loss", "-k"), ("loss_r", "-C0"), ("loss_p", "-C1")):
            vals = np.array([getattr(r, key) for r in history], float)
            if np.any(vals > 0):
                ax.plot(steps, vals, style, lw=0.8, label=key)
        if log_scale:
            ax.set_yscale("log")
        ax.legend(frameon=False)
        ax.set_ylabel("loss")
        ax_lr.step(steps, [r.lr for r in history], where="post", color="0.3", lw=0.8)
        ax_lr.set_yscale("log")
        ax_lr.set_ylabel("lr")
        ax_lr.set_xlabel("step")
        return _save(fig, path)


def plot_view_heatmap(grid: np.ndarray, path, label: str = "PSNR (dB)", title: str = "") -> Path:
    """Per-view metric on the (s, t) grid.  NaN cells (views not scored) are left blank."""
    grid = np.asarray(grid, float)
    shown = np.where(np.isinf(grid), np.nan, grid)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(0.5 * grid.shape[1] + 1.8, 0.5 * grid.shape[0] + 1))
        im = ax.imshow(shown, cmap="viridis")
        for (s, t), v in np.ndenumerate(grid):
            if np.isfinite(v):
                ax.text(t, s, f"{v:.1f}", ha="center", va="center", fontsize=6, color="w")
            elif np.isinf(v):
                ax.text(t, s, "inf", ha="center", va="center", fontsize=6)
        ax.set_xlabel("t")
        ax.set_ylabel("s")
        fig.colorbar(im, ax=ax, label=label)
        if title:
            ax.set_title(title)
        return _save(fig, path)
