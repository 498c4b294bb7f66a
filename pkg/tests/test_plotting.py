import numpy as np
from PIL import Image

from hrolf.lightfield import LightField, extract_epi
from hrolf.plotting import plot_epis, plot_feature_epis, plot_loss_curves, plot_view_heatmap, save_epi_png, to_u8
from hrolf.train import HistoryRow


def _is_png(path):
    return path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_to_u8_clamps():
    assert to_u8(np.array([-1.0, 0.5, 254.5, 256.0])).tolist() == [0, 1, 255, 255]


def test_epi_png_dump(tmp_path, rng):
    lf = LightField(rng.uniform(0, 255, (5, 3, 12, 8, 1)))
    epi = extract_epi(lf, "horizontal", 4, 1)
    out = save_epi_png(epi, tmp_path / "e.png", upscale=2)
    img = np.asarray(Image.open(out))
    assert img.shape == (10, 24)
    np.testing.assert_array_equal(img[::2, ::2], to_u8(epi.values.T))


def test_figures_written(tmp_path, rng):
    lf = LightField(rng.uniform(0, 255, (3, 3, 12, 12, 1)))
    assert _is_png(plot_epis({"a": lf, "b": lf}, tmp_path / "p.png"))
    assert _is_png(plot_epis({"a": lf}, tmp_path / "v.png", "vertical"))
    assert _is_png(plot_feature_epis(rng.standard_normal((3, 3, 6, 6, 5)), tmp_path / "f.png", title="F"))
    rows = [HistoryRow(i, i // 10, 1e-2 if i < 10 else 1e-3, 1.0 / (i + 1), 0.5 / (i + 1), 1.5 / (i + 1))
            for i in range(20)]
    assert _is_png(plot_loss_curves(rows, tmp_path / "l.png"))
    grid = rng.uniform(20, 30, (3, 3))
    grid[0, 0] = np.nan
    grid[1, 1] = np.inf
    assert _is_png(plot_view_heatmap(grid, tmp_path / "h.png", title="x"))
    assert not list(tmp_path.glob("*.tmp"))
