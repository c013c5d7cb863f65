"""One SVG line plot per diagnostics column against t."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .diagnostics import CSV_COLUMNS  # noqa: E402

# fixed salt and no date stamp make the SVG bytes reproducible
_RC = {"svg.hashsalt": "rymflow", "svg.fonttype": "path", "path.simplify": False}
_LOG_COLUMNS = {"calabi", "parallel_defect_int", "parallel_defect_sup"}


def plot_names() -> list[str]:
    return [f"{c}.svg" for c in CSV_COLUMNS[1:]]


def emit_plots(rows: list[dict[str, float]], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    t = [r["t"] for r in rows]
    paths = []
    with plt.rc_context(_RC):
        for col in CSV_COLUMNS[1:]:
            y = [r[col] for r in rows]
            fig, ax = plt.subplots(figsize=(6.0, 4.0))
            positive = y and all(v > 0 for v in y)
            if col in _LOG_COLUMNS and positive:
                ax.semilogy(t, y, lw=1.2)
            else:
                ax.plot(t, y, lw=1.2)
            ax.set_xlabel("t")
            ax.set_ylabel(col)
            ax.set_title(col)
            ax.grid(True, alpha=0.3)
            fig.tight_layout()
            path = out_dir / f"{col}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths
