"""Coverage figures for the analysis report."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import DEFAULT_STATE_BOUND, rows_coverage  # noqa: E402
from .model import XTTModel, XTTTable  # noqa: E402


def plot_table_coverage(table: XTTTable, model: XTTModel, path: str, bound: int = DEFAULT_STATE_BOUND) -> str:
    """Bar chart of states matched per row, with uncovered/overlapping totals."""
    cov = rows_coverage(table, model, bound)
    labels = [f"row{r.row_id}" for r in table.rows] + ["uncovered", "overlap"]
    counts = cov["rows"] + [cov["uncovered"], cov["overlapping"]]
    colors = ["#4c72b0"] * len(table.rows) + ["#c44e52", "#dd8452"]

    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(labels) + 1.5), 3.2))
    ax.bar(labels, counts, color=colors)
    ax.set_ylabel("states")
    ax.set_title(f"{table.name}: {cov['states']} condition states")
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_model_coverage(model: XTTModel, out_dir: str, bound: int = DEFAULT_STATE_BOUND) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    return [
        plot_table_coverage(t, model, os.path.join(out_dir, f"{t.name}.coverage.png"), bound)
        for t in model.tables
    ]
