"""
SVG bar charts of sweep results.

One chart per swept axis: groups of bars for every (axis value, checkpoint)
pair, one bar per model. Bars carry ids of the form
`bar:<model>:<axis value>:<iteration>` and the axes background carries
`plot-area`, so charts can be parsed back.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402

from lattice_relax.config import MODEL_COLORS, MODELS, PLOT_METRIC  # noqa: E402

logger = logging.getLogger(__name__)

AXES = ("noise", "samples")
AXIS_LABELS = {"noise": "noise epsilon", "samples": "training samples"}
BAR_WIDTH = 0.8
SVG_METADATA = {"Date": None}

plt.rcParams["svg.hashsalt"] = "lattice-relax"


def _swept_axes(rows: pd.DataFrame) -> List[str]:
    swept = [axis for axis in AXES if rows[axis].nunique() > 1]
    return swept or ["noise"]


def _bar_heights(rows: pd.DataFrame, axis: str) -> pd.DataFrame:
    """Seed-averaged metric per (axis value, iteration, model)."""
    return rows.groupby([axis, "iteration", "model"], sort=True)["value"].mean().reset_index()


def _format_value(value) -> str:
    return f"{value:g}" if isinstance(value, float) else str(value)


def render_chart(heights: pd.DataFrame, axis: str, metric: str, colors: Dict[str, str], path: Path) -> int:
    """Draw one grouped bar chart; returns the number of bars drawn."""
    models = [m for m in MODELS if m in set(heights["model"])]
    models += sorted(set(heights["model"]) - set(models))
    groups = heights[[axis, "iteration"]].drop_duplicates().sort_values([axis, "iteration"]).to_records(index=False)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.6 * len(groups) * max(len(models), 1) / 2), 4.0))
    ax.patch.set_gid("plot-area")
    width = BAR_WIDTH / max(len(models), 1)
    bars = 0
    for g, (value, iteration) in enumerate(groups):
        cell = heights[(heights[axis] == value) & (heights["iteration"] == iteration)]
        for m, model in enumerate(models):
            match = cell[cell["model"] == model]
            if match.empty:
                continue
            x = g - BAR_WIDTH / 2 + (m + 0.5) * width
            (bar,) = ax.bar(x, float(match["value"].iloc[0]), width=width,
                            color=colors.get(model, MODEL_COLORS.get(model, "#000000")))
            bar.set_gid(f"bar:{model}:{_format_value(value)}:{int(iteration)}")
            bars += 1
    ax.set_ylim(0.0, 1.0)
    ax.set_xlim(-0.5, len(groups) - 0.5)
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels([f"{_format_value(v)}\nt={int(t)}" for v, t in groups], fontsize=7)
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel(metric)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return bars


def render_legend(models: List[str], colors: Dict[str, str], path: Path) -> None:
    handles = [Patch(color=colors.get(m, MODEL_COLORS.get(m, "#000000")), label=m) for m in models]
    fig = plt.figure(figsize=(2.0, 0.4 * max(len(models), 1)))
    fig.legend(handles=handles, loc="center", frameon=False)
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)


def emit_plots(rows: pd.DataFrame, out_dir: Union[str, Path], colors: Optional[Dict[str, str]] = None,
               metric: str = PLOT_METRIC) -> List[Path]:
    """
    Render one chart per swept axis plus a legend file.

    Args:
        rows (pd.DataFrame): Result rows
        out_dir (str or Path): Output directory (created if missing)
        colors (Dict[str, str], optional): Model to color; defaults to MODEL_COLORS
        metric (str): Aggregate metric to chart

    Returns:
        List[Path]: Files written; empty when there is nothing to plot
    """
    colors = colors or MODEL_COLORS
    if rows.empty:
        logger.warning("No rows to plot; skipping")
        return []
    selected = rows[(rows["metric"] == metric) & (rows["class"].astype(str) == "all")]
    if selected.empty:
        logger.warning(f"No '{metric}' rows to plot; skipping")
        return []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for axis in _swept_axes(selected):
        path = out / f"{metric}_by_{axis}.svg"
        bars = render_chart(_bar_heights(selected, axis), axis, metric, colors, path)
        logger.info(f"Wrote {path} ({bars} bars)")
        written.append(path)
    models = [m for m in MODELS if m in set(selected["model"])]
    legend = out / "legend.svg"
    render_legend(models, colors, legend)
    written.append(legend)
    return written
