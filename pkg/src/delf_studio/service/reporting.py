"""Metrics reports: a delimited table plus an optional rendered figure.

The CSV is the machine-readable artifact (exact column set, stable order);
the figure is a side-by-side bar view of description length and trial count
per environment, written next to the CSV with the same stem.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

from ..ice_session import SessionMetrics, write_metrics_csv

Rows = Sequence[tuple[str, SessionMetrics]]


def figure_path_for(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".png")


def render_metrics_figure(rows: Rows, path: str | Path) -> Path:
    """Two bar panels: description tokens and trials-to-execution per
    environment. Sessions without a resolved trial count are marked 'n/a'."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [name for name, _ in rows]
    tokens = [m.description_tokens for _, m in rows]
    trials = [m.trials_to_execution for _, m in rows]

    fig, (ax_tokens, ax_trials) = plt.subplots(1, 2, figsize=(10, 4))
    positions = range(len(names))

    ax_tokens.bar(positions, tokens, color="#4878a8")
    ax_tokens.set_title("Description length")
    ax_tokens.set_ylabel("tokens (whitespace words)")

    resolved = [t if t is not None else 0 for t in trials]
    bars = ax_trials.bar(positions, resolved, color="#a85448")
    for bar, t in zip(bars, trials):
        label = "n/a" if t is None else str(t)
        ax_trials.annotate(
            label,
            (bar.get_x() + bar.get_width() / 2, bar.get_height()),
            ha="center",
            va="bottom",
            fontsize=9,
        )
    ax_trials.set_title("Trials to execution")
    ax_trials.set_ylabel("model queries beyond the first design and codify")

    for ax in (ax_tokens, ax_trials):
        ax.set_xticks(list(positions))
        ax.set_xticklabels(names, rotation=20, ha="right")
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)

    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def write_report(
    rows: Iterable[tuple[str, SessionMetrics]],
    csv_path: str | Path,
    figure: bool = True,
) -> list[Path]:
    """Write the CSV and, unless disabled, the figure alongside it. Returns the
    paths written."""
    rows = list(rows)
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(rows, csv_path)
    written = [csv_path]
    if figure:
        written.append(render_metrics_figure(rows, figure_path_for(csv_path)))
    return written
