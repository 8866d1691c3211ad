"""Render run-report series as PNG figures next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import RunReport


def _finish(fig, ax, title: str, path: Path) -> Path:
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report_figures(report: RunReport, out_dir: str | Path) -> list[Path]:
    """Write accuracy, graph-size, depth, and timing figures into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    fig, ax = plt.subplots(figsize=(6, 3.5))
    points = [(i, v) for i, v in enumerate(report.accuracy_series) if v is not None]
    if points:
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", ms=3)
        ax.set_ylim(-0.05, 1.05)
    else:
        ax.text(0.5, 0.5, "no scoreable questions", ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel("question")
    ax.set_ylabel("rolling accuracy")
    written.append(_finish(fig, ax, "Accuracy over the run", out / "accuracy_series.png"))

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(range(len(report.kg_size_series)), report.kg_size_series, marker="o", ms=3)
    ax.set_xlabel("question")
    ax.set_ylabel("triples in store")
    written.append(_finish(fig, ax, "Knowledge graph growth", out / "kg_size_series.png"))

    fig, ax = plt.subplots(figsize=(6, 3.5))
    depths = sorted(report.depth_histogram)
    counts = [report.depth_histogram[d] for d in depths]
    bars = ax.bar([str(d) for d in depths], counts)
    ax.bar_label(bars)
    ax.set_xlabel("retrieval depth at exit")
    ax.set_ylabel("questions")
    written.append(_finish(fig, ax, "Retrieval depth distribution", out / "depth_histogram.png"))

    fig, ax = plt.subplots(figsize=(6, 3.5))
    elapsed = [log.elapsed_s for log in report.per_question]
    ax.plot(range(len(elapsed)), elapsed, marker="o", ms=3)
    ax.set_xlabel("question")
    ax.set_ylabel("seconds")
    written.append(_finish(fig, ax, "Per-question time", out / "timings.png"))

    return written
