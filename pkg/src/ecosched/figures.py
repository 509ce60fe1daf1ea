"""Figure rendering for the report path (matplotlib stays out of the core)."""
from __future__ import annotations

import os


def render_report_figures(rows: list[dict], csv_path: str) -> list[str]:
    """Render ratio figures next to the CSV; returns the files written.

    ``rows`` are parsed CSV records (per-run lines only, no summaries).
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    stem, _ = os.path.splitext(csv_path)
    written = []
    ratios = [float(r["ratio"]) for r in rows if r["ratio"]]
    if not ratios:
        return written

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.hist(ratios, bins=30, color="#4878a8", edgecolor="white")
    ax.set_xlabel("observed ratio")
    ax.set_ylabel("runs")
    ax.set_title("Observed ratio distribution")
    path = f"{stem}_ratio_hist.png"
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={})
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    by_problem: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        if r["ratio"]:
            by_problem.setdefault(r["problem"], []).append(
                (float(r["alpha"]), float(r["ratio"]))
            )
    for name, pts in sorted(by_problem.items()):
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.scatter(xs, ys, s=12, alpha=0.6, label=name)
    ax.set_xlabel("alpha")
    ax.set_ylabel("observed ratio")
    ax.set_title("Ratio by power exponent")
    ax.legend(fontsize=8)
    path = f"{stem}_ratio_by_alpha.png"
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={})
    plt.close(fig)
    written.append(path)
    return written
