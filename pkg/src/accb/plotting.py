"""Bar chart of per-region site counts."""

from __future__ import annotations

from .report import FIELDS


def plot_report(rep, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [f"{r.region}:{r.kind}" for r in rep.regions] or ["(none)"]
    width = 0.8 / len(FIELDS)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(labels) + 2), 3.5))
    for k, name in enumerate(FIELDS):
        values = [getattr(r, name) for r in rep.regions] or [0]
        xs = [i + (k - (len(FIELDS) - 1) / 2) * width for i in range(len(labels))]
        ax.bar(xs, values, width, label=name)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_ylabel("static sites")
    ax.set_title(f"emitted sites per region ({rep.target})")
    ax.legend(fontsize="small", ncol=len(FIELDS))
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
