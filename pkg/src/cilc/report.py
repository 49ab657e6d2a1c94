"""CSV tables and SVG line charts with byte-stable output.

Floats are written with ``repr`` (shortest round-trip form) and the SVG writer
pins matplotlib's id salt and drops the date stamp, so equal inputs give equal
files.
"""
import csv
import json
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

NORM_COLUMNS = ("trial", "agent_id", "e_norm", "is_best", "held")

plt.rcParams["svg.hashsalt"] = "cilc"
plt.rcParams["svg.fonttype"] = "path"


def fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def isolated_rows(runs):
    """Rows for isolated runs: ``runs`` maps agent id to its list of trial records."""
    rows = []
    for agent_id in sorted(runs):
        for rec in runs[agent_id]:
            rows.append((rec.j, agent_id, float(rec.e_norm), False, False))
    rows.sort(key=lambda row: (row[0], row[1]))
    return rows


def cilc_rows(history):
    """Collective row (agent 0) followed by every agent's row, per trial."""
    rows = []
    for step in history.steps:
        rows.append((step.j, 0, float(step.e_bar_norm), False, step.held))
        for m, rec in enumerate(step.records, 1):
            rows.append((step.j, m, float(rec.e_norm), m == step.best_performer, step.held))
    return rows


def line_chart(path, series, title, xlabel="trial", ylabel="error norm", logy=False,
               hlines=(), equal_aspect=False):
    """Write a line chart; ``series`` is a list of ``(label, xs, ys)``."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, xs, ys in series:
        ax.plot(xs, ys, marker="." if len(xs) <= 60 else None, label=label)
    for value, label in hlines:
        ax.axhline(value, linestyle="--", color="grey", linewidth=0.8, label=label)
    if logy:
        ax.set_yscale("log")
    if equal_aspect:
        ax.set_aspect("equal")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, linewidth=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
