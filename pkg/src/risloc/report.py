"""Report emission: delimited results, a rerunnable manifest, and figures.

The CSV is the contract: one row per (scheme, sweep value), full float
precision (shortest round-trip repr), UTF-8, LF endings. The manifest holds
the complete sweep spec, so `risloc run --spec manifest.json` reproduces the
CSV byte for byte (set record_timing false if the wall-time column must match
too). Figures are a convenience rendering of the same numbers.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

CSV_HEADER = ("scheme", "param", "value", "mean_error_m", "stderr_m",
              "mean_opt_seconds", "mean_evals")


def write_csv(result, path, record_timing: bool = True):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for p in result.points:
            secs = p.mean_opt_seconds if record_timing else 0.0
            writer.writerow([
                p.scheme, p.param, repr(float(p.value)),
                repr(float(p.mean_error_m)), repr(float(p.stderr_m)),
                repr(float(secs)), repr(float(p.mean_evals)),
            ])
    return path


def write_manifest(spec, path):
    doc = {"format": 1, "sweep": spec.to_dict()}
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(json.dumps(doc, indent=2, sort_keys=True))
        f.write("\n")
    return path


def render_figures(result, out_dir) -> list:
    """Errorbar and cost plots, one PNG each, rendered off-screen."""
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    spec = result.spec
    schemes = list(spec.schemes)
    values = [float(v) for v in spec.values]
    paths = []

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for scheme in schemes:
        pts = [result.point(scheme, v) for v in values]
        ax.errorbar(values, [p.mean_error_m for p in pts],
                    yerr=[p.stderr_m for p in pts],
                    marker="o", capsize=3, label=scheme)
    ax.set_xlabel(spec.parameter)
    ax.set_ylabel("mean positioning error (m)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, "sweep_error.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for scheme in schemes:
        pts = [result.point(scheme, v) for v in values]
        ax.plot(values, [p.mean_evals for p in pts], marker="s", label=scheme)
    ax.set_xlabel(spec.parameter)
    ax.set_ylabel("mean loss evaluations per trial")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, "sweep_cost.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)
    return paths


def emit_report(result, out_dir, figures: bool = True) -> dict:
    """Write results.csv + manifest.json (+ PNGs) under out_dir.

    Returns the paths written, keyed by kind.
    """
    os.makedirs(out_dir, exist_ok=True)
    spec = result.spec
    out = {
        "csv": write_csv(result, os.path.join(out_dir, "results.csv"),
                         record_timing=spec.record_timing),
        "manifest": write_manifest(spec, os.path.join(out_dir, "manifest.json")),
    }
    if figures:
        out["figures"] = render_figures(result, out_dir)
    return out
