"""Render the CSV artifacts of a finished run directory into PNG files.

Pure post-processing: reads monitors.csv, errors.csv, orders.csv, and
snap_*.csv if present, writes one figure per artifact next to the data,
and returns the written paths.  Uses the non-interactive Agg backend so
it works in batch environments.
"""

import csv
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body], dtype=float)
    if data.size == 0:
        data = np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def _render_monitors(path, out):
    data = _read_csv(path)
    days = data["t_seconds"] / 86400.0
    fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
    ax = axes[0, 0]
    ax.plot(days, np.abs(data["mass_rel_err"]), label="|mass rel err|")
    ax.plot(days, np.abs(data["vorticity_integral"]), label="|vorticity integral|")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    ax.set_title("exact invariants")

    ax = axes[0, 1]
    ax.plot(days, data["energy_rel_err"], label="energy rel err")
    ax.plot(days, data["potential_enstrophy_rel_err"], label="pot. enstrophy rel err")
    ax.legend(fontsize=8)
    ax.set_title("bounded invariants")

    ax = axes[1, 0]
    ax.plot(days, data["divergence_L2"])
    ax.set_yscale("log")
    ax.set_title("divergence L2")
    ax.set_xlabel("days")

    ax = axes[1, 1]
    ax.plot(days, data["solver_iters_momentum"], label="momentum")
    ax.plot(days, data["solver_iters_flux"], label="flux")
    ax.legend(fontsize=8)
    ax.set_title("CG iterations per interval")
    ax.set_xlabel("days")

    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def _render_errors(path, out):
    data = _read_csv(path)
    days = data["t_seconds"] / 86400.0
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6), sharex=True)
    for ax, quantity, label in zip(axes, ("h", "u", "absvort"),
                                   ("depth", "velocity", "absolute vorticity")):
        for norm in ("L1", "L2", "Linf"):
            ax.plot(days, data["%s_%s" % (quantity, norm)], label=norm)
        ax.set_yscale("log")
        ax.set_title(label)
        ax.set_xlabel("days")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def _render_orders(path, out):
    data = []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    fig, ax = plt.subplots(figsize=(7, 0.5 + 0.3 * max(len(body), 1)))
    ax.axis("off")
    table = ax.table(
        cellText=[[row[0], row[1], row[2], row[3], "%.3g" % float(row[4]),
                   "%.3g" % float(row[5]), "%.2f" % float(row[6])] for row in body],
        colLabels=header,
        loc="center",
    )
    table.auto_set_font_size(False)
    table.set_fontsize(8)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def _render_snapshot(path, out):
    data = _read_csv(path)
    fig, axes = plt.subplots(2, 1, figsize=(9, 8))
    for ax, field, label in zip(axes, ("h", "vorticity"), ("depth (m)", "vorticity (1/s)")):
        sc = ax.scatter(data["lon_deg"], data["lat_deg"], c=data[field], s=2.0,
                        cmap="viridis", rasterized=True)
        fig.colorbar(sc, ax=ax, label=label)
        ax.set_xlim(-180.0, 180.0)
        ax.set_ylim(-90.0, 90.0)
        ax.set_ylabel("lat (deg)")
    axes[1].set_xlabel("lon (deg)")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def render_run(run_dir):
    """Render every recognized artifact in run_dir; returns written paths."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ValueError("not a run directory: %s" % run_dir)
    written = []
    if (run_dir / "monitors.csv").exists():
        written.append(_render_monitors(run_dir / "monitors.csv", run_dir / "monitors.png"))
    if (run_dir / "errors.csv").exists():
        written.append(_render_errors(run_dir / "errors.csv", run_dir / "errors.png"))
    if (run_dir / "orders.csv").exists():
        written.append(_render_orders(run_dir / "orders.csv", run_dir / "orders.png"))
    for snap in sorted(run_dir.glob("snap_*.csv"),
                       key=lambda p: int(re.findall(r"\d+", p.stem)[0])):
        written.append(_render_snapshot(snap, snap.with_suffix(".png")))
    if not written:
        raise ValueError("no artifacts found in %s" % run_dir)
    return [str(p) for p in written]
