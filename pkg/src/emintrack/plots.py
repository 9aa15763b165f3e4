"""Figure rendering for the report path.

Figures are written next to the delimited outputs so a run is inspectable
without extra tooling; the CSV files remain the primary data artifact.
Rendering always goes through the Agg backend so it works headless and the
output bytes depend only on the data.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

if TYPE_CHECKING:
    from .harness import LogRow, NcStats, ReportBundle, SweepRow

RPM_PER_RAD_S = 60.0 / (2.0 * math.pi)

_SERIES_STYLE = {
    "none": dict(color="tab:gray", marker="o"),
    "low": dict(color="tab:blue", marker="s"),
    "high": dict(color="tab:red", marker="^"),
}


def _style(label: str) -> dict:
    return _SERIES_STYLE.get(label, dict(marker="o"))


def sweep_figure(sweeps: dict[str, list["SweepRow"]], path: Path) -> Path:
    """Energy, load metric, speed and power versus drive voltage."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5), sharex=True)
    (ax_e, ax_m), (ax_s, ax_p) = axes
    for label, rows in sorted(sweeps.items()):
        v = [r.voltage for r in rows]
        ax_e.plot(v, [r.mean_energy * 1e3 for r in rows], label=label, markersize=4, **_style(label))
        ax_m.plot(v, [r.mean_metric * 1e3 for r in rows], label=label, markersize=4, **_style(label))
        ax_s.plot(v, [r.mean_speed * RPM_PER_RAD_S for r in rows], label=label, markersize=4, **_style(label))
        ax_p.plot(v, [r.mean_power for r in rows], label=label, markersize=4, **_style(label))
    ax_e.set_ylabel("energy per cycle [mJ]")
    ax_m.set_ylabel("load metric [mA*s]")
    ax_s.set_ylabel("output speed [rpm]")
    ax_p.set_ylabel("mean power [W]")
    for ax in (ax_s, ax_p):
        ax.set_xlabel("drive voltage [V]")
    for ax in axes.flat:
        ax.grid(alpha=0.3)
    ax_e.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _bars(ax, stats: list["NcStats"], mean_of, std_of) -> None:
    ncs = [s.nc for s in stats]
    means = [mean_of(s) if mean_of(s) is not None else float("nan") for s in stats]
    errs = [std_of(s) if std_of(s) is not None else 0.0 for s in stats]
    ax.bar([str(n) for n in ncs], means, yerr=errs, capsize=4, color="tab:blue", alpha=0.8)
    ax.grid(alpha=0.3, axis="y")
    ax.set_xlabel("averaging cycles")


def batch_figures(stats: list["NcStats"], out_dir: Path) -> list[Path]:
    """Bar charts of response time and convergence voltage per averaging depth."""
    created = []
    fig, ax = plt.subplots(figsize=(5, 4))
    _bars(ax, stats, lambda s: s.response_mean, lambda s: s.response_std)
    ax.set_ylabel("response time [s]")
    fig.tight_layout()
    path = out_dir / "response_time.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    created.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    _bars(ax, stats, lambda s: s.voltage_mean, lambda s: s.voltage_std)
    ax.set_ylabel("convergence voltage [V]")
    fig.tight_layout()
    path = out_dir / "convergence_voltage.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    created.append(path)
    return created


def timeline_figure(rows: tuple["LogRow", ...], path: Path) -> Path:
    """Commanded voltage over time with controller events marked."""
    fig, ax = plt.subplots(figsize=(8, 4))
    times = [r.t for r in rows]
    voltages = [r.voltage for r in rows]
    ax.step(times, voltages, where="post", color="tab:blue")
    markers = {
        "optimum_found": ("v", "tab:green"),
        "load_increase_detected": ("^", "tab:red"),
        "load_decrease_detected": ("v", "tab:orange"),
        "metric_converged": ("o", "tab:purple"),
        "stall_recovered": ("x", "black"),
    }
    seen = set()
    for row in rows:
        if row.event in markers:
            marker, color = markers[row.event]
            label = row.event if row.event not in seen else None
            seen.add(row.event)
            ax.plot([row.t], [row.voltage], marker=marker, color=color, linestyle="none", label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("commanded voltage [V]")
    ax.grid(alpha=0.3)
    if seen:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_reports(bundle: "ReportBundle", out_dir: Path) -> list[Path]:
    """Render whichever figures the bundle has data for."""
    created: list[Path] = []
    if bundle.sweeps:
        created.append(sweep_figure(bundle.sweeps, out_dir / "sweep.png"))
    if bundle.stats:
        created.extend(batch_figures(bundle.stats, out_dir))
    if bundle.command == "track" and bundle.trials:
        created.append(timeline_figure(bundle.trials[0].rows, out_dir / "timeline.png"))
    return created
