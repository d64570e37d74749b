"""Demo report figures: joint/phase timeline and tactile heatmaps."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

PHASE_COLORS = {
    "OpeningF1": "#cfe8ff",
    "PositioningFlipper": "#ffe9c7",
    "ClosingF1": "#ffd6d6",
    "Holding": "#d8f5d0",
    "Twisting": "#ecd9ff",
    "Releasing": "#e8e8e8",
    "Fault": "#ff9d9d",
}


def render_timeline(trace: list[dict], path: str | Path) -> None:
    if not trace:
        return
    ticks = np.array([r["tick"] for r in trace])
    f1 = np.array([r["f1_angle"] for r in trace])
    flipper = np.array([r["flipper_angle"] for r in trace])
    targets = np.array(
        [r["flipper_target"] if r["flipper_target"] is not None else np.nan
         for r in trace]
    )
    phases = [r["phase"] for r in trace]

    fig, ax = plt.subplots(figsize=(9, 4.2))
    ax.plot(ticks, f1, label="f1 joint [deg]", color="tab:blue")
    ax.plot(ticks, flipper, label="flipper joint [deg]", color="tab:orange")
    ax.plot(ticks, targets, label="flipper target [deg]", color="tab:red",
            ls="--", lw=0.9)
    top = ax.get_ylim()[1]
    start = 0
    for i in range(1, len(phases) + 1):
        if i == len(phases) or phases[i] != phases[start]:
            color = PHASE_COLORS.get(phases[start])
            if color:
                ax.axvspan(ticks[start], ticks[i - 1] + 1, color=color, lw=0,
                           zorder=0)
            mid = 0.5 * (ticks[start] + ticks[i - 1])
            ax.text(mid, top, phases[start], fontsize=7,
                    ha="center", va="bottom", rotation=20, clip_on=False)
            start = i
    ax.set_xlabel("tick")
    ax.set_ylabel("angle [deg]")
    ax.legend(loc="center right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_tactile_heatmap(frame, gel_thickness: float, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    im = ax.imshow(frame.depth, cmap="inferno", vmin=0.0, vmax=gel_thickness,
                   origin="upper", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="indentation [mm]")
    ax.set_title(f"finger {frame.finger}, tick {frame.tick}")
    ax.set_xlabel("px")
    ax.set_ylabel("px")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_demo_figures(report, out_dir: str | Path) -> list[Path]:
    from .tactile import DEFAULT_GEL_THICKNESS_MM

    out = Path(out_dir)
    written = []
    timeline = out / "timeline.png"
    render_timeline(report.trace, timeline)
    if report.trace:
        written.append(timeline)
    for finger, frame in sorted(report.frames.items()):
        path = out / f"tactile_finger{finger}.png"
        render_tactile_heatmap(frame, DEFAULT_GEL_THICKNESS_MM, path)
        written.append(path)
    return written
