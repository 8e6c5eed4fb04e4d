"""SVG figures for run reports."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dataset import ClipSet  # noqa: E402
from .dynamics.models import ModelDescriptor  # noqa: E402
from .dynamics.params import ParamVector  # noqa: E402
from .dynamics.sim import rollout_arrays  # noqa: E402
from .errors import DivergenceError  # noqa: E402


def plot_cost_curves(curves: Mapping[str, Sequence], path) -> Path:
    """Best-so-far cost per generation; ``curves`` maps a label to
    ``(generation, best, mean)`` rows."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, hist in curves.items():
        h = np.asarray(hist, dtype=float)
        if h.size == 0:
            continue
        ax.plot(h[:, 0], h[:, 1], label=f"{label} best")
        ax.plot(h[:, 0], h[:, 2], "--", alpha=0.5, label=f"{label} mean")
    ax.set_yscale("log")
    ax.set_xlabel("generation")
    ax.set_ylabel("cost")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_overlay(thetas: Mapping[str, ParamVector], clips: ClipSet, model: ModelDescriptor, path,
                 n_clips: int = 3) -> Path:
    """Recorded versus open-loop predicted base x, base z and first joint
    angle for the first few clips."""
    rows = [("base x [m]", 0), ("base z [m]", 2), (f"{model.joint_names[0]} [rad]", 13)]
    k = min(n_clips, len(clips))
    fig, axes = plt.subplots(len(rows), k, figsize=(3.2 * k, 6), squeeze=False)
    for j in range(k):
        c = clips.clips[j]
        tr = clips.trajectories[c.traj_id]
        ref = tr.states[c.start:c.stop + 1]
        t = np.arange(ref.shape[0]) * tr.dt
        for r, (label, idx) in enumerate(rows):
            ax = axes[r, j]
            ax.plot(t, ref[:, idx], "k", lw=1.5, label="recorded")
            for name, th in thetas.items():
                try:
                    ro = rollout_arrays(ref[0], tr.inputs[c.start:c.stop], th, model)
                except DivergenceError:
                    continue
                ax.plot(t, ro.states[:, idx], lw=1, label=name)
            if j == 0:
                ax.set_ylabel(label, fontsize=8)
            if r == len(rows) - 1:
                ax.set_xlabel("t [s]")
    axes[0, 0].legend(fontsize=6)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_bars(values: Mapping[str, float], path, ylabel: str) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    names = list(values)
    ax.bar(names, [values[n] for n in names])
    ax.set_ylabel(ylabel)
    ax.tick_params(axis="x", labelrotation=30, labelsize=7)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
