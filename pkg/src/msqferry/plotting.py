"""Report figures: network with cycles, delay histogram, recovery timeline."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .cycles import CyclePlan, Handedness  # noqa: E402
from .geometry import Network, NodeState  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.linewidth": 0.8,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "xtick.top": True,
    "ytick.right": True,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

STATE_COLOR = {NodeState.ACTIVE: "black", NodeState.INACTIVE: "white", NodeState.FAILED: "tab:red"}


def figsize(scale=1.0, ratio=None):
    width = 6.0 * scale
    ratio = ratio or (math.sqrt(5.0) - 1.0) / 2.0
    return (width, width * ratio)


def plot_network(network: Network, plan: CyclePlan | None = None, path=None, shrink=0.18,
                 label_nodes: bool | None = None):
    """Edges, nodes by state, and each cycle drawn as an arrow loop pulled toward its face centre."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(1.0, 0.9))
        for a, b in sorted(network.edges):
            (x0, y0), (x1, y1) = network.position(a), network.position(b)
            ax.plot([x0, x1], [y0, y1], color="0.6", lw=0.6, zorder=1)
        if plan is not None:
            for cid, c in sorted(plan.cycles.items()):
                pts = np.array([network.position(n) for n in c.nodes])
                centre = pts.mean(axis=0)
                if c.face is not None:
                    centre = np.array([network.position(n) for n in network.faces[c.face].corners]).mean(axis=0)
                s = shrink if c.handedness is Handedness.CLOCKWISE else shrink * 1.6
                loop = centre + (pts - centre) * (1 - s)
                color = "tab:blue" if c.handedness is Handedness.CLOCKWISE else "tab:orange"
                for i in range(len(loop)):
                    p, q = loop[i], loop[(i + 1) % len(loop)]
                    ax.annotate("", xy=q, xytext=p,
                                arrowprops=dict(arrowstyle="-|>", lw=0.5, color=color, mutation_scale=5))
        ids = sorted(network.nodes)
        xy = np.array([network.position(n) for n in ids])
        colors = [STATE_COLOR[network.nodes[n].state] for n in ids]
        ax.scatter(xy[:, 0], xy[:, 1], s=12, c=colors, edgecolors="black", linewidths=0.5, zorder=3)
        if label_nodes or (label_nodes is None and len(ids) <= 40):
            for n, (x, y) in zip(ids, xy):
                ax.annotate(str(n), (x, y), xytext=(2, 2), textcoords="offset points", fontsize=6)
        ax.set_aspect("equal")
        ax.set_axis_off()
        return _finish(fig, path)


def plot_delays(delays, path=None, analytic: float | None = None, bins=60):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.8))
        d = np.asarray(delays, dtype=float)
        if d.size:
            ax.hist(d, bins=bins, density=True, color="0.7", edgecolor="0.3", lw=0.4)
            ax.axvline(d.mean(), color="black", lw=1.0, label=f"mean {d.mean():.4g}")
        if analytic is not None:
            ax.axvline(analytic, color="tab:red", ls="--", lw=1.0, label=f"analytic {analytic:.4g}")
        ax.set_xlabel("delivery delay")
        ax.set_ylabel("density")
        if d.size or analytic is not None:
            ax.legend(frameon=False)
        return _finish(fig, path)


def plot_timeline(metrics, path=None, bin_width: float | None = None):
    """Deliveries per unit time with recovery events marked."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(1.0, 0.4))
        done = np.array([m.delivered_at for m in metrics.messages if m.delivered_at is not None])
        width = bin_width or max(metrics.horizon / 200, 1e-9)
        edges = np.arange(0.0, metrics.horizon + width, width)
        counts, _ = np.histogram(done, bins=edges)
        ax.step(edges[:-1], counts / width, where="post", color="black", lw=0.7)
        marks = {"node_failure": "tab:red", "ferry_failure": "tab:red", "unify": "tab:blue",
                 "redivide": "tab:green", "subdivide": "tab:purple", "growth_complete": "tab:purple"}
        seen = set()
        for t, _, kind, _ in metrics.events.rows:
            if kind in marks:
                ax.axvline(t, color=marks[kind], lw=0.8, ls=":" if kind.endswith("failure") else "-",
                           label=None if kind in seen else kind)
                seen.add(kind)
        ax.set_xlabel("time")
        ax.set_ylabel("deliveries / time")
        if seen:
            ax.legend(frameon=False, ncol=3)
        return _finish(fig, path)


def _finish(fig, path):
    if path is None:
        return fig
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path
