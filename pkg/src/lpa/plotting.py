"""PNG figures for the command-line reports (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .signature import Signature  # noqa: E402

# no Software/creation-date chunks, so reruns write identical files
_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def distance_histogram(values: Sequence[float], path: str | Path, *, title: str, xlabel: str = "distance",
                       threshold: float | None = None, marked: Sequence[float] = (), bins: int = 40) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(np.asarray(values, dtype=float), bins=bins, color="0.55", edgecolor="white")
    if threshold is not None:
        ax.axvline(threshold, color="tab:red", linestyle="--", label=f"threshold {threshold:.4g}")
    for k, v in enumerate(marked):
        ax.axvline(v, color="tab:blue", alpha=0.5, linewidth=1, label="flagged" if k == 0 else None)
    if threshold is not None or len(marked):
        ax.legend(frameon=False)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    fig.tight_layout()
    return _save(fig, path)


def metric_panels(distances: Mapping[str, Sequence[float]], path: str | Path) -> Path:
    """One histogram per metric, side by side."""
    names = list(distances)
    fig, axes = plt.subplots(1, len(names), figsize=(3.2 * len(names), 3.2), squeeze=False)
    for ax, name in zip(axes[0], names):
        ax.hist(np.asarray(distances[name], dtype=float), bins=30, color="0.55", edgecolor="white")
        ax.set_title(name)
        ax.set_xlabel("distance from domain")
    axes[0][0].set_ylabel("entities")
    fig.tight_layout()
    return _save(fig, path)


def signature_bars(sig: Signature, path: str | Path, top: int = 30) -> Path:
    """Top terms of one signature; underused terms drawn to the left."""
    terms = sig.terms[:top]
    vals = [t.contribution if t.overused else -t.contribution for t in terms]
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.22 * len(terms) + 1)))
    y = np.arange(len(terms))[::-1]
    ax.barh(y, vals, color=["tab:orange" if v > 0 else "tab:blue" for v in vals])
    ax.set_yticks(y)
    ax.set_yticklabels([t.element for t in terms], fontsize=8)
    ax.axvline(0, color="black", linewidth=0.8)
    ax.set_xlabel("contribution (underused < 0 < overused)")
    ax.set_title(sig.entity_id)
    fig.tight_layout()
    return _save(fig, path)
