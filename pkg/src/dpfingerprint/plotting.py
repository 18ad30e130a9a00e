"""Matplotlib figures for report artifacts. Uses the non-interactive Agg backend."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG bytes stable across runs
_PNG_META = {"Software": None}


def _png_bytes(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return buf.getvalue()


def robustness_figure(rows, length: int = 128) -> bytes:
    eps = [r.epsilon for r in rows]
    means = [r.mean_matches for r in rows]
    lo = [min(r.matches) for r in rows]
    hi = [max(r.matches) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(eps, means, "o-", label="mean matches")
    ax.fill_between(eps, lo, hi, alpha=0.25, label="min-max")
    ax.axhline(length / 2, color="grey", ls="--", lw=1, label="half of L")
    ax.set_xlabel("privacy budget ε")
    ax.set_ylabel("matching fingerprint bits")
    ax.set_ylim(0, length + 4)
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    return _png_bytes(fig)


def infcap_figure(rows) -> bytes:
    eps = sorted({r.epsilon for r in rows})
    gaps = [max(r.worst_gap for r in rows if r.epsilon == e) for e in eps]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(eps, gaps, "s-", label="worst (estimate - bound)")
    ax.axhline(0.0, color="red", lw=1, label="containment limit")
    ax.set_xlabel("privacy budget ε")
    ax.set_ylabel("InfCap minus bound")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _png_bytes(fig)


def svt_figure(labels, totals) -> bytes:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.boxplot([np.asarray(t) for t in totals])
    ax.set_xticks(range(1, len(labels) + 1), labels)
    ax.set_xlabel("ε₂ : ε₃")
    ax.set_ylabel("total trials")
    fig.tight_layout()
    return _png_bytes(fig)


def utility_figure(rows, names) -> bytes:
    fig, ax = plt.subplots(figsize=(6, 3.4))
    width = 0.8 / (2 * len(rows))
    x = np.arange(len(names))
    for n, row in enumerate(rows):
        ax.bar(x + (2 * n) * width, np.abs(row.ours_variance_change), width,
               label=f"ours ε={row.epsilon:g}")
        ax.bar(x + (2 * n + 1) * width, np.abs(row.baseline_variance_change), width,
               label=f"baseline ε={row.epsilon:g}", hatch="//", alpha=0.6)
    ax.set_xticks(x + 0.4 - width / 2, names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("|variance change|")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    return _png_bytes(fig)
