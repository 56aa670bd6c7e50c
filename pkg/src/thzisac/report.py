"""Figure rendering for CLI outputs. All figures are written to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

METHOD_STYLES = {
    "fd_full": dict(color="k", marker="s", ls="-"),
    "fd_comm_only": dict(color="0.45", marker="d", ls="--"),
    "opt_bsc": dict(color="tab:blue", marker="o", ls="-"),
    "opt_nobsc": dict(color="tab:blue", marker="o", ls="--"),
    "rand_bsc": dict(color="tab:red", marker="^", ls="-"),
    "rand_nobsc": dict(color="tab:red", marker="^", ls="--"),
}

METHOD_LABELS = {
    "fd_full": "FD full array",
    "fd_comm_only": "FD comms-only",
    "opt_bsc": "optimized subarray, BSC",
    "opt_nobsc": "optimized subarray, no BSC",
    "rand_bsc": "random subarray, BSC",
    "rand_nobsc": "random subarray, no BSC",
}

X_LABELS = {
    "snr": "SNR [dB]",
    "K": "selected antennas K",
    "N_RF": "RF chains",
    "G": "group size G",
    "epsilon": "trade-off epsilon",
}


def plot_sweep(aggregates, variable: str, out_png: str | Path) -> Path:
    """Mean SE (with standard-error bars) per method over the sweep values."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    methods = []
    for row in aggregates:
        if row[2] not in methods:
            methods.append(row[2])
    for method in methods:
        pts = [(row[1], row[3], row[4]) for row in aggregates if row[2] == method]
        pts.sort(key=lambda p: p[0])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        es = [p[2] for p in pts]
        style = METHOD_STYLES.get(method, {})
        ax.errorbar(xs, ys, yerr=es, label=METHOD_LABELS.get(method, method),
                    capsize=2, ms=4, **style)
    ax.set_xlabel(X_LABELS.get(variable, variable))
    ax.set_ylabel("spectral efficiency [bits/s/Hz]")
    ax.grid(True, ls=":")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_gain_profile(varthetas_deg, gains_per_subcarrier, theta_deg: float,
                      out_png: str | Path) -> Path:
    """Array-gain grids A_G(vartheta) for a few subcarriers."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    m_count = len(gains_per_subcarrier)
    shown = sorted({0, m_count // 2, m_count - 1})
    for mi in shown:
        ax.plot(varthetas_deg, gains_per_subcarrier[mi],
                label=f"subcarrier {mi + 1}")
    ax.axvline(theta_deg, color="k", ls=":", lw=1, label=r"physical direction")
    ax.set_xlabel("candidate direction [deg]")
    ax.set_ylabel("array gain")
    ax.grid(True, ls=":")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_robustness(rows, out_png: str | Path) -> Path:
    """Selection accuracy and mean SE versus test SNR."""
    snrs = [r[0] for r in rows]
    accs = [r[1] for r in rows]
    ses = [r[2] for r in rows]
    fig, ax1 = plt.subplots(figsize=(6.4, 4.2))
    ax1.plot(snrs, accs, "o-", color="tab:blue", label="selection accuracy")
    ax1.set_xlabel("test SNR [dB]")
    ax1.set_ylabel("accuracy", color="tab:blue")
    ax1.set_ylim(-0.02, 1.02)
    ax1.grid(True, ls=":")
    ax2 = ax1.twinx()
    ax2.plot(snrs, ses, "s--", color="tab:red", label="mean SE of selection")
    ax2.set_ylabel("mean SE [bits/s/Hz]", color="tab:red")
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_selection(ranks, ses, best_rank, out_png: str | Path) -> Path:
    """Per-candidate SE with the winner highlighted."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    positions = range(len(ranks))
    colors = ["tab:red" if r == best_rank else "tab:blue" for r in ranks]
    ax.bar(positions, ses, color=colors)
    ax.set_xticks(list(positions))
    ax.set_xticklabels([str(r) for r in ranks], rotation=90, fontsize=6)
    ax.set_xlabel("candidate rank p")
    ax.set_ylabel("spectral efficiency [bits/s/Hz]")
    ax.grid(True, axis="y", ls=":")
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_design_trace(trace_rows, out_png: str | Path) -> Path:
    """Outer-iteration residual trace of one hybrid design run."""
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    ax.plot([r[0] for r in trace_rows], [r[1] for r in trace_rows], "o-")
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("stacked residual")
    ax.grid(True, ls=":")
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
