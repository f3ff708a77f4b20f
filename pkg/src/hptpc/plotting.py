"""Figure rendering for experiment result tables.

Consumes ResultTable rows only, so a saved CSV can be re-plotted without
re-running anything.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_KIND_LABELS = {
    "amplitude_damping": "amplitude damping",
    "depolarizing": "depolarizing",
    "dephasing": "dephasing",
    "photon_loss": "photon loss",
}


def plot_variance_vs_delta(table, path):
    """Variance of the mean estimator against noise level, one panel per
    system dimension, empirical points against the closed-form curves."""
    dims = sorted({r.dim for r in table.rows})
    fig, axes = plt.subplots(1, len(dims), figsize=(5.2 * len(dims), 4.0), squeeze=False)
    for ax, dim in zip(axes[0], dims):
        for kind in sorted({r.kind for r in table.rows}):
            rows = sorted((r for r in table.rows if r.kind == kind and r.dim == dim),
                          key=lambda r: r.delta)
            if not rows:
                continue
            deltas = [r.delta for r in rows]
            label = _KIND_LABELS.get(kind, kind)
            line, = ax.plot(deltas, [r.eq6_var_mean for r in rows], "-", label=f"{label} (theory)")
            ax.plot(deltas, [r.empirical_var_mean for r in rows], "o",
                    color=line.get_color(), label=f"{label} (empirical)")
            ax.plot(deltas, [r.haar_var_mean for r in rows], "--",
                    color=line.get_color(), alpha=0.6)
        ax.set_xlabel("noise level")
        ax.set_ylabel("variance of mean estimator")
        ax.set_title(f"dim {dim}")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_photon_loss_scaling(table, path):
    """Haar-averaged variance and Kraus-rank scaling against dimension."""
    rows = sorted(table.rows, key=lambda r: r.dim)
    dims = [r.dim for r in rows]
    fig, (ax_var, ax_rank) = plt.subplots(1, 2, figsize=(10.4, 4.0))
    ax_var.plot(dims, [r.haar_var_single for r in rows], "-", label="Haar formula")
    ax_var.plot(dims, [r.haar_mc_single for r in rows], "o", label="Monte Carlo")
    ax_var.set_xlabel("system dimension")
    ax_var.set_ylabel("Haar-averaged single-shot variance")
    ax_var.set_yscale("log")
    ax_var.legend()
    ax_rank.plot(dims, [r.compiled_rank for r in rows], "o-", label="compiled CPTP (r+1)")
    ax_rank.plot(dims, [r.source_rank for r in rows], "s-", label="source HPTP (r)")
    ax_rank.plot(dims, [r.baseline_pos_rank for r in rows], "^--", label="two-CPTP split (pos)")
    ax_rank.plot(dims, [r.baseline_neg_rank for r in rows], "v--", label="two-CPTP split (neg)")
    ax_rank.plot(dims, [d * d for d in dims], ":", color="gray", label="$d^2$")
    ax_rank.set_xlabel("system dimension")
    ax_rank.set_ylabel("Kraus rank")
    ax_rank.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
