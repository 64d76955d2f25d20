"""Report figures rendered next to the CSV output.

All functions return a matplotlib Figure; ``save_figure`` writes PNG files.
The Agg backend is forced so rendering works headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dicke import SystemParams
from .steady import scattered_rates

__all__ = [
    "save_figure",
    "bunch_probability_figure",
    "population_figure",
    "rates_figure",
]

_VARIANT_TITLE = {
    "recount_all": "(a) every transmitted click",
    "quiet_trans": "(b) quiet in transmission",
    "quiet_all": "(c) quiet in both channels",
}


def save_figure(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def bunch_probability_figure(histograms, model_curves=None, title=None):
    """Bunch probability vs drive, one curve per bunch size.

    ``histograms`` is a list of BunchHistogram at increasing drive for one
    first-click definition. ``model_curves`` optionally maps bunch size to
    (drives, probabilities) arrays drawn dash-dotted.
    """
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    sizes = sorted({s for h in histograms for s in h.probabilities})
    cmap = plt.cm.viridis(np.linspace(0.0, 0.85, max(len(sizes), 1)))
    for color, size in zip(cmap, sizes):
        drives = [h.drive for h in histograms if size in h.probabilities]
        probs = [h.probability(size) for h in histograms if size in h.probabilities]
        errs = [h.stderr(size) for h in histograms if size in h.probabilities]
        ax.errorbar(
            drives, probs, yerr=errs, fmt="o", ms=4, color=color,
            label=f"size {size}", capsize=2,
        )
    if model_curves:
        for color, size in zip(cmap, sizes):
            if size in model_curves:
                xs, ys = model_curves[size]
                ax.plot(xs, ys, "-.", color=color, lw=1.2)
    ax.set_xscale("log")
    ax.set_xlabel(r"$\Omega/(\gamma\sqrt{N})$")
    ax.set_ylabel("bunch probability")
    ax.set_ylim(-0.02, 1.05)
    variant = histograms[0].definition.variant if histograms else ""
    ax.set_title(title or _VARIANT_TITLE.get(variant, variant))
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    return fig


def population_figure(mean, stderr, reference=None, title=None):
    """Bar chart of measured conditional populations vs a reference law."""
    fig, ax = plt.subplots(figsize=(4.0, 3.0))
    k = np.arange(len(mean))
    ax.bar(k, mean, yerr=stderr, color="#4878a8", alpha=0.85, capsize=3,
           label="measured")
    if reference is not None:
        ax.plot(k, reference, "k_", ms=18, mew=2, label="analytic")
    ax.set_xlabel("excited atoms $k$")
    ax.set_ylabel("population")
    ax.set_xticks(k)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def rates_figure(n_atoms, g_grid, gamma=1.0):
    """Scattered photon rates against the normalized drive amplitude."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    rows = [scattered_rates(SystemParams(n_atoms, g * gamma, gamma)) for g in g_grid]
    ax.loglog(g_grid, [r.n_trans for r in rows], label=r"$\bar n_\mathrm{trans}$")
    ax.loglog(g_grid, [r.n_ref for r in rows], label=r"$\bar n_\mathrm{ref}$")
    ax.loglog(g_grid, [r.n_inc for r in rows], "--", label=r"$\bar n_\mathrm{inc}$")
    ax.set_xlabel(r"$|g| = \Omega/\gamma$")
    ax.set_ylabel(r"rate [$\gamma$]")
    ax.set_title(f"N = {n_atoms}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig
