"""Click-stream analysis: first-click selection, bunch histograms, and the
truncated-Poisson bunch-size model with its timescale fit.

A photon bunch is the first transmitted click plus every click on either
channel within a window t_out after it. Three operational definitions of
"first transmitted click" are supported: every transmitted click
(recount_all), transmitted clicks preceded by no transmitted click within
t_in (quiet_trans), and transmitted clicks preceded by no click at all
within t_in (quiet_all). Look-back windows are open intervals (t - t_in, t)
that never cross trajectory boundaries; the bunch window (t, t + t_out] is
half-open so boundary ties resolve deterministically.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammainc, gammaln

from .timescales import relaxation_model, t_in as t_in_window_default, t_out_quantile
from .trajectory import CHANNEL_RIGHT, ClickStream, SnapshotSet

__all__ = [
    "VARIANTS",
    "FirstClickDefinition",
    "BunchHistogram",
    "BunchModel",
    "FitResult",
    "find_first_clicks",
    "bunch_sizes",
    "conditional_populations",
    "model_pk",
    "model_pmf",
    "pn1_weak_drive",
    "pn1_bounds",
    "fit_timescales",
]

VARIANTS = ("recount_all", "quiet_trans", "quiet_all")


@dataclass(frozen=True)
class FirstClickDefinition:
    """Which transmitted clicks start a bunch.

    ``recount_all`` ignores the look-back window; the quiet variants require
    ``t_in_window`` > 0.
    """

    variant: str
    t_in_window: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected {VARIANTS}")
        if self.variant != "recount_all" and self.t_in_window <= 0:
            raise ValueError(f"variant {self.variant!r} needs a positive look-back window")


def _check_sorted(stream: ClickStream):
    t, traj = stream.t, stream.traj
    if t.size < 2:
        return
    same = traj[1:] == traj[:-1]
    if np.any(same & (np.diff(t) < 0)):
        raise ValueError("click stream must be time-sorted within each trajectory")


def find_first_clicks(stream: ClickStream, definition: FirstClickDefinition) -> np.ndarray:
    """Indices into the stream of clicks that qualify as first clicks."""
    _check_sorted(stream)
    t, ch, traj = stream.t, stream.channel, stream.traj
    right = np.flatnonzero(ch == CHANNEL_RIGHT)
    if definition.variant == "recount_all" or right.size == 0:
        return right
    window = definition.t_in_window
    keep = []
    for idx in right:
        t0 = t[idx]
        j = idx - 1
        quiet = True
        while j >= 0 and traj[j] == traj[idx] and t[j] > t0 - window:
            if definition.variant == "quiet_all" or ch[j] == CHANNEL_RIGHT:
                quiet = False
                break
            j -= 1
        if quiet:
            keep.append(idx)
    return np.asarray(keep, dtype=np.int64)


@dataclass(frozen=True)
class BunchHistogram:
    """Bunch-size probabilities with binomial error bars.

    ``probabilities`` maps bunch size -> (probability, standard error),
    normalized per first click.
    """

    probabilities: dict
    n_first_clicks: int
    drive: float
    definition: FirstClickDefinition
    t_out_window: float
    alpha_sq: float = 0.0

    def probability(self, size: int) -> float:
        return self.probabilities.get(size, (0.0, 0.0))[0]

    def stderr(self, size: int) -> float:
        return self.probabilities.get(size, (0.0, 0.0))[1]


def bunch_sizes(
    stream: ClickStream,
    first_clicks: np.ndarray,
    t_out_window: float,
    drive: float = 0.0,
    definition: FirstClickDefinition | None = None,
    alpha_sq: float = 0.0,
) -> BunchHistogram:
    """Histogram of bunch sizes seeded by the given first clicks.

    Bunch size is 1 plus the number of clicks on either channel in
    (t_first, t_first + t_out_window], windows confined to the trajectory
    of the first click.
    """
    if t_out_window <= 0:
        raise ValueError("t_out_window must be positive")
    _check_sorted(stream)
    t, traj = stream.t, stream.traj
    n = int(first_clicks.size)
    counts: dict[int, int] = {}
    for idx in first_clicks:
        t0 = t[idx]
        j = idx + 1
        size = 1
        while j < t.size and traj[j] == traj[idx] and t[j] <= t0 + t_out_window:
            size += 1
            j += 1
        counts[size] = counts.get(size, 0) + 1
    probs = {}
    for size in sorted(counts):
        p = counts[size] / n
        probs[size] = (p, np.sqrt(p * (1.0 - p) / n))
    return BunchHistogram(
        probabilities=probs,
        n_first_clicks=n,
        drive=drive,
        definition=definition or FirstClickDefinition("recount_all"),
        t_out_window=t_out_window,
        alpha_sq=alpha_sq,
    )


def conditional_populations(
    snapshots: SnapshotSet,
    stream: ClickStream,
    first_clicks: np.ndarray,
):
    """Mean post-jump populations over first clicks, with standard errors.

    Snapshots are recorded at every transmitted click; this selects the
    rows belonging to the chosen first clicks via (trajectory, ordinal)
    matching.
    """
    if snapshots.t.size == 0:
        raise ValueError("no snapshots recorded; enable record_conditional_states")
    # ordinal of each stream row within its trajectory's recorded clicks
    order = np.empty(stream.t.size, dtype=np.int64)
    if stream.t.size:
        starts = np.flatnonzero(np.r_[True, stream.traj[1:] != stream.traj[:-1]])
        for s, e in zip(starts, np.r_[starts[1:], stream.t.size]):
            order[s:e] = np.arange(e - s)
    lookup = {
        (int(tr), int(o)): row
        for row, (tr, o) in enumerate(zip(snapshots.traj, snapshots.click_ordinal))
    }
    rows = []
    for idx in first_clicks:
        key = (int(stream.traj[idx]), int(order[idx]))
        if key not in lookup:
            raise KeyError(f"no snapshot recorded for first click {key}")
        rows.append(lookup[key])
    pops = snapshots.populations[rows]
    mean = pops.mean(axis=0)
    stderr = pops.std(axis=0, ddof=1) / np.sqrt(pops.shape[0]) if pops.shape[0] > 1 else np.zeros_like(mean)
    return mean, stderr


@dataclass(frozen=True)
class BunchModel:
    """Truncated-Poisson bunch-size law.

    The photons that unlock a transmission number Y ~ Poisson(alpha_sq * t_in_hat)
    conditioned on exceeding N; extra drive photons arriving during the
    emission add Z ~ Poisson(alpha_sq * t_out_hat). A k-photon bunch convolves
    the two: p(k) = sum_i Pr(Y = k - i) Pr(Z = i).
    """

    n_atoms: int
    alpha_sq: float
    t_in_hat: float
    t_out_hat: float


def _log_poisson_pmf(k, lam):
    if lam <= 0:
        return 0.0 if k == 0 else -np.inf
    return k * np.log(lam) - lam - gammaln(k + 1)


def _poisson_tail(n_plus_1, lam):
    """Pr(X >= n_plus_1) for X ~ Poisson(lam), via the complementary
    (lower incomplete gamma) sum, stable for small lam."""
    return float(gammainc(n_plus_1, lam))


def model_pk(model: BunchModel, k: int) -> float:
    """Probability of a k-photon bunch; exactly zero for k <= N."""
    n = model.n_atoms
    if k <= n:
        return 0.0
    lam_y = model.alpha_sq * model.t_in_hat
    lam_z = model.alpha_sq * model.t_out_hat
    tail = _poisson_tail(n + 1, lam_y)
    if tail <= 0:
        # the conditioning event has vanishing probability; the bunch, once
        # seen, is the smallest one
        return 1.0 if k == n + 1 else 0.0
    total = 0.0
    for i in range(0, k - n):
        log_y = _log_poisson_pmf(k - i, lam_y)
        log_z = _log_poisson_pmf(i, lam_z)
        total += np.exp(log_y + log_z)
    return total / tail


def model_pmf(model: BunchModel, k_max: int) -> np.ndarray:
    """p(k) for k = 0..k_max as an array (zeros below N+1)."""
    return np.array([model_pk(model, k) for k in range(k_max + 1)])


def pn1_weak_drive(n_atoms: int, alpha_sq: float, t_out: float) -> float:
    """Weak-drive (N+1)-bunch probability, exp(-alpha_sq * t_out)."""
    return float(np.exp(-alpha_sq * t_out))


def pn1_bounds(n_atoms: int, alpha_sq: float, t_in: float, t_out: float):
    """Two-sided bracket on the (N+1)-bunch probability.

    Valid for alpha_sq * t_in < N + 2; the lower bound uses Stirling's
    estimate of the Poisson tail, the upper a Chernoff bound.
    """
    lam_in = alpha_sq * t_in
    if lam_in >= n_atoms + 2:
        raise ValueError("bracket requires alpha_sq * t_in < N + 2")
    exp_z = np.exp(-alpha_sq * t_out)
    lower = exp_z / (1.0 + lam_in * np.sqrt(2.0 * np.pi * (n_atoms + 2)) / (n_atoms + 2))
    upper = exp_z / (1.0 + lam_in / (n_atoms + 2))
    return lower, upper


@dataclass(frozen=True)
class FitResult:
    t_in_hat: float
    t_out_hat: float
    residual: float
    n_points: int


def fit_timescales(
    histograms: list[BunchHistogram],
    n_atoms: int,
    gamma: float = 1.0,
    size_cutoff: int | None = None,
) -> FitResult:
    """Fit (t_in_hat, t_out_hat) of the bunch-size model to histograms.

    Weighted least squares over every (drive point, bunch size <= cutoff)
    cell with inverse-variance weights, minimized by Nelder-Mead from the
    analytic starting point (arrival-window formula, 99% relaxation
    quantile). Typically needs quiet_all histograms over two or more drive
    points.
    """
    if len(histograms) < 2:
        raise ValueError("need histograms from at least two drive points")
    if size_cutoff is None:
        size_cutoff = n_atoms + 6
    sizes = range(n_atoms + 1, size_cutoff + 1)
    cells = []
    observed_sizes = set()
    for h in histograms:
        if h.alpha_sq <= 0:
            raise ValueError("histograms must carry alpha_sq for the model")
        floor = min(
            (err for _, err in h.probabilities.values() if err > 0),
            default=1.0 / max(h.n_first_clicks, 1),
        )
        for size in sizes:
            p, err = h.probabilities.get(size, (0.0, 0.0))
            if p > 0:
                observed_sizes.add(size)
            cells.append((h.alpha_sq, size, p, max(err, floor)))
    if len(observed_sizes) < 2:
        raise ValueError(
            "degenerate histograms: need at least two distinct observed bunch sizes"
        )

    def objective(x):
        ti, to = x
        if ti <= 0 or to <= 0:
            return 1e30
        total = 0.0
        for alpha_sq, size, p, err in cells:
            model = BunchModel(n_atoms, alpha_sq, ti, to)
            total += ((p - model_pk(model, size)) / err) ** 2
        return total

    start = np.array(
        [
            t_in_window_default(n_atoms, gamma),
            t_out_quantile(relaxation_model(n_atoms, gamma), 0.99),
        ]
    )
    res = minimize(objective, start, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-10})
    t_in_hat, t_out_hat = res.x
    return FitResult(
        t_in_hat=float(t_in_hat),
        t_out_hat=float(t_out_hat),
        residual=float(res.fun),
        n_points=len(cells),
    )
