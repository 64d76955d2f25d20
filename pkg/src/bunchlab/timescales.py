"""Characteristic timescales of the multi-photon transmission process.

Two clocks govern the click statistics: the window T_in within which N+1
drive photons must arrive to unlock a transmission, and the relaxation time
of the resulting excitation cascade. The cascade k -> k-1 proceeds at rates
Gamma_k = 2 gamma (N-k+1) k, so the total relaxation time is
hypoexponential; its CDF is evaluated through the matrix exponential of the
bidiagonal transition generator, which remains valid for the degenerate
rate pairs Gamma_k = Gamma_{N+1-k} where partial-fraction formulas break
down.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

__all__ = [
    "CascadeRates",
    "HypoexponentialModel",
    "cascade_rates",
    "relaxation_model",
    "t_in",
    "t_in_large_n",
    "t_out_avg",
    "t_out_avg_large_n",
    "hypoexp_cdf",
    "hypoexp_mean",
    "hypoexp_variance",
    "t_out_quantile",
]


@dataclass(frozen=True)
class CascadeRates:
    """Decay rates of the emission cascade, ordered Gamma_N, ..., Gamma_1."""

    n_atoms: int
    gamma: float
    rates: np.ndarray

    def rate(self, k: int) -> float:
        """Gamma_k for the step |k> -> |k-1>."""
        if not 1 <= k <= self.n_atoms:
            raise ValueError(f"k={k} outside 1..{self.n_atoms}")
        return float(self.rates[self.n_atoms - k])


def cascade_rates(n_atoms: int, gamma: float = 1.0) -> CascadeRates:
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    k = np.arange(n_atoms, 0, -1)
    return CascadeRates(
        n_atoms=n_atoms, gamma=gamma, rates=2.0 * gamma * (n_atoms - k + 1) * k
    )


@dataclass(frozen=True)
class HypoexponentialModel:
    """Phase-type model of the total relaxation time.

    Q is the N x N upper-bidiagonal transition generator over the transient
    states (fully excited first); alpha_row starts the chain there. The
    missing outflow of the last row is the absorbing leak into the ground
    state.
    """

    rates: CascadeRates
    q_matrix: np.ndarray
    alpha_row: np.ndarray


def relaxation_model(n_atoms: int, gamma: float = 1.0) -> HypoexponentialModel:
    rates = cascade_rates(n_atoms, gamma)
    n = n_atoms
    q = np.zeros((n, n))
    for i, r in enumerate(rates.rates):
        q[i, i] = -r
        if i + 1 < n:
            q[i, i + 1] = r
    alpha = np.zeros(n)
    alpha[0] = 1.0
    return HypoexponentialModel(rates=rates, q_matrix=q, alpha_row=alpha)


def t_in(n_atoms: int, gamma: float = 1.0) -> float:
    """Arrival window (1/gamma) (2(N+1)/N!)^{1/N} for the unlocking photons."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    from scipy.special import gammaln

    log_val = (np.log(2.0 * (n_atoms + 1)) - gammaln(n_atoms + 1)) / n_atoms
    return float(np.exp(log_val)) / gamma


def t_in_large_n(n_atoms: int, gamma: float = 1.0) -> float:
    """Large-N lower bound e/(gamma N) of the arrival window."""
    return float(np.e / (gamma * n_atoms))


def t_out_avg(n_atoms: int, gamma: float = 1.0) -> float:
    """Mean relaxation time H_N / (gamma (N+1)) of the full cascade."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    harmonic = np.sum(1.0 / np.arange(1, n_atoms + 1))
    return float(harmonic / (gamma * (n_atoms + 1)))


def t_out_avg_large_n(n_atoms: int, gamma: float = 1.0) -> float:
    """Large-N asymptote ln(N)/(gamma N) of the mean relaxation time."""
    return float(np.log(n_atoms) / (gamma * n_atoms))


def hypoexp_cdf(model: HypoexponentialModel, t) -> np.ndarray | float:
    """F(t) = 1 - alpha expm(t Q) 1, the probability of full relaxation by t."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("relaxation times are nonnegative")
    ones = np.ones(model.q_matrix.shape[0])
    scalar = t_arr.ndim == 0
    values = np.empty(t_arr.size)
    for i, ti in enumerate(np.atleast_1d(t_arr)):
        values[i] = 1.0 - model.alpha_row @ expm(ti * model.q_matrix) @ ones
    values = np.clip(values, 0.0, 1.0)
    return float(values[0]) if scalar else values.reshape(t_arr.shape)


def hypoexp_mean(model: HypoexponentialModel) -> float:
    return float(np.sum(1.0 / model.rates.rates))


def hypoexp_variance(model: HypoexponentialModel) -> float:
    return float(np.sum(1.0 / model.rates.rates**2))


def t_out_quantile(model: HypoexponentialModel, p: float) -> float:
    """Relaxation-time quantile F^{-1}(p), bisected to 1e-8 relative.

    The bracket is grown geometrically from the mean relaxation time until
    it encloses p, then plain bisection exploits monotonicity of the CDF.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    mean = hypoexp_mean(model)
    lo, hi = 0.0, mean
    while hypoexp_cdf(model, hi) < p:
        lo = hi
        hi *= 2.0
        if hi > 1e9 * mean:
            raise RuntimeError("quantile bracket failed to close")
    while (hi - lo) > 1e-8 * max(hi, mean):
        mid = 0.5 * (lo + hi)
        if hypoexp_cdf(model, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
