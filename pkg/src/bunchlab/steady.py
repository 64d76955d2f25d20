"""Exact steady state and scattered-field analytics for the driven ensemble.

The steady state of the collectively driven, wavelength-spaced ensemble has
the closed form rho = (1/D) sum_{m,n} (S-/g*)^m (S+/g)^n with
D = sum_r binom(N+r+1, 2r+1) (r!)^2 |g|^{-2r}. All photon rates, dipole
moments and zero-delay correlation functions of the two output fields follow
from finite sums over the same series coefficients H_r. Sums are evaluated
in log space so that N ~ 20 at strong or weak drive stays inside double
range; see ``normalization_d`` for the overflow policy.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .dicke import SystemParams, lowering_op

__all__ = [
    "MAX_ATOMS",
    "SteadyStateResult",
    "ScatteredRates",
    "normalization_d",
    "normalization_d_weak",
    "normalization_d_strong",
    "steady_state",
    "dipole_expectation",
    "excitation_correlation",
    "scattered_rates",
    "transmitted_rate_weak",
    "reflected_rate_strong",
    "g_correlation",
    "g_coherence",
    "correlation_weak",
    "correlation_strong",
    "coherence_weak",
    "coherence_strong",
    "correlation_via_trace",
]

# Hard cap on the ensemble size; the log-space sums themselves survive far
# beyond this, but D overflows double range near N ~ 30 at weak drive and
# the library only targets N <= 20.
MAX_ATOMS = 30

_LOG_MAX_DOUBLE = np.log(np.finfo(float).max)


def _check_n_atoms(n_atoms):
    if not 1 <= n_atoms <= MAX_ATOMS:
        raise ValueError(
            f"n_atoms={n_atoms} outside supported range 1..{MAX_ATOMS} "
            "(double precision overflows in the normalization series beyond that)"
        )


def _log_h(n_atoms, r):
    """log of H_r = binom(N+r+1, 2r+1) (r!)^2, the series coefficient."""
    n = n_atoms
    return (
        gammaln(n + r + 2)
        - gammaln(n - r + 1)
        - gammaln(2 * r + 2)
        + 2.0 * gammaln(r + 1)
    )


def _log_d(n_atoms, g_abs):
    logs = [_log_h(n_atoms, r) - 2.0 * r * np.log(g_abs) for r in range(n_atoms + 1)]
    return logsumexp(logs)


def normalization_d(n_atoms: int, g_abs: float) -> float:
    """Normalization constant D of the steady state, exact finite sum.

    D = sum_{r=0}^{N} binom(N+r+1, 2r+1) (r!)^2 |g|^{-2r}. Raises for
    ensembles large enough (or drives weak enough) that D exceeds double
    range.
    """
    _check_n_atoms(n_atoms)
    if g_abs <= 0:
        raise ValueError("g_abs must be positive")
    log_d = _log_d(n_atoms, g_abs)
    if log_d > _LOG_MAX_DOUBLE:
        raise OverflowError(
            f"normalization constant overflows double precision "
            f"(N={n_atoms}, |g|={g_abs})"
        )
    return float(np.exp(log_d))


def normalization_d_weak(n_atoms: int, g_abs: float) -> float:
    """Weak-drive asymptote D ~ (N!)^2 |g|^{-2N}."""
    _check_n_atoms(n_atoms)
    return float(np.exp(2.0 * gammaln(n_atoms + 1) - 2.0 * n_atoms * np.log(g_abs)))


def normalization_d_strong(n_atoms: int) -> float:
    """Strong-drive asymptote D ~ N + 1."""
    _check_n_atoms(n_atoms)
    return float(n_atoms + 1)


@dataclass(frozen=True)
class SteadyStateResult:
    rho: np.ndarray
    d_value: float
    params: SystemParams


def _inverse_output_series(params: SystemParams) -> np.ndarray:
    """V = sum_m (S-/g*)^m, the finite geometric series of the nilpotent S-.

    V equals g (g I + S-)^{-1}; the steady state is rho = V V^dag / Tr(V V^dag).
    Every entry of V is a single product of ladder factors times a power of
    1/g*, so the construction carries no cancellation even at weak drive.
    """
    sm = lowering_op(params.basis)
    dim = params.basis.dim
    v = np.eye(dim, dtype=complex)
    power = np.eye(dim, dtype=complex)
    g_conj = np.conj(params.g)
    for _ in range(params.n_atoms):
        power = power @ (sm / g_conj)
        v = v + power
    return v


def steady_state(params: SystemParams, allow_zero_drive: bool = False) -> SteadyStateResult:
    """Closed-form steady state of the driven ensemble.

    Requires omega > 0; an undriven ensemble relaxes to the ground state,
    which is returned only when ``allow_zero_drive`` is set (the series form
    involves 1/g and is meaningless at zero drive).
    """
    dim = params.basis.dim
    if params.omega == 0:
        if not allow_zero_drive:
            raise ValueError(
                "steady_state requires omega > 0; pass allow_zero_drive=True "
                "to get the trivial ground state"
            )
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return SteadyStateResult(rho=rho, d_value=np.inf, params=params)
    _check_n_atoms(params.n_atoms)
    v = _inverse_output_series(params)
    m = v @ v.conj().T
    trace = np.trace(m).real
    rho = m / trace
    return SteadyStateResult(rho=rho, d_value=trace, params=params)


def excitation_correlation(params: SystemParams, n: int, m: int | None = None) -> complex:
    """Normally ordered dipole moment <S+^n S-^m> in the steady state.

    Defaults to m = n. Exact zero (the operator power vanishes) whenever
    n or m exceeds N.
    """
    if m is None:
        m = n
    if n < 0 or m < 0:
        raise ValueError("orders must be nonnegative")
    n_at = params.n_atoms
    if max(n, m) > n_at:
        return 0j
    g_abs = params.g_abs
    if g_abs == 0:
        return 1.0 + 0j if n == m == 0 else 0j
    log_d = _log_d(n_at, g_abs)
    logs = [
        _log_h(n_at, r) + (n + m - 2 * r) * np.log(g_abs)
        for r in range(max(n, m), n_at + 1)
    ]
    magnitude = np.exp(logsumexp(logs) - log_d)
    phase = (params.g / g_abs) ** (n - m)
    return complex(phase * magnitude)


def dipole_expectation(params: SystemParams) -> complex:
    """<S+> = g (1 - (N+1)/D)."""
    d = normalization_d(params.n_atoms, params.g_abs)
    return params.g * (1.0 - (params.n_atoms + 1) / d)


@dataclass(frozen=True)
class ScatteredRates:
    """Photon rates of the two output fields and their coherent split."""

    n_ref: float
    n_trans: float
    n_ref_coh: float
    n_trans_coh: float
    n_inc: float

    @property
    def total(self) -> float:
        return self.n_ref + self.n_trans


def scattered_rates(params: SystemParams) -> ScatteredRates:
    """Reflected/transmitted photon rates and coherent components.

    Satisfies the balance relation n_ref + n_trans = gamma |g|^2 (every
    input photon comes back out in the stationary regime).
    """
    gamma = params.gamma
    g2 = params.g_abs**2
    if params.omega == 0:
        return ScatteredRates(0.0, 0.0, 0.0, 0.0, 0.0)
    d = normalization_d(params.n_atoms, params.g_abs)
    frac = (params.n_atoms + 1) / d
    return ScatteredRates(
        n_ref=gamma * g2 * (1.0 - frac),
        n_trans=gamma * g2 * frac,
        n_ref_coh=gamma * g2 * (1.0 - frac) ** 2,
        n_trans_coh=gamma * g2 * frac**2,
        n_inc=gamma * g2 * frac * (1.0 - frac),
    )


def transmitted_rate_weak(params: SystemParams) -> float:
    """Leading weak-drive transmission, gamma |g|^{2(N+1)} (N+1)/(N!)^2."""
    n = params.n_atoms
    log_val = (
        np.log(params.gamma)
        + 2.0 * (n + 1) * np.log(params.g_abs)
        + np.log(n + 1.0)
        - 2.0 * gammaln(n + 1)
    )
    return float(np.exp(log_val))


def reflected_rate_strong(params: SystemParams) -> float:
    """Strong-drive reflected rate limit gamma N (N+2) / 6."""
    n = params.n_atoms
    return params.gamma * n * (n + 2) / 6.0


def _log_binom(n, k):
    if k < 0 or k > n:
        return -np.inf
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def g_correlation(params: SystemParams, order: int, channel: str = "trans") -> float:
    """Exact zero-delay correlation G^(n)(0) of an output field, any drive.

    The reflected field gives gamma^n <S+^n S-^n>, identically zero for
    n > N. For the transmitted field the double binomial expansion over the
    dipole moments resums to the positive-term series

        G^(n) = gamma^n |g|^{2n} / D * sum_r |g|^{-2r} H_r binom(n-1, min(r,n,N))^2,

    which is free of the cancellations that make the naive expansion lose
    all precision at weak drive.
    """
    if order < 1:
        raise ValueError("correlation order must be >= 1")
    n_at = params.n_atoms
    gamma = params.gamma
    g_abs = params.g_abs
    if channel == "ref":
        val = excitation_correlation(params, order).real
        return gamma**order * val
    if channel != "trans":
        raise ValueError(f"unknown channel {channel!r}")
    if g_abs == 0:
        return 0.0
    _check_n_atoms(n_at)
    log_d = _log_d(n_at, g_abs)
    logs = []
    for r in range(n_at + 1):
        lb = _log_binom(order - 1, min(r, order, n_at))
        if lb == -np.inf:
            continue
        logs.append(_log_h(n_at, r) - 2.0 * r * np.log(g_abs) + 2.0 * lb)
    if not logs:
        return 0.0
    log_val = (
        order * np.log(gamma) + 2.0 * order * np.log(g_abs) + logsumexp(logs) - log_d
    )
    return float(np.exp(log_val))


def g_coherence(params: SystemParams, order: int, channel: str = "trans") -> float:
    """Normalized coherence g^(n)(0) = G^(n)/(G^(1))^n for one channel."""
    g1 = g_correlation(params, 1, channel)
    if g1 <= 0 or not np.isfinite(g1):
        raise ZeroDivisionError(
            f"first-order rate underflows for channel {channel!r}; "
            "coherence is undefined"
        )
    gn = g_correlation(params, order, channel)
    return float(gn / g1**order)


def correlation_weak(params: SystemParams, order: int, channel: str = "trans") -> float:
    """Leading weak-drive closed form of G^(n)(0).

    Transmitted: gamma^n |g|^{2(N+1)} binom(N+n, 2n-1) [(n-1)!/N!]^2 for
    n <= N and gamma^n |g|^{2n} binom(n-1, N)^2 above. Reflected:
    gamma^n |g|^{2n} for n <= N, zero above.
    """
    n_at = params.n_atoms
    gamma, g_abs = params.gamma, params.g_abs
    if channel == "ref":
        if order > n_at:
            return 0.0
        return float(np.exp(order * np.log(gamma) + 2.0 * order * np.log(g_abs)))
    if channel != "trans":
        raise ValueError(f"unknown channel {channel!r}")
    if order <= n_at:
        log_val = (
            order * np.log(gamma)
            + 2.0 * (n_at + 1) * np.log(g_abs)
            + _log_binom(n_at + order, 2 * order - 1)
            + 2.0 * (gammaln(order) - gammaln(n_at + 1))
        )
    else:
        log_val = (
            order * np.log(gamma)
            + 2.0 * order * np.log(g_abs)
            + 2.0 * _log_binom(order - 1, n_at)
        )
    return float(np.exp(log_val))


def correlation_strong(params: SystemParams, order: int, channel: str = "trans") -> float:
    """Leading strong-drive closed form of G^(n)(0)."""
    n_at = params.n_atoms
    gamma, g_abs = params.gamma, params.g_abs
    if channel == "trans":
        return float(np.exp(order * (np.log(gamma) + 2.0 * np.log(g_abs))))
    if channel != "ref":
        raise ValueError(f"unknown channel {channel!r}")
    if order > n_at:
        return 0.0
    log_val = (
        order * np.log(gamma)
        + _log_binom(n_at + order + 1, 2 * order + 1)
        + 2.0 * gammaln(order + 1)
        - np.log(n_at + 1.0)
    )
    return float(np.exp(log_val))


def coherence_weak(params: SystemParams, order: int, channel: str = "trans") -> float:
    """Leading weak-drive coherence g^(n)(0)."""
    n_at = params.n_atoms
    if channel == "ref":
        if order > n_at:
            return 0.0
        return 1.0
    if channel != "trans":
        raise ValueError(f"unknown channel {channel!r}")
    if order <= n_at:
        log_val = (
            -2.0 * (n_at + 1) * (order - 1) * np.log(params.g_abs)
            + _log_binom(n_at + order, 2 * order - 1)
            + 2.0 * gammaln(order)
            - order * np.log(n_at + 1.0)
            + 2.0 * (order - 1) * gammaln(n_at + 1)
        )
    else:
        log_val = (
            -2.0 * n_at * order * np.log(params.g_abs)
            + 2.0 * _log_binom(order - 1, n_at)
            + 2.0 * order * gammaln(n_at + 1)
            - order * np.log(n_at + 1.0)
        )
    return float(np.exp(log_val))


def coherence_strong(params: SystemParams, order: int, channel: str = "trans") -> float:
    """Leading strong-drive coherence g^(n)(0) (unity for the transmitted field)."""
    if channel == "trans":
        return 1.0
    n_at = params.n_atoms
    if channel != "ref":
        raise ValueError(f"unknown channel {channel!r}")
    if order > n_at:
        return 0.0
    base = correlation_strong(params, order, "ref") / params.gamma**order
    rate1 = n_at * (n_at + 2) / 6.0
    return float(base / rate1**order)


def correlation_via_trace(params: SystemParams, order: int, channel: str = "trans") -> float:
    """G^(n)(0) evaluated by operator algebra on the steady state.

    Independent of the series route in ``g_correlation``: with
    B = g I + S- (so a_R = sqrt(gamma) B and rho = B^{-1} B^{-dag} / ||B^{-1}||_F^2),
    cyclic invariance collapses the transmitted correlation to

        Tr((B^dag)^n B^n rho) = ||B^{n-1}||_F^2 / ||B^{-1}||_F^2.

    Both Frobenius norms are sums of squared magnitudes, so this route keeps
    full relative precision where the literal elementwise trace of
    (a^dag)^n a^n rho would cancel catastrophically at weak drive. The
    reflected branch is the plain trace of S+^n S-^n against rho, which is
    diagonal-positive and needs no rearrangement.
    """
    if order < 1:
        raise ValueError("correlation order must be >= 1")
    if params.omega == 0:
        return 0.0
    dim = params.basis.dim
    sm = lowering_op(params.basis).astype(complex)
    gamma = params.gamma
    if channel == "ref":
        rho = steady_state(params).rho
        op = np.linalg.matrix_power(sm, order) if order <= params.n_atoms else np.zeros((dim, dim))
        return float(gamma**order * np.trace(op.conj().T @ op @ rho).real)
    if channel != "trans":
        raise ValueError(f"unknown channel {channel!r}")
    b = params.g * np.eye(dim) + sm
    b_pow = np.linalg.matrix_power(b, order - 1)
    b_inv = np.linalg.inv(b)
    num = float((np.abs(b_pow) ** 2).sum())
    den = float((np.abs(b_inv) ** 2).sum())
    return gamma**order * num / den
