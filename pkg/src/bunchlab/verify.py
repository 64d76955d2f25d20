"""Cross-validation suite wiring the analytic, numeric, and Monte Carlo routes.

Every closed form in the library has an independent computational route:
operator algebra identities, the dense superoperator null space, master
equation time evolution, and trajectory sampling. ``run_suite`` executes the
whole battery and reports one pass/fail line per check. The quick level
keeps everything under a minute; the full level extends the ensemble sizes
and Monte Carlo sample counts.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import bunching, conditional, liouvillian, steady, timescales, trajectory
from .dicke import DickeBasis, SystemParams, lowering_op, output_ops, raising_op, sz_op

__all__ = ["CheckResult", "run_suite"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _check(name, fn):
    start = time.perf_counter()
    try:
        detail = fn() or ""
        passed = True
    except AssertionError as exc:
        detail = str(exc)
        passed = False
    return CheckResult(name, passed, detail, time.perf_counter() - start)


def _algebra_checks(n_max):
    worst = 0.0
    for n in range(1, n_max + 1):
        basis = DickeBasis(n)
        sm, sp, sz = lowering_op(basis), raising_op(basis), sz_op(basis)
        worst = max(worst, np.abs(sp @ sm - sm @ sp - 2 * sz).max())
        worst = max(worst, np.abs(sz @ sp - sp @ sz - sp).max())
        assert not np.any(np.linalg.matrix_power(sm, n + 1)), "S- not nilpotent"
    assert worst < 1e-12, f"commutator residual {worst:.2e}"
    # canary: a sign-flipped S_z must fail the same commutator check
    basis = DickeBasis(2)
    sm, sp = lowering_op(basis), raising_op(basis)
    flipped = -sz_op(basis)
    assert np.abs(sp @ sm - sm @ sp - 2 * flipped).max() > 1.0, (
        "commutator check failed to reject a sign-flipped S_z"
    )
    return f"max residual {worst:.1e}"


def _steady_vs_nullspace(n_max, g_values):
    worst = 0.0
    for n in range(1, n_max + 1):
        for g in g_values:
            params = SystemParams(n, omega=g, gamma=1.0)
            rho_a = steady.steady_state(params).rho
            rho_n = liouvillian.steady_state_numeric(liouvillian.build_liouvillian(params))
            worst = max(worst, np.abs(rho_a - rho_n).max())
    assert worst < 1e-10, f"analytic vs null-space deviation {worst:.2e}"
    return f"max elementwise {worst:.1e}"


def _correlations_vs_trace(n_max, g_values):
    worst = 0.0
    for n in range(1, n_max + 1):
        for g in g_values:
            params = SystemParams(n, omega=g, gamma=1.0)
            rho = steady.steady_state(params).rho
            sm = lowering_op(params.basis)
            for order in range(1, n + 3):
                a = steady.g_correlation(params, order, "trans")
                b = steady.correlation_via_trace(params, order, "trans")
                worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
                if order <= n:
                    a = steady.g_correlation(params, order, "ref")
                    op = np.linalg.matrix_power(sm, order)
                    b = np.trace(op.T @ op @ rho).real
                    worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
            for nn in range(1, n + 1):
                closed = steady.excitation_correlation(params, nn)
                direct = np.trace(
                    np.linalg.matrix_power(sm.T, nn) @ np.linalg.matrix_power(sm, nn) @ rho
                )
                worst = max(worst, abs(closed - direct) / abs(direct))
    assert worst < 1e-9, f"correlation relative deviation {worst:.2e}"
    return f"max relative {worst:.1e}"


def _balance_relation(n_max):
    worst = 0.0
    for n in range(1, n_max + 1):
        for g in np.logspace(-3, 3, 13):
            params = SystemParams(n, omega=g, gamma=1.0)
            rates = steady.scattered_rates(params)
            worst = max(worst, abs(rates.total - params.gamma * g * g))
    assert worst < 1e-12, f"balance violated by {worst:.2e}"
    return f"max violation {worst:.1e}"


def _liouvillian_identity(n_max):
    worst = 0.0
    for n in range(1, n_max + 1):
        params = SystemParams(n, omega=0.7, gamma=1.0)
        full = liouvillian.build_liouvillian(params).matrix
        _, a_right = output_ops(params)
        worst = max(worst, np.abs(full - 2.0 * liouvillian.dissipator(a_right)).max())
    assert worst < 1e-12, f"generator identity residual {worst:.2e}"
    return f"max residual {worst:.1e}"


def _conditional_checks(g_weak):
    for n in (1, 2, 3):
        params = SystemParams(n, omega=1.3, gamma=1.0)
        rho = steady.steady_state(params).rho
        cond = liouvillian.condition_on_click(rho, params, "R")
        uniform = np.eye(n + 1) / (n + 1)
        assert np.abs(cond - uniform).max() < 1e-10, "any-click state not maximally mixed"
    params = SystemParams(2, omega=g_weak, gamma=1.0)
    no_trans = liouvillian.noclick_steady(liouvillian.build_liouvillian(params, "no_trans_click"))
    cond = liouvillian.condition_on_click(no_trans, params, "R")
    target = conditional.first_click_distribution(2).populations
    dev_first = np.abs(np.diag(cond).real - target).max()
    assert dev_first < 1e-2, f"first-click populations off by {dev_first:.2e}"
    no_any = liouvillian.noclick_steady(liouvillian.build_liouvillian(params, "no_any_click"))
    cond = liouvillian.condition_on_click(no_any, params, "R")
    assert cond[2, 2].real > 0.999, f"fully excited population {cond[2, 2].real:.4f}"
    return f"first-click max deviation {dev_first:.1e}"


def _cdf_vs_master_equation(n_max):
    worst = 0.0
    for n in range(1, n_max + 1):
        params = SystemParams(n, omega=0.0, gamma=1.0)
        superop = liouvillian.build_liouvillian(params)
        model = timescales.relaxation_model(n)
        dt = 0.01 / trajectory.rate_scale(params)
        rho = np.zeros((n + 1, n + 1), dtype=complex)
        rho[n, n] = 1.0
        t = 0.0
        for t_target in (0.5, 2.0, 6.0):
            rho = liouvillian.time_evolve(superop, rho, t_target - t, dt)
            t = t_target
            worst = max(worst, abs(rho[0, 0].real - timescales.hypoexp_cdf(model, t)))
    assert worst < 1e-6, f"CDF vs master equation deviation {worst:.2e}"
    return f"max deviation {worst:.1e}"


def _quantile_goldens():
    assert abs(timescales.t_in(1) - 4.0) < 1e-12
    assert abs(timescales.t_in(3) - 1.1006) < 5e-4
    q1 = timescales.t_out_quantile(timescales.relaxation_model(1), 0.999)
    q3 = timescales.t_out_quantile(timescales.relaxation_model(3), 0.99)
    assert abs(q1 - 3.45) < 0.01, f"q(1, 0.999) = {q1}"
    assert abs(q3 - 1.30) < 0.01, f"q(3, 0.99) = {q3}"
    return f"t_in(2) = sqrt(3) = {timescales.t_in(2):.4f} (reported discrepancy vs 1.70)"


def _model_round_trip():
    true = bunching.BunchModel(n_atoms=3, alpha_sq=0.8, t_in_hat=0.4, t_out_hat=0.9)
    hists = []
    for alpha_sq in (0.4, 0.8, 1.6):
        model = bunching.BunchModel(3, alpha_sq, true.t_in_hat, true.t_out_hat)
        probs = {
            k: (bunching.model_pk(model, k), 0.004) for k in range(4, 10)
        }
        hists.append(
            bunching.BunchHistogram(
                probabilities=probs,
                n_first_clicks=10_000,
                drive=np.sqrt(alpha_sq / 3.0),
                definition=bunching.FirstClickDefinition("quiet_all", 1.0),
                t_out_window=1.3,
                alpha_sq=alpha_sq,
            )
        )
    fit = bunching.fit_timescales(hists, n_atoms=3)
    err_in = abs(fit.t_in_hat - true.t_in_hat) / true.t_in_hat
    err_out = abs(fit.t_out_hat - true.t_out_hat) / true.t_out_hat
    assert max(err_in, err_out) < 0.02, f"round-trip errors {err_in:.3f}, {err_out:.3f}"
    return f"recovered within {max(err_in, err_out):.2%}"


def _trajectory_vs_rates(n_traj):
    params = SystemParams.from_drive(3, 1.0)
    config = trajectory.TrajectoryConfig(
        params=params, t_end=30.0, n_trajectories=n_traj, seed=20260809, burn_in=10.0
    )
    stream, _, _ = trajectory.run_batch(config)
    rates = steady.scattered_rates(params)
    obs_time = stream.observation_time
    for channel, expected in ((trajectory.CHANNEL_RIGHT, rates.n_trans),
                              (trajectory.CHANNEL_LEFT, rates.n_ref)):
        count = int((stream.channel == channel).sum())
        sigma = max(np.sqrt(expected * obs_time), 1.0)
        dev = abs(count - expected * obs_time) / sigma
        assert dev < 4.0, f"channel {channel} rate off by {dev:.1f} sigma"
    return f"rates within statistics over {obs_time:.0f}/gamma"


def _cascade_distribution(n_samples):
    times, left = trajectory.relaxation_samples(
        SystemParams(3, omega=0.0), n_samples, seed=99
    )
    model = timescales.relaxation_model(3)
    ks = stats.kstest(times, lambda t: timescales.hypoexp_cdf(model, t))
    assert ks.pvalue > 0.01, f"KS p-value {ks.pvalue:.4f}"
    counts = np.bincount(left, minlength=4)
    expected = n_samples * stats.binom.pmf(np.arange(4), 3, 0.5)
    chi2 = stats.chisquare(counts, expected)
    assert chi2.pvalue > 0.01, f"binomial partition p-value {chi2.pvalue:.4f}"
    return f"KS p = {ks.pvalue:.2f}, chi2 p = {chi2.pvalue:.2f}"


def run_suite(level: str = "quick") -> list[CheckResult]:
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    full = level == "full"
    n_max = 5 if full else 3
    g_values = (0.1, 0.5, 1.0, 5.0, 20.0) if full else (0.1, 1.0, 5.0)
    checks = [
        ("operator algebra", lambda: _algebra_checks(12 if full else 8)),
        ("steady state vs null space", lambda: _steady_vs_nullspace(n_max, g_values)),
        ("correlations vs trace", lambda: _correlations_vs_trace(n_max, g_values)),
        ("balance relation", lambda: _balance_relation(6 if full else 4)),
        ("generator identity", lambda: _liouvillian_identity(n_max)),
        ("conditional states", lambda: _conditional_checks(1e-3)),
        ("relaxation CDF vs master equation", lambda: _cdf_vs_master_equation(n_max)),
        ("timescale golden values", _quantile_goldens),
        ("bunch model round trip", _model_round_trip),
        ("trajectory rates vs analytics", lambda: _trajectory_vs_rates(600 if full else 150)),
        ("cascade statistics", lambda: _cascade_distribution(20_000 if full else 4_000)),
    ]
    return [_check(name, fn) for name, fn in checks]
