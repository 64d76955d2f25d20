"""Monte Carlo wavefunction unraveling producing timestamped detector clicks.

Each trajectory evolves a pure state under the non-Hermitian generator
H_eff = (Omega/2)(S+ + S-) - (i/2)(a_L^dag a_L + a_R^dag a_R) with fixed-step
fourth-order integration; a detection fires when the decaying squared norm
crosses a pre-drawn uniform threshold, with the crossing time refined by
bisection. The channel is chosen with probability proportional to
||a_i psi||^2 and the post-jump state is renormalized. Keeping the constant
alpha inside a_R means the right detector sees the transmitted drive
photons, not just atomic emission.

Randomness comes from counter-based Philox streams keyed by
(seed, stream index), so every trajectory is bit-reproducible regardless of
execution order or how many workers run the batch.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.random import Generator, Philox

from .dicke import SystemParams, output_ops, raising_op, lowering_op

__all__ = [
    "TrajectoryConfig",
    "ClickStream",
    "SnapshotSet",
    "TrajectoryResult",
    "CHANNEL_LEFT",
    "CHANNEL_RIGHT",
    "rate_scale",
    "run_trajectory",
    "run_batch",
    "relaxation_samples",
]

CHANNEL_LEFT = 0
CHANNEL_RIGHT = 1

_OK = 0
_NEED_UNIFORMS = 1
_NEED_CLICKS = 2
_NEED_SNAPSHOTS = 3
_NUMERICAL_FAILURE = 4


def rate_scale(params: SystemParams) -> float:
    """Fastest rate in the problem: cascade peak, input flux, or Rabi flop."""
    n = params.n_atoms
    k_mid = (n + 1) // 2
    gamma_max = 2.0 * params.gamma * k_mid * (n - k_mid + 1)
    return max(
        gamma_max,
        params.alpha_sq,
        params.omega * np.sqrt(n),
        params.gamma,
    )


@dataclass(frozen=True)
class TrajectoryConfig:
    """Simulation plan for a batch of independent trajectories.

    Times are in units of 1/gamma when gamma = 1. Clicks before ``burn_in``
    are simulated but not recorded, so recorded statistics sample the
    stationary regime. ``initial_state`` is "ground", "fully_excited", or an
    explicit complex amplitude vector of length N+1.
    """

    params: SystemParams
    t_end: float
    n_trajectories: int
    seed: int
    burn_in: float = 10.0
    dt: float | None = None
    initial_state: object = "ground"
    record_conditional_states: bool = False
    stream_offset: int = 0
    bisect_tol: float = 1e-6

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if not 0 <= self.burn_in < self.t_end:
            raise ValueError("burn_in must satisfy 0 <= burn_in < t_end")
        limit = 0.02 / rate_scale(self.params)
        if self.dt is None:
            object.__setattr__(self, "dt", limit)
        elif self.dt > limit or self.dt <= 0:
            raise ValueError(
                f"dt={self.dt} violates dt <= 0.02/rate scale = {limit:.3g}"
            )

    def initial_vector(self) -> np.ndarray:
        dim = self.params.basis.dim
        if isinstance(self.initial_state, str):
            psi = np.zeros(dim, dtype=complex)
            if self.initial_state == "ground":
                psi[0] = 1.0
            elif self.initial_state == "fully_excited":
                psi[-1] = 1.0
            else:
                raise ValueError(f"unknown initial state {self.initial_state!r}")
            return psi
        psi = np.asarray(self.initial_state, dtype=complex)
        if psi.shape != (dim,):
            raise ValueError(f"initial state must have shape ({dim},)")
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise ValueError("initial state must be nonzero")
        return psi / norm


@dataclass(frozen=True)
class ClickStream:
    """Timestamped detector events pooled over a batch of trajectories."""

    traj: np.ndarray
    t: np.ndarray
    channel: np.ndarray
    n_trajectories: int
    t_start: float
    t_end: float

    def __len__(self):
        return self.t.size

    @property
    def observation_time(self) -> float:
        """Total recorded time across trajectories."""
        return (self.t_end - self.t_start) * self.n_trajectories

    def for_trajectory(self, index: int):
        mask = self.traj == index
        return self.t[mask], self.channel[mask]

    def channel_rate(self, channel: int) -> float:
        return float((self.channel == channel).sum() / self.observation_time)


@dataclass(frozen=True)
class SnapshotSet:
    """Post-jump populations recorded at transmitted clicks.

    ``click_ordinal`` indexes the click within its trajectory's recorded
    clicks, tying each snapshot to one ClickStream row.
    """

    traj: np.ndarray
    t: np.ndarray
    click_ordinal: np.ndarray
    populations: np.ndarray

    def __len__(self):
        return self.t.size


@dataclass(frozen=True)
class TrajectoryResult:
    times: np.ndarray
    channels: np.ndarray
    snapshot_t: np.ndarray
    snapshot_ordinal: np.ndarray
    snapshot_populations: np.ndarray
    final_state: np.ndarray


@njit(cache=True, nogil=True)
def _matvec_ih(h_eff, psi, out):
    d = psi.shape[0]
    for i in range(d):
        acc = 0j
        for j in range(d):
            acc += h_eff[i, j] * psi[j]
        out[i] = -1j * acc


@njit(cache=True, nogil=True)
def _rk4_step(h_eff, psi, dt, k1, k2, k3, k4, tmp, out):
    d = psi.shape[0]
    _matvec_ih(h_eff, psi, k1)
    for i in range(d):
        tmp[i] = psi[i] + 0.5 * dt * k1[i]
    _matvec_ih(h_eff, tmp, k2)
    for i in range(d):
        tmp[i] = psi[i] + 0.5 * dt * k2[i]
    _matvec_ih(h_eff, tmp, k3)
    for i in range(d):
        tmp[i] = psi[i] + dt * k3[i]
    _matvec_ih(h_eff, tmp, k4)
    for i in range(d):
        out[i] = psi[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True, nogil=True)
def _norm_sq(psi):
    acc = 0.0
    for i in range(psi.shape[0]):
        acc += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
    return acc


@njit(cache=True, nogil=True)
def _mcwf_kernel(
    h_eff,
    a_left,
    a_right,
    psi0,
    dt,
    t_end,
    record_from,
    bisect_tol,
    uniforms,
    record_snaps,
    max_clicks,
    click_t,
    click_ch,
    snap_t,
    snap_ordinal,
    snap_pops,
    psi_final,
):
    """Single-trajectory unraveling; returns (status, n_clicks, n_snaps).

    Consumes ``uniforms`` sequentially: one jump threshold up front, then a
    channel selector and a fresh threshold per jump. The wavefunction stays
    unnormalized between jumps; a jump fires when the squared norm crosses
    the current threshold, with the crossing time bisected to ``bisect_tol``
    using single integrator steps from the last grid point. Stops early once
    ``max_clicks`` > 0 clicks are recorded, or when the state goes dark
    (zero total click rate, which is stationary for this model).
    """
    d = psi0.shape[0]
    psi = psi0.copy()
    k1 = np.empty(d, np.complex128)
    k2 = np.empty(d, np.complex128)
    k3 = np.empty(d, np.complex128)
    k4 = np.empty(d, np.complex128)
    tmp = np.empty(d, np.complex128)
    psi_next = np.empty(d, np.complex128)
    psi_jump = np.empty(d, np.complex128)
    a_psi = np.empty(d, np.complex128)

    n_clicks = 0
    n_snaps = 0
    iu = 0
    if iu >= uniforms.shape[0]:
        return _NEED_UNIFORMS, n_clicks, n_snaps
    threshold = max(uniforms[iu], 1e-300)
    iu += 1

    # total click rate; exactly zero only for an undriven ground state,
    # which is stationary, so integration can stop there
    w_left = 0.0
    w_right = 0.0
    for i in range(d):
        acc_l = 0j
        acc_r = 0j
        for j in range(d):
            acc_l += a_left[i, j] * psi[j]
            acc_r += a_right[i, j] * psi[j]
        w_left += acc_l.real * acc_l.real + acc_l.imag * acc_l.imag
        w_right += acc_r.real * acc_r.real + acc_r.imag * acc_r.imag
    dark = w_left + w_right == 0.0

    t = 0.0
    while t < t_end - 1e-12 and not dark:
        step = min(dt, t_end - t)
        _rk4_step(h_eff, psi, step, k1, k2, k3, k4, tmp, psi_next)
        nrm = _norm_sq(psi_next)
        if not np.isfinite(nrm):
            return _NUMERICAL_FAILURE, n_clicks, n_snaps
        if nrm >= threshold:
            for i in range(d):
                psi[i] = psi_next[i]
            t += step
            continue

        # threshold crossed inside (t, t+step]: bisect the crossing time
        lo = 0.0
        hi = step
        while hi - lo > bisect_tol:
            mid = 0.5 * (lo + hi)
            _rk4_step(h_eff, psi, mid, k1, k2, k3, k4, tmp, psi_jump)
            if _norm_sq(psi_jump) >= threshold:
                lo = mid
            else:
                hi = mid
        theta = 0.5 * (lo + hi)
        _rk4_step(h_eff, psi, theta, k1, k2, k3, k4, tmp, psi_jump)
        t_jump = t + theta

        # channel weights ||a_i psi||^2 at the crossing
        w_left = 0.0
        w_right = 0.0
        for i in range(d):
            acc = 0j
            for j in range(d):
                acc += a_left[i, j] * psi_jump[j]
            w_left += acc.real * acc.real + acc.imag * acc.imag
        for i in range(d):
            acc = 0j
            for j in range(d):
                acc += a_right[i, j] * psi_jump[j]
            w_right += acc.real * acc.real + acc.imag * acc.imag
        w_tot = w_left + w_right
        if w_tot <= 0.0 or not np.isfinite(w_tot):
            return _NUMERICAL_FAILURE, n_clicks, n_snaps

        if iu + 1 >= uniforms.shape[0]:
            return _NEED_UNIFORMS, n_clicks, n_snaps
        u_ch = uniforms[iu]
        iu += 1
        channel = CHANNEL_LEFT if u_ch < w_left / w_tot else CHANNEL_RIGHT
        threshold = max(uniforms[iu], 1e-300)
        iu += 1

        op = a_left if channel == CHANNEL_LEFT else a_right
        for i in range(d):
            acc = 0j
            for j in range(d):
                acc += op[i, j] * psi_jump[j]
            a_psi[i] = acc
        nrm_post = np.sqrt(_norm_sq(a_psi))
        for i in range(d):
            psi[i] = a_psi[i] / nrm_post

        w_left = 0.0
        w_right = 0.0
        for i in range(d):
            acc_l = 0j
            acc_r = 0j
            for j in range(d):
                acc_l += a_left[i, j] * psi[j]
                acc_r += a_right[i, j] * psi[j]
            w_left += acc_l.real * acc_l.real + acc_l.imag * acc_l.imag
            w_right += acc_r.real * acc_r.real + acc_r.imag * acc_r.imag
        dark = w_left + w_right == 0.0

        if t_jump >= record_from:
            if n_clicks >= click_t.shape[0]:
                return _NEED_CLICKS, n_clicks, n_snaps
            click_t[n_clicks] = t_jump
            click_ch[n_clicks] = channel
            n_clicks += 1
            if record_snaps and channel == CHANNEL_RIGHT:
                if n_snaps >= snap_t.shape[0]:
                    return _NEED_SNAPSHOTS, n_clicks, n_snaps
                snap_t[n_snaps] = t_jump
                snap_ordinal[n_snaps] = n_clicks - 1
                for i in range(d):
                    snap_pops[n_snaps, i] = (
                        psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
                    )
                n_snaps += 1
            if max_clicks > 0 and n_clicks >= max_clicks:
                break
        t = t_jump

    nrm = np.sqrt(_norm_sq(psi))
    for i in range(d):
        psi_final[i] = psi[i] / nrm
    return _OK, n_clicks, n_snaps


def _expected_clicks(config: TrajectoryConfig) -> float:
    p = config.params
    n = p.n_atoms
    emission_cap = p.gamma * n * (n + 2) / 6.0 + p.gamma * n
    return (p.alpha_sq + emission_cap) * config.t_end


def _stream_key(config: TrajectoryConfig, index: int):
    return [
        np.uint64(config.seed & 0xFFFFFFFFFFFFFFFF),
        np.uint64((config.stream_offset + index) & 0xFFFFFFFFFFFFFFFF),
    ]


def run_trajectory(
    config: TrajectoryConfig, index: int, max_clicks: int = 0
) -> TrajectoryResult:
    """Run trajectory ``index`` of the batch; bit-reproducible per (seed, index).

    ``max_clicks`` > 0 stops the trajectory after that many recorded clicks,
    which is how finite emission cascades are sampled without integrating
    dead time.
    """
    if not 0 <= index < config.n_trajectories:
        raise ValueError(f"trajectory index {index} outside batch")
    p = config.params
    a_left, a_right = output_ops(p)
    sp = raising_op(p.basis)
    sm = lowering_op(p.basis)
    h_drive = 0.5 * p.omega * (sp + sm)
    h_eff = h_drive.astype(complex) - 0.5j * (
        a_left.conj().T @ a_left + a_right.conj().T @ a_right
    )
    psi0 = config.initial_vector()
    dim = p.basis.dim

    click_cap = int(4 * _expected_clicks(config)) + 64
    uniform_cap = 2 * click_cap + 8
    snap_cap = click_cap if config.record_conditional_states else 1

    bisect_tol = config.bisect_tol / p.gamma
    for _ in range(8):
        rng = Generator(Philox(key=_stream_key(config, index)))
        uniforms = rng.random(uniform_cap)
        click_t = np.empty(click_cap)
        click_ch = np.empty(click_cap, np.uint8)
        snap_t = np.empty(snap_cap)
        snap_ordinal = np.empty(snap_cap, np.int64)
        snap_pops = np.empty((snap_cap, dim))
        psi_final = np.empty(dim, np.complex128)
        status, n_clicks, n_snaps = _mcwf_kernel(
            h_eff,
            a_left,
            a_right,
            psi0,
            config.dt,
            config.t_end,
            config.burn_in,
            bisect_tol,
            uniforms,
            config.record_conditional_states,
            max_clicks,
            click_t,
            click_ch,
            snap_t,
            snap_ordinal,
            snap_pops,
            psi_final,
        )
        if status == _OK:
            return TrajectoryResult(
                times=click_t[:n_clicks].copy(),
                channels=click_ch[:n_clicks].copy(),
                snapshot_t=snap_t[:n_snaps].copy(),
                snapshot_ordinal=snap_ordinal[:n_snaps].copy(),
                snapshot_populations=snap_pops[:n_snaps].copy(),
                final_state=psi_final,
            )
        if status == _NUMERICAL_FAILURE:
            raise FloatingPointError(
                f"trajectory {index} lost numerical sanity (seed {config.seed}); "
                "reduce dt"
            )
        click_cap *= 4
        uniform_cap = 2 * click_cap + 8
        snap_cap = click_cap if config.record_conditional_states else 1
    raise RuntimeError(f"trajectory {index} exceeded retry budget for buffer growth")


def run_batch(config: TrajectoryConfig, n_workers: int | None = None):
    """Run all trajectories of ``config``; returns (clicks, snapshots, finals).

    Trajectories are independent tasks on dedicated RNG streams, so the
    pooled result does not depend on worker count or scheduling. Aggregated
    arrays are ordered by (trajectory, time).
    """
    if n_workers is None:
        n_workers = min(os.cpu_count() or 1, 8)
    indices = range(config.n_trajectories)
    if n_workers > 1 and config.n_trajectories > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda i: run_trajectory(config, i), indices))
    else:
        results = [run_trajectory(config, i) for i in indices]

    traj_ids = np.concatenate(
        [np.full(r.times.size, i, dtype=np.int64) for i, r in enumerate(results)]
    ) if results else np.empty(0, np.int64)
    stream = ClickStream(
        traj=traj_ids,
        t=np.concatenate([r.times for r in results]),
        channel=np.concatenate([r.channels for r in results]),
        n_trajectories=config.n_trajectories,
        t_start=config.burn_in,
        t_end=config.t_end,
    )
    snapshots = SnapshotSet(
        traj=np.concatenate(
            [np.full(r.snapshot_t.size, i, dtype=np.int64) for i, r in enumerate(results)]
        ),
        t=np.concatenate([r.snapshot_t for r in results]),
        click_ordinal=np.concatenate([r.snapshot_ordinal for r in results]),
        populations=np.concatenate([r.snapshot_populations for r in results])
        if any(r.snapshot_t.size for r in results)
        else np.empty((0, config.params.basis.dim)),
    )
    finals = np.stack([r.final_state for r in results])
    return stream, snapshots, finals


def relaxation_samples(
    params: SystemParams,
    n_samples: int,
    seed: int,
    n_workers: int | None = None,
):
    """Sample full-cascade relaxation times from undriven trajectories.

    The ensemble starts fully excited with the drive off, emits exactly N
    photons, and each sample is the arrival time of the final click. Also
    returns the per-sample count of left-channel clicks, which partitions
    the N emissions binomially between the two directions.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    undriven = SystemParams(n_atoms=params.n_atoms, omega=0.0, gamma=params.gamma)
    t_end = 80.0 / params.gamma
    config = TrajectoryConfig(
        params=undriven,
        t_end=t_end,
        n_trajectories=n_samples,
        seed=seed,
        burn_in=0.0,
        initial_state="fully_excited",
    )

    def one(i):
        r = run_trajectory(config, i, max_clicks=params.n_atoms)
        if r.times.size != params.n_atoms:
            raise RuntimeError(
                f"undriven cascade sample {i} produced {r.times.size} clicks, "
                f"expected {params.n_atoms}; increase t_end"
            )
        return r.times[-1], int((r.channels == CHANNEL_LEFT).sum())

    if n_workers is None:
        n_workers = min(os.cpu_count() or 1, 8)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            pairs = list(pool.map(one, range(n_samples)))
    else:
        pairs = [one(i) for i in range(n_samples)]
    times = np.array([p[0] for p in pairs])
    left_counts = np.array([p[1] for p in pairs], dtype=np.int64)
    return times, left_counts
