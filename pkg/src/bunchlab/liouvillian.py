"""Dense-superoperator ground truth for the driven ensemble.

Builds the full Lindblad generator and its no-click variants as explicit
(N+1)^2 x (N+1)^2 matrices, solves for the stationary state by dense
null-space extraction, and integrates time evolution with a classic
fixed-step fourth-order scheme. Dimensions stay tiny (<= 441 for N = 20),
so dense linear algebra is both trivial and dependable.

Vectorization is column-major throughout: vec stacks columns (Fortran
order), so vec(A rho B) = (B^T kron A) vec(rho).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .dicke import SystemParams, lowering_op, output_ops, raising_op

__all__ = [
    "Superoperator",
    "KINDS",
    "vectorize",
    "unvectorize",
    "dissipator",
    "build_liouvillian",
    "steady_state_numeric",
    "noclick_steady",
    "condition_on_click",
    "time_evolve",
]

KINDS = ("full", "no_trans_click", "no_any_click")


def vectorize(rho: np.ndarray) -> np.ndarray:
    return rho.reshape(-1, order="F")

def unvectorize(vec: np.ndarray) -> np.ndarray:
    dim = int(round(np.sqrt(vec.size)))
    return vec.reshape((dim, dim), order="F")


def _left_mult(a):
    return np.kron(np.eye(a.shape[0]), a)

def _right_mult(b):
    return np.kron(b.T, np.eye(b.shape[0]))

def _sandwich(a, b):
    """Superoperator of rho -> a rho b."""
    return np.kron(b.T, a)


def dissipator(op: np.ndarray) -> np.ndarray:
    """Lindblad dissipator L rho L+ - {L+L, rho}/2 as a dense superoperator."""
    ldl = op.conj().T @ op
    return (
        _sandwich(op, op.conj().T)
        - 0.5 * _left_mult(ldl)
        - 0.5 * _right_mult(ldl)
    )


@dataclass(frozen=True)
class Superoperator:
    """Dense generator plus bookkeeping for removed click terms.

    For the no-click kinds the stored ``matrix`` is the *linear* part only;
    trace preservation requires the state-dependent compensation
    + sum_i Tr(K_i rho) rho with K_i = L_i^dag L_i listed in
    ``compensation_ops``. The nonlinear integrator in ``noclick_steady``
    adds those terms; the linear matrix alone is not trace preserving.
    """

    matrix: np.ndarray
    kind: str
    params: SystemParams
    trace_preserving: bool
    compensation_ops: tuple = field(default=())

    @property
    def dim(self) -> int:
        return self.params.basis.dim


def build_liouvillian(params: SystemParams, kind: str = "full") -> Superoperator:
    """Generator of the master equation, optionally with click terms removed.

    kind="full": -i (Omega/2)[S+ + S-, rho] + D(a_R) rho + D(a_L) rho.
    kind="no_trans_click": the a_R rho a_R^dag jump term is removed.
    kind="no_any_click": both jump terms are removed.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}, expected one of {KINDS}")
    basis = params.basis
    sm = lowering_op(basis).astype(complex)
    sp = raising_op(basis).astype(complex)
    a_left, a_right = output_ops(params)
    h_drive = 0.5 * params.omega * (sp + sm)
    lv = -1j * (_left_mult(h_drive) - _right_mult(h_drive))
    lv = lv + dissipator(a_right) + dissipator(a_left)
    comp = []
    if kind in ("no_trans_click", "no_any_click"):
        lv = lv - _sandwich(a_right, a_right.conj().T)
        comp.append(a_right.conj().T @ a_right)
    if kind == "no_any_click":
        lv = lv - _sandwich(a_left, a_left.conj().T)
        comp.append(a_left.conj().T @ a_left)
    return Superoperator(
        matrix=lv,
        kind=kind,
        params=params,
        trace_preserving=(kind == "full"),
        compensation_ops=tuple(comp),
    )


def steady_state_numeric(superop: Superoperator) -> np.ndarray:
    """Stationary state from the null space of the full generator.

    Singular-value decomposition of the dense generator; the right singular
    vector of the smallest singular value is reshaped, Hermitized and trace
    normalized. Raises if the null space is degenerate (which cannot happen
    for a driven ensemble) or the residual exceeds 1e-11.
    """
    if superop.kind != "full":
        raise ValueError("steady_state_numeric needs the full generator")
    if superop.params.omega == 0:
        raise ValueError("steady state is only unique for omega > 0")
    lv = superop.matrix
    _, s, vh = np.linalg.svd(lv)
    near_null = int((s < 1e-8 * s[0]).sum())
    if near_null != 1:
        raise np.linalg.LinAlgError(
            f"expected a one-dimensional null space, found {near_null} "
            f"singular values below threshold (dim {lv.shape[0]})"
        )
    rho = unvectorize(vh[-1].conj())
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = np.linalg.norm(lv @ vectorize(rho))
    if residual > 1e-11:
        raise np.linalg.LinAlgError(f"stationary residual {residual:.2e} > 1e-11")
    return rho


def _noclick_rhs(superop):
    lv = superop.matrix
    comp = superop.compensation_ops

    def rhs(_, y):
        rho = unvectorize(y)
        drho = unvectorize(lv @ y)
        for k_op in comp:
            drho = drho + np.trace(k_op @ rho) * rho
        return vectorize(drho)

    return rhs


def noclick_steady(
    superop: Superoperator,
    t_max: float = 2000.0,
    residual_tol: float = 1e-10,
    chunk: float = 25.0,
) -> np.ndarray:
    """Fixed point of the trace-compensated no-click equation.

    The compensation term Tr(L^dag L rho) rho makes the equation nonlinear,
    so the fixed point is found by relaxation from the ground state with
    adaptive time stepping, in chunks, until ||drho/dt|| falls below
    ``residual_tol``. Raises with the last residual if the budget ``t_max``
    (in units of 1/gamma) is exhausted first.
    """
    if superop.kind == "full":
        raise ValueError("noclick_steady expects a no-click generator")
    dim = superop.dim
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1.0
    rhs = _noclick_rhs(superop)
    y = vectorize(rho0)
    t = 0.0
    scale = superop.params.gamma
    while t < t_max / scale:
        sol = solve_ivp(
            rhs,
            (t, t + chunk / scale),
            y,
            method="RK45",
            rtol=1e-10,
            atol=1e-12,
        )
        if not sol.success:
            raise RuntimeError(f"no-click relaxation failed: {sol.message}")
        y = sol.y[:, -1]
        t = sol.t[-1]
        residual = np.linalg.norm(rhs(t, y))
        if residual <= residual_tol:
            rho = unvectorize(y)
            rho = 0.5 * (rho + rho.conj().T)
            return rho / np.trace(rho).real
    raise RuntimeError(
        f"no-click relaxation did not reach residual {residual_tol:.1e} "
        f"within t = {t_max}/gamma (last residual {residual:.2e})"
    )


def condition_on_click(rho: np.ndarray, params: SystemParams, channel: str) -> np.ndarray:
    """State update a rho a^dag / Tr(a rho a^dag) after a detector click."""
    a_left, a_right = output_ops(params)
    op = {"L": a_left, "R": a_right}.get(channel)
    if op is None:
        raise ValueError(f"channel must be 'L' or 'R', got {channel!r}")
    out = op @ rho @ op.conj().T
    norm = np.trace(out).real
    if norm <= 0:
        raise ValueError(f"zero click rate on channel {channel}; cannot condition")
    return out / norm


def time_evolve(
    superop: Superoperator,
    rho0: np.ndarray,
    t_end: float,
    dt: float,
) -> np.ndarray:
    """Propagate rho0 for t_end with classic fixed-step RK4.

    Only the linear generator is integrated (use ``noclick_steady`` for the
    trace-compensated equations). The step must satisfy
    dt <= 0.05 / max rate scale so the scheme stays in its accurate regime.
    """
    params = superop.params
    n = params.n_atoms
    gamma_max = 2.0 * params.gamma * ((n + 1) // 2) * (n - (n + 1) // 2 + 1)
    scale = max(gamma_max, params.alpha_sq, params.omega)
    if dt > 0.05 / scale:
        raise ValueError(
            f"dt={dt} too large for rate scale {scale:.3g}; need dt <= {0.05 / scale:.3g}"
        )
    lv = superop.matrix
    y = vectorize(rho0.astype(complex))
    n_steps = int(np.ceil(t_end / dt))
    step = t_end / n_steps
    for _ in range(n_steps):
        k1 = lv @ y
        k2 = lv @ (y + 0.5 * step * k1)
        k3 = lv @ (y + 0.5 * step * k2)
        k4 = lv @ (y + step * k3)
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("time evolution diverged")
    return unvectorize(y)
