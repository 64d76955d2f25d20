"""Collective-spin ladder operators for N two-level emitters.

Everything downstream lives in the (N+1)-dimensional symmetric subspace of
N identical atoms. The basis is indexed by the number of *excited* atoms,
k = 0..N, in ascending energy, so cascaded decay reads as k -> k-1. All
operators are built directly from the closed-form matrix elements; nothing
is assembled from single-atom tensor products.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DickeBasis",
    "SystemParams",
    "lowering_op",
    "raising_op",
    "sz_op",
    "output_ops",
]


@dataclass(frozen=True)
class DickeBasis:
    """Symmetric subspace of ``n_atoms`` two-level emitters.

    Basis index k counts excited atoms (k = 0 is the ground state). The
    complementary convention counting ground-state atoms is p = N - k.
    """

    n_atoms: int

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError(f"need at least one atom, got {self.n_atoms}")

    @property
    def dim(self) -> int:
        return self.n_atoms + 1

    def ground_count(self, k_excited: int) -> int:
        """Convert an excited-atom index to a ground-atom count."""
        if not 0 <= k_excited <= self.n_atoms:
            raise ValueError(f"index {k_excited} outside 0..{self.n_atoms}")
        return self.n_atoms - k_excited


@dataclass(frozen=True)
class SystemParams:
    """Drive and decay parameters of the waveguide-coupled ensemble.

    gamma is the one-directional spontaneous emission rate and omega the
    Rabi frequency of the resonant coherent drive. Derived quantities:
    g = i*omega/gamma (dimensionless drive) and alpha = i*omega/sqrt(gamma)
    (rate amplitude of the incoming coherent field).
    """

    n_atoms: int
    omega: float
    gamma: float = 1.0
    basis: DickeBasis = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.omega < 0:
            raise ValueError(f"omega must be nonnegative, got {self.omega}")
        object.__setattr__(self, "basis", DickeBasis(self.n_atoms))

    @property
    def g(self) -> complex:
        return 1j * self.omega / self.gamma

    @property
    def g_abs(self) -> float:
        return self.omega / self.gamma

    @property
    def alpha(self) -> complex:
        return 1j * self.omega / np.sqrt(self.gamma)

    @property
    def alpha_sq(self) -> float:
        """Input photon rate |alpha|^2 = omega^2 / gamma."""
        return self.omega**2 / self.gamma

    @property
    def drive(self) -> float:
        """Effective drive amplitude omega / (gamma sqrt(N))."""
        return self.omega / (self.gamma * np.sqrt(self.n_atoms))

    @classmethod
    def from_drive(cls, n_atoms: int, drive: float, gamma: float = 1.0):
        """Build parameters from the effective amplitude omega/(gamma sqrt(N))."""
        return cls(n_atoms=n_atoms, omega=drive * gamma * np.sqrt(n_atoms), gamma=gamma)


def lowering_op(basis: DickeBasis) -> np.ndarray:
    """Collective lowering operator S- mapping |k> -> sqrt(k(N-k+1)) |k-1>."""
    n = basis.n_atoms
    s = np.zeros((n + 1, n + 1))
    for k in range(1, n + 1):
        s[k - 1, k] = np.sqrt(k * (n - k + 1))
    return s


def raising_op(basis: DickeBasis) -> np.ndarray:
    """Collective raising operator S+ = (S-)^dagger."""
    return lowering_op(basis).T


def sz_op(basis: DickeBasis) -> np.ndarray:
    """Collective energy operator, diagonal with entries k - N/2."""
    n = basis.n_atoms
    return np.diag(np.arange(n + 1) - n / 2)


def output_ops(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Outgoing field operators (a_L, a_R) for left/right detectors.

    The left output carries only atomic emission, a_L = sqrt(gamma) S-.
    The right output superposes the transmitted drive with the emission,
    a_R = alpha I + sqrt(gamma) S-.
    """
    sm = lowering_op(params.basis).astype(complex)
    a_left = np.sqrt(params.gamma) * sm
    a_right = params.alpha * np.eye(params.basis.dim) + np.sqrt(params.gamma) * sm
    return a_left, a_right
