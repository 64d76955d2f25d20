"""Atomic states conditioned on transmitted detections.

Three conditioning schemes: on any transmitted click (maximally mixed at
every drive), on the first transmitted click of a scattering event
(truncated geometric over excitation number, weak drive), and on a
transmitted click with no prior click at all (fully excited, weak drive).
All states here are diagonal in the excitation basis; they are returned as
full density matrices so that trajectory-measured conditional states, which
pick up small coherences at finite drive, share the same interface.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConditionalState",
    "conditional_any_click",
    "first_click_distribution",
    "fully_excited_conditional",
    "conditional_after_k_reflections",
    "avg_excitation_after_first_click",
]

SCHEMES = ("any_click", "first_click_no_trans", "first_click_no_any")


@dataclass(frozen=True)
class ConditionalState:
    """Conditioned atomic state: populations over k = 0..N excited atoms."""

    scheme: str
    populations: np.ndarray

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_atoms(self) -> int:
        return len(self.populations) - 1

    @property
    def rho(self) -> np.ndarray:
        return np.diag(self.populations.astype(complex))

    @property
    def mean_excitation(self) -> float:
        return float(np.arange(len(self.populations)) @ self.populations)


def conditional_any_click(n_atoms: int) -> ConditionalState:
    """State after detecting any transmitted photon: I/(N+1), drive independent."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    pops = np.full(n_atoms + 1, 1.0 / (n_atoms + 1))
    return ConditionalState(scheme="any_click", populations=pops)


def first_click_distribution(n_atoms: int) -> ConditionalState:
    """State after the first transmitted click of a bunch (weak drive).

    Population of k excited atoms is 1 / (2^{N-k} (2 - 2^{-N})): a geometric
    ladder that doubles with each excitation step, reflecting that each of
    the N-k photons reflected before the first transmission halves the odds.
    """
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    k = np.arange(n_atoms + 1)
    pops = 1.0 / (2.0 ** (n_atoms - k) * (2.0 - 2.0 ** (-n_atoms)))
    return ConditionalState(scheme="first_click_no_trans", populations=pops)


def fully_excited_conditional(n_atoms: int) -> ConditionalState:
    """State after a transmitted click preceded by no click at all: |N>."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    pops = np.zeros(n_atoms + 1)
    pops[n_atoms] = 1.0
    return ConditionalState(scheme="first_click_no_any", populations=pops)


def conditional_after_k_reflections(n_atoms: int, k: int) -> ConditionalState:
    """State after k reflected clicks followed by one transmitted click: |N-k>."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    if not 0 <= k <= n_atoms:
        raise ValueError(f"k={k} outside 0..{n_atoms}")
    pops = np.zeros(n_atoms + 1)
    pops[n_atoms - k] = 1.0
    return ConditionalState(scheme="first_click_no_any", populations=pops)


def avg_excitation_after_first_click(n_atoms: int) -> float:
    """Mean excitation number left after the first transmitted click.

    Closed form (2^{N+1} N + 1)/(2^{N+1} - 1) - 1; approaches N - 1 already
    at N ~ 4.
    """
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    two = 2.0 ** (n_atoms + 1)
    return (two * n_atoms + 1.0) / (two - 1.0) - 1.0
