"""Spin operators and the two-spin Hamiltonian.

Two spin-1/2 particles in an external field b, coupled by a uniaxial
Ising exchange along z and a Dzyaloshinskii-Moriya (DMI) term whose
vector is tilted by an angle theta from the Ising axis inside the
b_x b_z plane:

    H(b; J, D, theta) = b.S + 4J s1z s2z + 4 Dvec . (s1 x s2)

Units: hbar = 1, spin operators are sigma/2, and b carries energy units
directly (gyromagnetic factors absorbed).  The product basis is ordered
(uu, ud, du, dd).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def _readonly(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


def site_spin_operators(n_spins):
    """Spin-1/2 operators (sx, sy, sz) for each of n_spins sites.

    Built by tensor products in the product basis; site 0 is the
    leftmost factor.  Returns a list of 3-tuples of 2**n x 2**n arrays.
    """
    if n_spins < 1:
        raise ValueError("n_spins must be >= 1")
    ops = []
    eye = np.eye(2, dtype=complex)
    for site in range(n_spins):
        triple = []
        for sigma in PAULI:
            m = np.array([[1.0 + 0j]])
            for j in range(n_spins):
                m = np.kron(m, sigma / 2 if j == site else eye)
            triple.append(_readonly(m))
        ops.append(tuple(triple))
    return ops


@dataclass(frozen=True)
class SpinSystem:
    """Spin operators of the two-spin system in the product basis."""

    s1: tuple
    s2: tuple
    S: tuple

    @classmethod
    def build(cls):
        s1, s2 = site_spin_operators(2)
        total = tuple(_readonly(a + b) for a, b in zip(s1, s2))
        return cls(s1=s1, s2=s2, S=total)


_DEFAULT_SYSTEM = None


def build_spin_system():
    """Shared immutable SpinSystem instance (operators are read-only)."""
    global _DEFAULT_SYSTEM
    if _DEFAULT_SYSTEM is None:
        _DEFAULT_SYSTEM = SpinSystem.build()
    return _DEFAULT_SYSTEM


@dataclass(frozen=True)
class Coupling:
    """Spin-spin coupling: Ising strength J, DMI magnitude D, tilt theta.

    The DMI vector is D*(sin theta, 0, cos theta); theta in radians.
    """

    j: float = 0.0
    d: float = 0.0
    theta: float = 0.0

    @classmethod
    def from_degrees(cls, j, d, theta_deg):
        return cls(j=float(j), d=float(d), theta=math.radians(float(theta_deg)))

    @property
    def theta_deg(self):
        return math.degrees(self.theta)

    @property
    def dmi_vector(self):
        # y component is exactly zero by construction.
        return np.array([self.d * math.sin(self.theta), 0.0, self.d * math.cos(self.theta)])

    @property
    def is_free(self):
        return self.j == 0.0 and self.d == 0.0


@dataclass(frozen=True)
class FieldPoint:
    """A point b of the 3-D external-field parameter space."""

    b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        arr = _readonly(np.array(self.b, dtype=float))
        if arr.shape != (3,):
            raise ValueError(f"field point must be a 3-vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field point components must be finite")
        object.__setattr__(self, "b", arr)

    @property
    def norm(self):
        return float(np.linalg.norm(self.b))

    @property
    def direction(self):
        r = self.norm
        if r == 0.0:
            raise ZeroDivisionError("direction undefined at b = 0")
        return self.b / r

    def __iter__(self):
        return iter(self.b)


def _as_b(b):
    if isinstance(b, FieldPoint):
        return b.b
    return np.asarray(b, dtype=float)


def interaction_matrix(coupling, system=None):
    """Field-independent part of H: Ising plus DMI, as a 4x4 array."""
    sys = system or build_spin_system()
    s1, s2 = sys.s1, sys.s2
    h = 4.0 * coupling.j * (s1[2] @ s2[2])
    dvec = coupling.dmi_vector
    if coupling.d != 0.0:
        cross = (
            s1[1] @ s2[2] - s1[2] @ s2[1],
            s1[2] @ s2[0] - s1[0] @ s2[2],
            s1[0] @ s2[1] - s1[1] @ s2[0],
        )
        for a in range(3):
            if dvec[a] != 0.0:
                h = h + 4.0 * dvec[a] * cross[a]
    return h


def build_hamiltonian(b, coupling, system=None):
    """Assemble H(b; g) = b.S + 4J s1z s2z + 4 Dvec.(s1 x s2)."""
    sys = system or build_spin_system()
    bv = _as_b(b)
    h = interaction_matrix(coupling, sys).astype(complex)
    for a in range(3):
        if bv[a] != 0.0:
            h = h + bv[a] * sys.S[a]
    return h


def build_hamiltonians(bs, coupling, system=None):
    """Assemble H at a batch of field points; bs has shape (N, 3)."""
    sys = system or build_spin_system()
    bs = np.asarray(bs, dtype=float)
    if bs.ndim != 2 or bs.shape[1] != 3:
        raise ValueError("bs must have shape (N, 3)")
    stack = np.stack(sys.S)  # (3, 4, 4)
    h = np.tensordot(bs, stack, axes=(1, 0))  # (N, 4, 4)
    h += interaction_matrix(coupling, sys)
    return h
