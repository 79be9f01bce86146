"""Hermitian eigendecomposition with deterministic band conventions.

Bands are always indexed in ascending energy order, k = 1..4.  Each
eigenvector's phase is fixed so that its largest-magnitude component is
real and positive, which makes serialized spectra reproducible (the
synthetic field itself is phase independent).

Exactly degenerate subspaces are canonicalized against the
singlet-triplet basis taken along the instantaneous field direction, so
that decoupled states (e.g. the spin singlet) come out unmixed instead
of in an arbitrary rotation chosen by the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spinops import FieldPoint, _as_b, build_spin_system

HERMITICITY_TOL = 1e-10
# Eigenvalue clusters closer than this (relative to the spectral scale)
# are treated as exactly degenerate and canonicalized.
DEGENERACY_CLUSTER_TOL = 1e-11

ZEEMAN_LABELS = ("-1", "0t", "0s", "+1")  # order of singlet_triplet_basis columns


class NonHermitianError(ValueError):
    """Input matrix is not Hermitian within tolerance."""

    def __init__(self, deviation):
        self.deviation = float(deviation)
        super().__init__(
            f"matrix is not Hermitian: max |H - H^dag| = {self.deviation:.3e} "
            f"exceeds {HERMITICITY_TOL:.0e}"
        )


def spinor_along(n):
    """Spin-up and spin-down spinors along the unit direction n."""
    theta = np.arccos(np.clip(n[2], -1.0, 1.0))
    phi = np.arctan2(n[1], n[0])
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    up = np.array([c, np.exp(1j * phi) * s])
    down = np.array([-np.exp(-1j * phi) * s, c])
    return up, down


def singlet_triplet_basis(n=None):
    """Columns [ |1,-1>, |1,0>, |0,0>, |1,+1> ] quantized along n.

    Falls back to the z axis when no direction is given.  The singlet
    column is direction independent up to phase.
    """
    if n is None:
        n = np.array([0.0, 0.0, 1.0])
    up, down = spinor_along(np.asarray(n, dtype=float))
    mm = np.kron(down, down)
    pp = np.kron(up, up)
    t0 = (np.kron(up, down) + np.kron(down, up)) / np.sqrt(2.0)
    s0 = (np.kron(up, down) - np.kron(down, up)) / np.sqrt(2.0)
    return np.stack([mm, t0, s0, pp], axis=1)


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigensystem of a 4x4 Hermitian matrix at one field point."""

    energies: np.ndarray  # (4,) ascending
    states: np.ndarray  # (4, 4), states[:, k] is psi_k
    gaps: np.ndarray  # (4,) min_{l != k} |E_l - E_k|
    b: np.ndarray  # (3,) field point the matrix was assembled at

    @property
    def min_gap(self):
        return float(self.gaps.min())

    def zeeman_labels(self):
        """Dominant singlet/triplet character of each state along b."""
        n = None
        r = np.linalg.norm(self.b)
        if r > 0:
            n = self.b / r
        basis = singlet_triplet_basis(n)
        overlaps = np.abs(basis.conj().T @ self.states) ** 2  # (basis, state)
        return tuple(ZEEMAN_LABELS[i] for i in np.argmax(overlaps, axis=0))


def field_from_matrix(h):
    """Recover b from H: the Zeeman part is the only trace against S."""
    sys = build_spin_system()
    return np.array([np.trace(h @ sys.S[a]).real / 2.0 for a in range(3)])


def _fix_phases(v):
    """Rotate each column so its largest-magnitude entry is real positive."""
    idx = np.argmax(np.abs(v), axis=-2)  # (..., 4)
    lead = np.take_along_axis(v, idx[..., None, :], axis=-2)[..., 0, :]
    mag = np.abs(lead)
    phase = np.where(mag > 0, lead / np.where(mag > 0, mag, 1.0), 1.0)
    return v * phase.conj()[..., None, :]


def _band_gaps(energies):
    diff = np.abs(energies[..., :, None] - energies[..., None, :])
    diff[..., np.arange(4), np.arange(4)] = np.inf
    return diff.min(axis=-1)


def _canonicalize_degenerate(energies, states, b):
    """Align exactly degenerate clusters with the singlet-triplet basis.

    Within a cluster, the replacement vectors are projections of the
    best-overlapping singlet-triplet states, orthonormalized in a fixed
    character order.  This is a deterministic tie-break; it changes
    nothing outside degenerate subspaces.
    """
    scale = max(1.0, float(np.max(np.abs(energies))))
    tol = DEGENERACY_CLUSTER_TOL * scale
    n = None
    r = np.linalg.norm(b)
    if r > 0:
        n = b / r
    basis = singlet_triplet_basis(n)

    out = states.copy()
    k = 0
    while k < 4:
        m = k + 1
        while m < 4 and energies[m] - energies[m - 1] < tol:
            m += 1
        if m - k > 1:
            sub = states[:, k:m]  # (4, size)
            coeff = sub.conj().T @ basis  # (size, 4): basis states in subspace coords
            weights = np.sum(np.abs(coeff) ** 2, axis=0)
            order = sorted(range(4), key=lambda i: (-weights[i], i))[: m - k]
            order.sort()  # fixed character order within the cluster
            new = sub @ coeff[:, order]  # projections into the subspace
            # Gram-Schmidt; fall back to the original vectors on rank loss.
            q, rr = np.linalg.qr(new)
            if np.min(np.abs(np.diag(rr))) > 1e-6:
                out[:, k:m] = q
        k = m
    return _fix_phases(out)


def decompose(h, check=True):
    """Eigendecompose a 4x4 Hermitian matrix into a Spectrum."""
    h = np.asarray(h, dtype=complex)
    if check:
        dev = np.max(np.abs(h - h.conj().T))
        if dev > HERMITICITY_TOL:
            raise NonHermitianError(dev)
    energies, states = np.linalg.eigh(h)
    b = field_from_matrix(h)
    gaps = _band_gaps(energies)
    if gaps.min() < DEGENERACY_CLUSTER_TOL * max(1.0, np.max(np.abs(energies))):
        states = _canonicalize_degenerate(energies, states, b)
    else:
        states = _fix_phases(states)
    states.setflags(write=False)
    energies.setflags(write=False)
    gaps.setflags(write=False)
    return Spectrum(energies=energies, states=states, gaps=gaps, b=b)


def decompose_batch(hs, bs):
    """Batched decomposition; returns (energies (N,4), states (N,4,4)).

    States follow the same phase and degeneracy conventions as
    decompose().  bs supplies the field point of each matrix (used only
    for canonicalizing exactly degenerate clusters).
    """
    hs = np.asarray(hs, dtype=complex)
    bs = np.asarray(bs, dtype=float)
    energies, states = np.linalg.eigh(hs)
    states = _fix_phases(states)
    scale = np.maximum(1.0, np.max(np.abs(energies), axis=-1))
    gaps = _band_gaps(energies)
    flagged = np.nonzero(gaps.min(axis=-1) < DEGENERACY_CLUSTER_TOL * scale)[0]
    for i in flagged:
        states[i] = _canonicalize_degenerate(energies[i], states[i], bs[i])
    return energies, states


@dataclass(frozen=True)
class SpinMatrixElements:
    """Total-spin matrix elements <psi_k| S |psi_l> as skl[axis, k, l]."""

    skl: np.ndarray  # (3, 4, 4) complex

    def vector(self, k, l):
        """Complex 3-vector S_kl for 1-based band indices."""
        return self.skl[:, k - 1, l - 1]


def matrix_elements(spectrum, system=None):
    """S_kl for all band pairs of one spectrum."""
    sys = system or build_spin_system()
    v = spectrum.states
    skl = np.stack([v.conj().T @ sa @ v for sa in sys.S])
    skl.setflags(write=False)
    return SpinMatrixElements(skl=skl)


def spectrum_at(b, coupling, system=None):
    """Convenience: assemble H(b; g) and decompose it."""
    from .spinops import build_hamiltonian

    return decompose(build_hamiltonian(_as_b(b), coupling, system), check=False)


__all__ = [
    "NonHermitianError",
    "Spectrum",
    "SpinMatrixElements",
    "decompose",
    "decompose_batch",
    "matrix_elements",
    "singlet_triplet_basis",
    "spectrum_at",
    "FieldPoint",
]
