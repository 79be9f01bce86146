"""Synthetic magnetic field of the spin pair and derived quantities.

The field attached to band k at parameter point b is

    B_k(b; g) = i * sum_{l != k} S_kl x S_lk / (E_l - E_k)^2

with S_kl the total-spin matrix elements between eigenstates.  The
cross product is taken componentwise over the complex vectors (no
conjugation); realness of the result is asserted, not forced.

Terms whose energy denominator vanishes are only tolerated when the
corresponding matrix elements vanish too (decoupled states, e.g. the
singlet for D = 0); a small gap with nonzero coupling means the point
is too close to a monopole and evaluation is refused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spinops import Coupling, FieldPoint, _as_b, build_hamiltonians, build_spin_system
from .eigen import decompose_batch

GAP_TOLERANCE = 1e-6
# Matrix elements below this magnitude count as decoupled when the gap
# closes; |S_kl x S_lk| then contributes ~1e-16 at worst.
COUPLING_EPS = 1e-8
REALNESS_TOL = 1e-10


class NearDegeneracy(RuntimeError):
    """Pointwise field evaluation refused: coupled bands nearly cross."""

    def __init__(self, b, band, gap):
        self.b = np.asarray(b, dtype=float)
        self.band = band
        self.gap = float(gap)
        super().__init__(
            f"band {band} gap {gap:.3e} below tolerance at b = {tuple(self.b)}"
        )


@dataclass(frozen=True)
class FieldSample:
    """B (and optionally its curl) for one band at one field point."""

    b: FieldPoint
    band: int
    B: np.ndarray
    min_gap: float
    j: np.ndarray | None = None


def _field_terms(energies, skl, gap_tolerance, bands):
    """Field values of the requested bands from one (batched) eigensystem.

    energies: (N, 4); skl: (N, 3, 4, 4).  Returns (N, 4, 3) real fields
    (rows of unrequested bands stay zero).  Raises NearDegeneracy at the
    first point where a vanishing gap comes with non-vanishing coupling.
    """
    n = energies.shape[0]
    fields = np.zeros((n, 4, 3))
    for k in bands:
        total = np.zeros((n, 3), dtype=complex)
        for l in range(4):
            if l == k:
                continue
            gap = energies[:, l] - energies[:, k]
            s_kl = skl[:, :, k, l]  # (N, 3)
            s_lk = skl[:, :, l, k]
            coupling = np.max(np.abs(s_kl), axis=1)
            small = np.abs(gap) < gap_tolerance
            bad = small & (coupling > COUPLING_EPS)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise NearDegeneracy(b=np.full(3, np.nan), band=k + 1, gap=abs(gap[i]))
            denom = np.where(small, 1.0, gap) ** 2
            term = 1j * np.cross(s_kl, s_lk) / denom[:, None]
            term[small] = 0.0
            total += term
        scale = np.maximum(1.0, np.max(np.abs(total.real), axis=1))
        if np.any(np.abs(total.imag).sum(axis=1) > REALNESS_TOL * scale):
            raise ArithmeticError("synthetic field has a non-negligible imaginary part")
        fields[:, k, :] = total.real
    return fields


def fields_at(bs, coupling, bands=None, gap_tolerance=GAP_TOLERANCE, system=None):
    """Synthetic fields at a batch of points, for all or selected bands.

    bands is an iterable of 1-based indices (default: all four).
    Returns (fields (N, 4, 3), gaps (N, 4)); rows of bands that were not
    requested are zero.  NearDegeneracy carries the offending point when
    a coupled gap closes anywhere in the batch.
    """
    sys = system or build_spin_system()
    bs = np.atleast_2d(np.asarray(bs, dtype=float))
    band_idx = range(4) if bands is None else [b - 1 for b in bands]
    hs = build_hamiltonians(bs, coupling, sys)
    energies, states = decompose_batch(hs, bs)
    sstack = np.stack(sys.S)
    skl = np.einsum("nki,akl,nlj->naij", states.conj(), sstack, states, optimize=True)
    try:
        fields = _field_terms(energies, skl, gap_tolerance, band_idx)
    except NearDegeneracy as exc:
        gaps = np.abs(energies[:, :, None] - energies[:, None, :])
        gaps[:, np.arange(4), np.arange(4)] = np.inf
        i = int(np.argmin(gaps.min(axis=(1, 2))))
        raise NearDegeneracy(bs[i], exc.band, gaps[i].min()) from None
    gaps = np.abs(energies[:, :, None] - energies[:, None, :])
    gaps[:, np.arange(4), np.arange(4)] = np.inf
    return fields, gaps.min(axis=2)


def synthetic_field(b, coupling, band, gap_tolerance=GAP_TOLERANCE, system=None):
    """FieldSample of one band (1-based) at one point."""
    if band not in (1, 2, 3, 4):
        raise ValueError(f"band index must be 1..4, got {band}")
    bv = _as_b(b)
    fields, gaps = fields_at(bv[None, :], coupling, [band], gap_tolerance, system)
    return FieldSample(
        b=b if isinstance(b, FieldPoint) else FieldPoint(bv),
        band=band,
        B=fields[0, band - 1],
        min_gap=float(gaps[0].min()),
    )


def field_sum(b, coupling, gap_tolerance=GAP_TOLERANCE, system=None):
    """Sum of the four band fields at b (identically zero analytically)."""
    bv = _as_b(b)
    fields, _ = fields_at(bv[None, :], coupling, None, gap_tolerance, system)
    return fields[0].sum(axis=0)


_CURL_PAIRS = ((1, 2), (2, 0), (0, 1))  # (d/dy Bz - d/dz By, ...)


def current_density(b, coupling, band, h=1e-4, gap_tolerance=GAP_TOLERANCE, system=None):
    """Synthetic current j = curl B by second-order central differences."""
    bv = _as_b(b)
    stencil = np.repeat(bv[None, :], 6, axis=0)
    for a in range(3):
        stencil[2 * a, a] += h
        stencil[2 * a + 1, a] -= h
    fields, _ = fields_at(stencil, coupling, [band], gap_tolerance, system)
    bfield = fields[:, band - 1, :]  # (6, 3)
    grad = np.stack([(bfield[2 * a] - bfield[2 * a + 1]) / (2.0 * h) for a in range(3)])
    return np.array([grad[i, j] - grad[j, i] for i, j in _CURL_PAIRS])


def divergence(b, coupling, band, h=1e-4, gap_tolerance=GAP_TOLERANCE, system=None):
    """Finite-difference divergence of B (zero away from monopoles)."""
    bv = _as_b(b)
    stencil = np.repeat(bv[None, :], 6, axis=0)
    for a in range(3):
        stencil[2 * a, a] += h
        stencil[2 * a + 1, a] -= h
    fields, _ = fields_at(stencil, coupling, [band], gap_tolerance, system)
    bfield = fields[:, band - 1, :]
    return float(sum((bfield[2 * a, a] - bfield[2 * a + 1, a]) / (2.0 * h) for a in range(3)))


def coulomb_field(b, monopoles):
    """Superposition of point-source fields q * (b - b_mu)/|b - b_mu|^3."""
    bv = _as_b(b)
    total = np.zeros(3)
    for rec in monopoles:
        loc = np.asarray(getattr(rec, "location", rec[0]), dtype=float)
        if hasattr(loc, "b"):
            loc = loc.b
        charge = float(getattr(rec, "charge", rec[1]))
        delta = bv - loc
        dist = np.linalg.norm(delta)
        if dist == 0.0:
            raise ZeroDivisionError("probe point coincides with a monopole")
        total += charge * delta / dist**3
    return total


def monopolar_residual(b, coupling, band, monopoles, gap_tolerance=GAP_TOLERANCE, system=None):
    """B_k(b) minus the pure point-source field of the given monopoles.

    An empty monopole list is accepted (the residual is B itself).
    Nonzero residuals away from all monopoles are the non-monopolar
    texture created by the spin-spin interaction.
    """
    sample = synthetic_field(b, coupling, band, gap_tolerance, system)
    return sample.B - coulomb_field(b, monopoles)


__all__ = [
    "GAP_TOLERANCE",
    "NearDegeneracy",
    "FieldSample",
    "fields_at",
    "synthetic_field",
    "field_sum",
    "current_density",
    "divergence",
    "coulomb_field",
    "monopolar_residual",
]
