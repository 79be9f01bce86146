"""Operator algebra and Hamiltonian assembly."""

import math

import numpy as np
import pytest

from monopole_atlas.spinops import (
    Coupling,
    FieldPoint,
    build_hamiltonian,
    build_hamiltonians,
    build_spin_system,
    interaction_matrix,
    site_spin_operators,
)

from conftest import THETA0, ZEEMAN


def test_single_site_operators_satisfy_su2_algebra():
    (sx, sy, sz), = site_spin_operators(1)
    assert np.allclose(sx @ sy - sy @ sx, 1j * sz)
    assert np.allclose(sy @ sz - sz @ sy, 1j * sx)
    for s in (sx, sy, sz):
        assert np.allclose(s @ s, 0.25 * np.eye(2))


def test_two_site_operators_commute_between_sites():
    s1, s2 = site_spin_operators(2)
    for a in range(3):
        for b in range(3):
            comm = s1[a] @ s2[b] - s2[b] @ s1[a]
            assert np.max(np.abs(comm)) < 1e-14


def test_total_spin_is_sum_of_sites():
    sys = build_spin_system()
    for a in range(3):
        assert np.allclose(sys.S[a], sys.s1[a] + sys.s2[a])


def test_spin_operators_are_read_only():
    sys = build_spin_system()
    with pytest.raises(ValueError):
        sys.S[2][0, 0] = 99.0


def test_zeeman_hamiltonian_is_diagonal_along_z():
    h = build_hamiltonian(np.array([0.0, 0.0, 2.0]), ZEEMAN)
    assert np.allclose(h, np.diag([2.0, 0.0, 0.0, -2.0]))


def test_hamiltonian_is_hermitian_at_random_points():
    rng = np.random.default_rng(7)
    coupling = Coupling.from_degrees(0.7, 0.4, 33.0)
    for _ in range(20):
        b = rng.normal(size=3) * 3.0
        h = build_hamiltonian(b, coupling)
        assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_interaction_spectrum_at_zero_field():
    # J=1, D=0.3, theta=0: mixed singlet/triplet-0 pair at -J +- 2D,
    # polarized triplets at +J.
    h = build_hamiltonian(np.zeros(3), THETA0)
    evals = np.linalg.eigvalsh(h)
    assert np.allclose(evals, [-1.6, -0.4, 1.0, 1.0], atol=1e-12)


def test_interaction_matrix_traceless():
    coupling = Coupling.from_degrees(0.9, 0.2, 75.0)
    assert abs(np.trace(interaction_matrix(coupling))) < 1e-14


def test_dmi_vector_tilts_in_xz_plane():
    c = Coupling.from_degrees(1.0, 0.5, 30.0)
    assert c.dmi_vector[1] == 0.0
    assert math.isclose(c.dmi_vector[0], 0.25)
    assert math.isclose(c.dmi_vector[2], 0.25 * math.sqrt(3.0))
    assert math.isclose(c.theta_deg, 30.0)


def test_free_coupling_flag():
    assert ZEEMAN.is_free
    assert not THETA0.is_free


def test_batched_assembly_matches_single():
    rng = np.random.default_rng(3)
    bs = rng.normal(size=(10, 3))
    hs = build_hamiltonians(bs, THETA0)
    for b, h in zip(bs, hs):
        assert np.allclose(h, build_hamiltonian(b, THETA0))


def test_field_point_validation():
    with pytest.raises(ValueError):
        FieldPoint(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        FieldPoint(np.array([np.inf, 0.0, 0.0]))
    p = FieldPoint(np.array([3.0, 0.0, 4.0]))
    assert p.norm == 5.0
    assert np.allclose(p.direction, [0.6, 0.0, 0.8])
    with pytest.raises(ZeroDivisionError):
        FieldPoint(np.zeros(3)).direction
