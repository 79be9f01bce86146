"""Monopole location, charge integration, and census bookkeeping."""

import numpy as np
import pytest

from monopole_atlas.charges import (
    DegeneracyOnSurface,
    PlaquettePhaseOverflow,
    Region,
    flux_charge,
    lattice_charge,
    locate_degeneracies,
    quantize,
)

from conftest import BOX, ISING_ONLY, THETA0, THETA90, ZEEMAN


def located(coupling, pair, **kw):
    return [p.b for p in locate_degeneracies(coupling, pair, BOX, **kw)]


# ---------------------------------------------------------------- quantize

def test_quantize_rounding():
    assert quantize(0.4999) == (0.5, pytest.approx(1e-4))
    assert quantize(-1.0006) == (-1.0, pytest.approx(6e-4))


def test_quantize_tie_breaks_to_even_doubled_charge():
    half, resid = quantize(0.25)
    assert half == 0.0 and resid == 0.25
    half, resid = quantize(0.75)
    assert half == 1.0 and resid == 0.25


# ---------------------------------------------------------------- region

def test_region_cube_and_contains():
    r = Region.cube(2.0)
    assert r.contains(np.array([1.9, -1.9, 0.0]))
    assert not r.contains(np.array([2.1, 0.0, 0.0]))


# ----------------------------------------------------------- flux_charge

def test_flux_charge_zeeman_origin():
    assert flux_charge(np.zeros(3), 0.5, ZEEMAN, 1) == pytest.approx(1.0, abs=1e-6)
    assert flux_charge(np.zeros(3), 0.5, ZEEMAN, 4) == pytest.approx(-1.0, abs=1e-6)


def test_flux_charge_ising_origin_unit_charges():
    assert flux_charge(np.zeros(3), 0.5, ISING_ONLY, 3) == pytest.approx(1.0, abs=1e-6)
    assert flux_charge(np.zeros(3), 0.5, ISING_ONLY, 4) == pytest.approx(-1.0, abs=1e-6)


def test_flux_charge_ising_triple_point_half_charges():
    center = np.array([0.0, 0.0, 2.0])
    assert flux_charge(center, 0.3, ISING_ONLY, 1) == pytest.approx(0.5, abs=1e-6)
    assert flux_charge(center, 0.3, ISING_ONLY, 3) == pytest.approx(-0.5, abs=1e-6)


def test_flux_charge_perpendicular_dmi_half_charge():
    center = np.array([0.6, 0.0, 0.0])
    assert flux_charge(center, 0.2, THETA90, 3) == pytest.approx(0.5, abs=1e-6)


def test_flux_radius_independence():
    a = flux_charge(np.zeros(3), 0.3, ISING_ONLY, 3)
    b = flux_charge(np.zeros(3), 0.5, ISING_ONLY, 3)
    assert abs(a - b) < 1e-6


def test_flux_empty_sphere_is_chargeless():
    q = flux_charge(np.array([2.0, 2.0, 2.0]), 0.4, THETA0, 2)
    assert abs(q) < 1e-9


def test_flux_degeneracy_on_surface_detected():
    # An absurdly large gap tolerance classifies every sphere point as
    # degenerate; the guard must fire rather than integrate garbage.
    with pytest.raises(DegeneracyOnSurface):
        flux_charge(np.zeros(3), 0.5, ZEEMAN, 1, gap_tolerance=10.0)


# --------------------------------------------------------- lattice_charge

def test_lattice_matches_flux_at_outer_crossing():
    center = np.array([0.0, 0.0, 2.6])
    for band, expected in ((1, 0.5), (2, -0.5)):
        ql = lattice_charge(center, 0.4, THETA0, band)
        qf = flux_charge(center, 0.4, THETA0, band)
        assert ql == pytest.approx(expected, abs=1e-6)
        assert abs(ql - qf) < 1e-6


def test_lattice_zeeman_reference_charges():
    # Ascending band 4 is the M = +1 state: charge -M = -1.
    assert lattice_charge(np.zeros(3), 0.5, ZEEMAN, 4) == pytest.approx(-1.0, abs=1e-9)
    assert lattice_charge(np.zeros(3), 0.5, ZEEMAN, 1) == pytest.approx(1.0, abs=1e-9)


def test_lattice_empty_sphere_is_chargeless():
    q = lattice_charge(np.array([2.0, 2.0, 2.0]), 0.4, THETA0, 2)
    assert abs(q) < 1e-9


def test_lattice_coarse_mesh_overflows():
    with pytest.raises(PlaquettePhaseOverflow):
        lattice_charge(np.zeros(3), 0.5, ZEEMAN, 1, mesh=2)


# ------------------------------------------------------ locate_degeneracies

def test_locator_rejects_bad_inputs():
    with pytest.raises(ValueError):
        locate_degeneracies(THETA0, (1, 3), BOX)
    with pytest.raises(ValueError):
        locate_degeneracies(THETA0, (1, 2), BOX, n_seeds=0)


def test_locator_zeeman_origin_only():
    for pair in ((1, 2), (2, 3), (3, 4)):
        points = located(ZEEMAN, pair, n_seeds=64)
        assert len(points) == 1
        assert np.linalg.norm(points[0]) < 1e-6


def test_locator_axial_dmi_crossings():
    expected = {(1, 2): {-2.6, 2.6}, (2, 3): {-1.4, 1.4}, (3, 4): {0.0}}
    for pair, zs in expected.items():
        points = located(THETA0, pair)
        assert len(points) == len(zs)
        for p in points:
            assert abs(p[0]) < 1e-6 and abs(p[1]) < 1e-6
            assert min(abs(p[2] - z) for z in zs) < 1e-6


def test_locator_perpendicular_dmi_crossings():
    for pair in ((1, 2), (3, 4)):
        points = located(THETA90, pair)
        assert len(points) == 2
        for p in points:
            assert min(np.linalg.norm(p - e) for e in
                       (np.array([0.6, 0, 0]), np.array([-0.6, 0, 0]))) < 1e-6
    # The remaining pair's crossings sit at infinity for this angle.
    assert located(THETA90, (2, 3)) == []


def test_locator_ignores_chargeless_degenerate_line():
    # At D=0 the decoupled singlet crosses the triplet-0 band along
    # whole segments of the b_z axis; only the charged endpoints of
    # those segments are monopoles.
    points = located(ISING_ONLY, (1, 2))
    zs = sorted(round(float(p[2]), 6) for p in points)
    assert zs == [-2.0, 2.0]
    points = located(ISING_ONLY, (3, 4))
    assert len(points) == 1 and np.linalg.norm(points[0]) < 1e-6


def test_locator_finds_triple_points_behind_degenerate_ray():
    points = located(ISING_ONLY, (2, 3))
    zs = sorted(round(float(p[2]), 6) for p in points)
    assert zs == [-2.0, 2.0]


# ------------------------------------------------------------- census

def test_census_ising_charge_table(census_ising):
    by_loc = {}
    for rec in census_ising.records:
        key = round(float(rec.location.b[2]), 6)
        by_loc.setdefault(key, []).append(rec.quantized)
    assert sorted(by_loc) == [-2.0, 0.0, 2.0]
    assert sorted(by_loc[0.0]) == [-1.0, 1.0]
    assert sorted(by_loc[2.0]) == [-0.5, 0.5]
    assert sorted(by_loc[-2.0]) == [-0.5, 0.5]
    assert census_ising.per_band_total == (1.0, 0.0, 0.0, -1.0)
    assert census_ising.grand_total == 0.0
    assert census_ising.escaped_bands == ()


def test_census_records_have_opposite_partners(census_theta60):
    recs = {(r.band, tuple(np.round(r.location.b, 6))): r
            for r in census_theta60.records}
    for (band, loc), rec in recs.items():
        partner = recs[(rec.partner_band, loc)]
        assert partner.quantized == -rec.quantized
        assert partner.partner_band == band


def test_census_locations_lie_in_mirror_plane(census_theta60):
    for rec in census_theta60.records:
        assert abs(rec.location.b[1]) < 1e-6


def test_census_charges_are_quantized_and_cross_checked(census_theta60):
    for rec in census_theta60.records:
        assert rec.residual < 1e-3
        assert abs(rec.charge - rec.lattice_charge) < 1e-3
        assert abs(rec.quantized) >= 0.5


def test_census_escape_flag_at_perpendicular_dmi(census_theta90):
    assert census_theta90.per_band_total == (1.0, -1.0, 1.0, -1.0)
    assert census_theta90.escaped_bands == (2, 3)
    assert census_theta90.grand_total == 0.0
