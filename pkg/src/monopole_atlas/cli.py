"""Command-line front end: spectra, field-texture grids, charge censuses.

Subcommands
    spectrum    eigenvalues and gaps along a straight line in b-space
    field-grid  per-band synthetic field vectors on a 2-D plane (CSV/JSON)
    census      monopole records and charge totals for one coupling
    sweep       censuses over a list of DMI tilt angles

Configuration is an INI file (see presets/ for bundled examples) merged
with ``--set section.key=value`` overrides.  CSV holds grids and tables,
JSON holds structured reports under the schema tag "monopole-atlas/1".

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from importlib import resources

import numpy as np

from .berry import GAP_TOLERANCE, NearDegeneracy, fields_at
from .charges import (
    DegeneracyOnSurface,
    MethodDisagreement,
    PlaquettePhaseOverflow,
    Region,
    charge_census,
)
from .eigen import NonHermitianError, _band_gaps, decompose_batch
from .spinops import Coupling, build_hamiltonians

SCHEMA = "monopole-atlas/1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_NUMERICAL_ERRORS = (
    MethodDisagreement,
    DegeneracyOnSurface,
    PlaquettePhaseOverflow,
    NearDegeneracy,
    NonHermitianError,
)

_AXES = {"x": 0, "y": 1, "z": 2}

DEFAULTS = {
    "coupling": {"j": "1.0", "d": "0.3", "theta_deg": "0.0"},
    "spectrum": {"start": "0,0,-3", "stop": "0,0,3", "samples": "601"},
    "grid": {
        "normal": "y",
        "offset": "0.0",
        "min": "-4.0",
        "max": "4.0",
        "resolution": "41",
        "bands": "1,2,3,4",
        "clip": "",
        "gap_tolerance": str(GAP_TOLERANCE),
    },
    "census": {"half_width": "4.0", "n_seeds": "256", "order": "32", "mesh": "24"},
    "sweep": {"angles_deg": "0,45,60,70,80,90"},
    "output": {"format": "csv", "path": "-"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _preset_path(name):
    ref = resources.files(__package__).joinpath("presets", name + ".ini")
    return ref if ref.is_file() else None


def load_config(config=None, overrides=(), seed=None):
    """Merge defaults, an INI file (or preset name), and key=value pairs."""
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    if config is not None:
        preset = _preset_path(config)
        try:
            text = preset.read_text() if preset else open(config).read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config!r}: {exc}") from exc
        try:
            parser.read_string(text, source=config)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.partition(".")
        if not sep or not dot or not section or not option:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), option.strip(), value.strip())
    if seed is not None:
        parser.set("census", "seed", str(seed))
    if not parser.has_option("census", "seed"):
        parser.set("census", "seed", "0")
    return parser


def _floats(text, n=None):
    parts = [p for p in text.replace(",", " ").split() if p]
    values = [float(p) for p in parts]
    if n is not None and len(values) != n:
        raise ConfigError(f"expected {n} numbers, got {text!r}")
    return values


def _coupling(cfg):
    try:
        j = cfg.getfloat("coupling", "j")
        d = cfg.getfloat("coupling", "d")
        theta = cfg.getfloat("coupling", "theta_deg")
    except ValueError as exc:
        raise ConfigError(f"bad coupling: {exc}") from exc
    return Coupling.from_degrees(j, d, theta)


def _bands(text):
    try:
        bands = sorted({int(p) for p in text.replace(",", " ").split()})
    except ValueError as exc:
        raise ConfigError(f"bad band list {text!r}") from exc
    if not bands or any(b not in (1, 2, 3, 4) for b in bands):
        raise ConfigError(f"bands must be within 1..4, got {text!r}")
    return bands


def run_spectrum(cfg):
    """Table of eigenvalues and gaps along a line in b-space."""
    coupling = _coupling(cfg)
    start = np.array(_floats(cfg.get("spectrum", "start"), 3))
    stop = np.array(_floats(cfg.get("spectrum", "stop"), 3))
    samples = cfg.getint("spectrum", "samples")
    if samples < 2:
        raise ConfigError("spectrum.samples must be >= 2")
    ts = np.linspace(0.0, 1.0, samples)
    bs = start[None, :] + ts[:, None] * (stop - start)[None, :]
    energies, _ = decompose_batch(build_hamiltonians(bs, coupling), bs)
    gaps = _band_gaps(energies)
    rows = [
        {
            "bx": float(b[0]), "by": float(b[1]), "bz": float(b[2]),
            "E1": float(e[0]), "E2": float(e[1]), "E3": float(e[2]), "E4": float(e[3]),
            "gap1": float(g[0]), "gap2": float(g[1]),
            "gap3": float(g[2]), "gap4": float(g[3]),
        }
        for b, e, g in zip(bs, energies, gaps)
    ]
    return {
        "schema": SCHEMA,
        "kind": "spectrum",
        "coupling": _coupling_dict(coupling),
        "rows": rows,
    }


def run_field_grid(cfg):
    """Per-band synthetic field vectors on a plane, masked near crossings."""
    coupling = _coupling(cfg)
    normal = cfg.get("grid", "normal").strip().lower()
    if normal not in _AXES:
        raise ConfigError(f"grid.normal must be one of x, y, z; got {normal!r}")
    offset = cfg.getfloat("grid", "offset")
    lo = cfg.getfloat("grid", "min")
    hi = cfg.getfloat("grid", "max")
    res = cfg.getint("grid", "resolution")
    if res < 2:
        raise ConfigError("grid.resolution must be >= 2")
    if not hi > lo:
        raise ConfigError("grid.max must exceed grid.min")
    bands = _bands(cfg.get("grid", "bands"))
    clip_text = cfg.get("grid", "clip").strip()
    clip = float(clip_text) if clip_text else None
    gap_tolerance = cfg.getfloat("grid", "gap_tolerance")

    in_plane = [a for a in range(3) if a != _AXES[normal]]
    u = np.linspace(lo, hi, res)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    bs = np.zeros((res * res, 3))
    bs[:, in_plane[0]] = uu.ravel()
    bs[:, in_plane[1]] = vv.ravel()
    bs[:, _AXES[normal]] = offset

    # Mask before differentiating: points whose band gap closes get no
    # field value at all, so the batched evaluation never sees them.
    energies, _ = decompose_batch(build_hamiltonians(bs, coupling), bs)
    gaps = _band_gaps(energies)
    vectors = np.full((len(bs), 4, 3), np.nan)
    for band in bands:
        keep = gaps[:, band - 1] >= gap_tolerance
        if np.any(keep):
            fields, _ = fields_at(bs[keep], coupling, bands=[band],
                                  gap_tolerance=gap_tolerance)
            vectors[keep, band - 1] = fields[:, band - 1]

    rows = []
    for i, b in enumerate(bs):
        for band in bands:
            min_gap = float(gaps[i, band - 1])
            masked = min_gap < gap_tolerance
            vec = vectors[i, band - 1]
            clipped = bool(clip is not None and not masked
                           and np.linalg.norm(vec) > clip)
            rows.append({
                "bx": float(b[0]), "by": float(b[1]), "bz": float(b[2]),
                "band": band,
                "Bx": None if masked else float(vec[0]),
                "By": None if masked else float(vec[1]),
                "Bz": None if masked else float(vec[2]),
                "min_gap": min_gap,
                "masked": masked,
                "clipped": clipped,
            })
    return {
        "schema": SCHEMA,
        "kind": "field-grid",
        "coupling": _coupling_dict(coupling),
        "plane": {"normal": normal, "offset": offset},
        "clip": clip,
        "rows": rows,
    }


def _coupling_dict(coupling):
    return {"j": coupling.j, "d": coupling.d, "theta_deg": coupling.theta_deg}


def _census_dict(census):
    return {
        "coupling": _coupling_dict(census.coupling),
        "region": {"lo": [float(x) for x in census.region.lo],
                   "hi": [float(x) for x in census.region.hi]},
        "records": [
            {
                "band": int(r.band),
                "location": [float(x) for x in r.location.b],
                "partner_band": int(r.partner_band),
                "charge": float(r.charge),
                "quantized": float(r.quantized),
                "residual": float(r.residual),
                "sphere_radius": float(r.sphere_radius),
                "lattice_charge": float(r.lattice_charge),
            }
            for r in census.records
        ],
        "per_band_total": [float(x) for x in census.per_band_total],
        "character_totals": [float(x) for x in census.character_totals],
        "grand_total": float(census.grand_total),
        "escaped_bands": list(census.escaped_bands),
        "sum_rules": {
            "grand_total_zero": abs(census.grand_total) < 1e-3,
            "all_charges_half_integer": all(r.residual < 1e-3 for r in census.records),
        },
    }


def _run_one_census(cfg, coupling):
    half = cfg.getfloat("census", "half_width")
    if half <= 0:
        raise ConfigError("census.half_width must be positive")
    return charge_census(
        coupling,
        Region.cube(half),
        n_seeds=cfg.getint("census", "n_seeds"),
        seed=cfg.getint("census", "seed"),
        order=cfg.getint("census", "order"),
        mesh=cfg.getint("census", "mesh"),
    )


def run_census(cfg):
    """Monopole census for the configured coupling and region."""
    census = _run_one_census(cfg, _coupling(cfg))
    out = {"schema": SCHEMA, "kind": "census"}
    out.update(_census_dict(census))
    return out


def run_sweep(cfg):
    """One census per DMI tilt angle; failures are reported, not fatal."""
    angles = _floats(cfg.get("sweep", "angles_deg"))
    if not angles:
        raise ConfigError("sweep.angles_deg is empty")
    if any(not 0.0 <= a <= 180.0 for a in angles):
        raise ConfigError("sweep angles must lie in [0, 180] degrees")
    j = cfg.getfloat("coupling", "j")
    d = cfg.getfloat("coupling", "d")
    censuses, errors = [], []
    for angle in angles:
        try:
            census = _run_one_census(cfg, Coupling.from_degrees(j, d, angle))
        except _NUMERICAL_ERRORS as exc:
            errors.append({"theta_deg": angle, "error": type(exc).__name__,
                           "message": str(exc)})
            continue
        entry = {"theta_deg": angle}
        entry.update(_census_dict(census))
        censuses.append(entry)
    summary = {
        "theta_deg": [c["theta_deg"] for c in censuses],
        "per_band_total": [c["per_band_total"] for c in censuses],
        "character_totals": [c["character_totals"] for c in censuses],
        "grand_total": [c["grand_total"] for c in censuses],
    }
    return {
        "schema": SCHEMA,
        "kind": "sweep",
        "coupling": {"j": j, "d": d},
        "censuses": censuses,
        "summary": summary,
        "errors": errors,
    }


def _csv_text(report):
    """Flatten a report's tabular part into CSV with full-precision floats."""
    fieldnames = None
    if report["kind"] in ("spectrum", "field-grid"):
        rows = report["rows"]
    elif report["kind"] == "census":
        rows = [
            {
                "band": r["band"],
                "bx": r["location"][0], "by": r["location"][1], "bz": r["location"][2],
                "partner_band": r["partner_band"],
                "charge": r["charge"],
                "quantized": r["quantized"],
                "residual": r["residual"],
                "sphere_radius": r["sphere_radius"],
                "lattice_charge": r["lattice_charge"],
            }
            for r in report["records"]
        ]
        fieldnames = ["band", "bx", "by", "bz", "partner_band", "charge",
                      "quantized", "residual", "sphere_radius", "lattice_charge"]
    elif report["kind"] == "sweep":
        rows = [
            {
                "theta_deg": c["theta_deg"],
                "total_band1": c["per_band_total"][0],
                "total_band2": c["per_band_total"][1],
                "total_band3": c["per_band_total"][2],
                "total_band4": c["per_band_total"][3],
                "grand_total": c["grand_total"],
            }
            for c in report["censuses"]
        ]
        fieldnames = ["theta_deg", "total_band1", "total_band2", "total_band3",
                      "total_band4", "grand_total"]
    else:  # pragma: no cover - defensive
        raise ConfigError(f"no CSV layout for report kind {report['kind']!r}")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames or list(rows[0].keys()))
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                         for k, v in row.items()})
    return buf.getvalue()


def write_report(report, fmt, path):
    """Serialize a report as CSV or JSON to a file or stdout."""
    if fmt == "json":
        text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    elif fmt == "csv":
        text = _csv_text(report)
    else:
        raise ConfigError(f"output format must be csv or json, got {fmt!r}")
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def load_report(path):
    """Re-parse a JSON report emitted by this tool."""
    with open(path) as fh:
        report = json.load(fh)
    if report.get("schema") != SCHEMA:
        raise ConfigError(f"unrecognized schema in {path!r}")
    return report


_COMMANDS = {
    "spectrum": run_spectrum,
    "field-grid": run_field_grid,
    "census": run_census,
    "sweep": run_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="monopole-atlas",
        description="Synthetic magnetic-field textures and monopole charges "
                    "of a coupled spin pair.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0].lower())
        p.add_argument("--config", help="INI file path or bundled preset name "
                                        "(fig1-theta0, fig1-theta60, fig1-theta90, fig2-sweep)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a config value")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
        p.add_argument("--out", help="output path ('-' for stdout)")
        p.add_argument("--seed", type=int, help="locator seed")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
        fmt = args.format or cfg.get("output", "format")
        path = args.out or cfg.get("output", "path")
        report = _COMMANDS[args.command](cfg)
    except (ConfigError, configparser.Error, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    try:
        write_report(report, fmt, path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
