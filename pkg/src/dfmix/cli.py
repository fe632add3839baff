"""Command-line interface: ``dfmix spectrum | design | convert``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 no
compensation geometry.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import df_designer as dfd
from .doppler import (ComplexSpectrum, LineShapeError, QuadratureError, average_response,
                      line_metrics, make_grid)
from .dressed_response import df_resonance_omega1, induced_resonance, response
from .propagation import conversion_scan
from .quantum_scheme import DOPPLER_MHZ, FIELD_PRESETS, SCHEME_PRESETS
from .scenario import ConfigError, Scenario, load_scenario, parse_frequency, preset_scenario

log = logging.getLogger("dfmix")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 2, 3, 4
SURFACE_VELOCITIES = 41


class NumericalGuardError(RuntimeError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def _header(fh, params: dict) -> None:
    fh.write("# " + _dump(params) + "\n")


def _f(x) -> str:
    return repr(float(x))


def _load(args) -> Scenario:
    if args.config:
        sc = load_scenario(args.config)
    else:
        sc = preset_scenario(args.preset or "fig1b", args.scheme)
    run = sc.run
    # command-line flags win over [run] entries
    for key in ("omega1_span", "points", "velocity_nodes", "quadrature", "zmax", "nz"):
        val = getattr(args, key, None)
        if val is not None:
            run[key] = val
    for key in ("compare_off", "no_control"):
        if getattr(args, key, False):
            run[key] = True
    if run.get("no_control"):
        sc.fields = sc.fields.without_control()
    if "omega1" in run:
        sc.fields = sc.fields.with_omega1(parse_frequency(run["omega1"], "run.omega1"))
    return sc


def _int(run, key, default, minimum=1):
    val = run.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
        raise ConfigError(f"run.{key}", f"expected an integer, got {val!r}")
    if val < minimum:
        raise ConfigError(f"run.{key}", f"must be >= {minimum}")
    return int(val)


def _grid(sc: Scenario):
    nodes = _int(sc.run, "velocity_nodes", 128, minimum=8)
    kind = sc.run.get("quadrature", "gh")
    if kind not in ("gh", "trap"):
        raise ConfigError("run.quadrature", "must be 'gh' or 'trap'")
    if kind == "trap" and "velocity_nodes" not in sc.run:
        nodes = 8192
    return make_grid(sc.scheme.u, nodes, kind)


def _auto_span(sc: Scenario, center: float) -> float:
    gt, _ = induced_resonance(sc.scheme, sc.fields, center)
    b = dfd.compensation_residual(sc.scheme, sc.fields, center)
    return max(60.0 * gt, 6.0 * abs(b) * DOPPLER_MHZ * sc.scheme.u)


def _metrics(spectrum: ComplexSpectrum, part: str) -> dict:
    try:
        m = line_metrics(spectrum, part)
    except LineShapeError as exc:
        return {"error": str(exc), "peaks_MHz": list(getattr(exc, "peaks", []))}
    return {"peak_position_MHz": m.peak_position, "peak_value": m.peak_value, "hwhm_MHz": m.hwhm}


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalGuardError("non-finite values in computed response")


def cmd_spectrum(sc: Scenario, out: Path) -> dict:
    s, f = sc.scheme, sc.fields
    center = f.omega1 if f.omega1 is not None else df_resonance_omega1(s, f)
    span = sc.run.get("omega1_span", "auto")
    span = _auto_span(sc, center) if span == "auto" else parse_frequency(span, "run.omega1_span")
    if not span > 0:
        raise ConfigError("run.omega1_span", "must be > 0")
    points = _int(sc.run, "points", 500, minimum=3)
    grid = _grid(sc)
    om = np.linspace(center - span / 2, center + span / 2, points)

    chi1, info1 = average_response(s, f, om, "chi1", grid)
    chi4nl, info4 = average_response(s, f, om, "chi4nl", grid)
    chi4nl_sq, info_sq = average_response(s, f, om, "chi4nl_sq", grid)
    _check_finite(chi1, chi4nl, chi4nl_sq)

    # reference: same probe detuning, control field off
    off = f.without_control()
    ref1, _ = average_response(s, off, [center], "chi1", grid)
    ref4, _ = average_response(s, off, [center], "chi4nl", grid)
    ref1, ref4 = ref1[0].real, abs(ref4[0]) ** 2

    params = dict(sc.describe(), command="spectrum", center_MHz=center, span_MHz=span,
                  quadrature=grid.kind, velocity_nodes=grid.n)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "spectrum_averaged.csv", "w", newline="") as fh:
        _header(fh, params)
        w = csv.writer(fh)
        w.writerow(["detuning_MHz", "chi1_re", "chi1_im", "chi1_re_scaled",
                    "chi4nl_re", "chi4nl_im", "chi4nl_abs2", "chi4nl_abs2_scaled",
                    "chi4nl_sq_avg"])
        for row in zip(om, chi1, chi4nl, chi4nl_sq):
            d, c1, c4, c4s = row
            w.writerow([_f(d), _f(c1.real), _f(c1.imag), _f(c1.real / ref1),
                        _f(c4.real), _f(c4.imag), _f(abs(c4) ** 2), _f(abs(c4) ** 2 / ref4),
                        _f(c4s.real)])

    v = np.linspace(-2 * s.u, 2 * s.u, SURFACE_VELOCITIES)
    surf1 = response(s, f, om[:, None], v[None, :], "chi1")
    surf4 = response(s, f, om[:, None], v[None, :], "chi4nl")
    _check_finite(surf1, surf4)
    with open(out / "spectrum_surface.csv", "w", newline="") as fh:
        _header(fh, params)
        w = csv.writer(fh)
        w.writerow(["v_m_per_s", "detuning_MHz", "chi1_re", "chi1_im",
                    "chi4nl_re", "chi4nl_im", "chi4nl_abs2"])
        for j, vj in enumerate(v):
            for i, d in enumerate(om):
                c1, c4 = surf1[i, j], surf4[i, j]
                w.writerow([_f(vj), _f(d), _f(c1.real), _f(c1.imag),
                            _f(c4.real), _f(c4.imag), _f(abs(c4) ** 2)])

    return {
        "command": "spectrum",
        "center_MHz": center,
        "span_MHz": span,
        "control_rabi_MHz": f.g23m,
        "quadrature": {"chi1": info1.quadrature, "chi4nl": info4.quadrature,
                       "chi4nl_sq": info_sq.quadrature},
        "guard_flagged": info1.flagged or info4.flagged or info_sq.flagged,
        "chi1_absorption": _metrics(ComplexSpectrum(om, chi1), "re"),
        "chi4nl_coherent_abs2": _metrics(ComplexSpectrum(om, chi4nl), "abs2"),
        "chi4nl_incoherent": _metrics(ComplexSpectrum(om, chi4nl_sq), "re"),
        "files": ["spectrum_averaged.csv", "spectrum_surface.csv"],
    }


def cmd_design(sc: Scenario, out: Path, refine: bool = True) -> dict:
    fields = sc.fields.with_control(rabi=0.0)
    if sc.run.get("co_propagating"):
        fields = fields.with_control(direction=1)
    report = dfd.design(sc.scheme, fields, refine=refine)
    result = {"command": "design", **report.to_dict()}
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "design.json", "w") as fh:
        fh.write(_dump({"params": sc.describe(), "report": result}) + "\n")
    return result


def cmd_convert(sc: Scenario, out: Path) -> dict:
    zmax = sc.run.get("zmax", 5.0)
    if isinstance(zmax, bool) or not isinstance(zmax, (int, float)) or not zmax >= 0:
        raise ConfigError("run.zmax", f"expected a number >= 0, got {zmax!r}")
    zmax = float(zmax)
    nz = _int(sc.run, "nz", 201, minimum=2)
    grid = _grid(sc)
    runs = {"convert": sc.fields}
    if sc.run.get("compare_off"):
        runs["convert_off"] = sc.fields.without_control()
    out.mkdir(parents=True, exist_ok=True)
    summary = {"command": "convert", "zmax": zmax, "runs": {}}
    for name, fields in runs.items():
        scan = conversion_scan(sc.scheme, fields, None, zmax, nz, grid)
        _check_finite(scan.closed.eta_q, scan.ode.eta_q)
        scan.params = dict(sc.describe(), command="convert", run_name=name,
                           control_rabi_MHz=fields.g23m, omega1_MHz=scan.omega1,
                           zmax=zmax, nz=nz, quadrature=grid.kind, velocity_nodes=grid.n)
        scan.to_csv(out / f"{name}.csv")
        summary["runs"][name] = scan.summary()
    if "convert_off" in runs:
        on, off = summary["runs"]["convert"], summary["runs"]["convert_off"]
        summary["enhancement_ratio"] = (on["max_eta_ode"] / off["max_eta_ode"]
                                        if off["max_eta_ode"] > 0 else math.inf)
        summary["enhancement_ratio_closed"] = (on["max_eta_closed"] / off["max_eta_closed"]
                                               if off["max_eta_closed"] > 0 else math.inf)
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfmix", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(FIELD_PRESETS), help="field preset (default fig1b)")
    src.add_argument("--config", help="scenario file (.toml or .json)")
    common.add_argument("--scheme", default="na2", choices=sorted(SCHEME_PRESETS))
    common.add_argument("--out", default="dfmix_out", help="output directory")
    common.add_argument("--velocity-nodes", type=int, dest="velocity_nodes")
    common.add_argument("--quadrature", choices=("gh", "trap"))

    ps = sub.add_parser("spectrum", parents=[common], help="per-velocity and averaged spectra")
    ps.add_argument("--omega1-span", dest="omega1_span", help="e.g. 2GHz, 300MHz or 'auto'")
    ps.add_argument("--points", type=int)
    ps.add_argument("--no-control", dest="no_control", action="store_true")

    pd = sub.add_parser("design", parents=[common], help="solve for the control Rabi frequency")
    pd.add_argument("--co-propagating", dest="co_propagating", action="store_true",
                    help="request a co-propagating control field")
    pd.add_argument("--no-refine", dest="no_refine", action="store_true")

    pc = sub.add_parser("convert", parents=[common], help="conversion efficiency vs thickness")
    pc.add_argument("--zmax", type=float)
    pc.add_argument("--nz", type=int)
    pc.add_argument("--compare-off", dest="compare_off", action="store_true")
    pc.add_argument("--no-control", dest="no_control", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        sc = _load(args)
        if getattr(args, "co_propagating", False):
            sc.run["co_propagating"] = True
        if args.command == "spectrum":
            result = cmd_spectrum(sc, out)
        elif args.command == "design":
            result = cmd_design(sc, out, refine=not args.no_refine)
        else:
            result = cmd_convert(sc, out)
    except ConfigError as exc:
        print(f"dfmix: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except dfd.InfeasibleGeometry as exc:
        print(f"dfmix: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (QuadratureError, NumericalGuardError, dfd.DesignError, RuntimeError,
            FloatingPointError, ZeroDivisionError) as exc:
        print(f"dfmix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(_dump(result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
