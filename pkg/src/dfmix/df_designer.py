"""Design of the control field that cancels Doppler shifts of the dressed Raman line.

In the far-detuned limit each power shift |G|^2/P contributes a term linear
in v, so Im P02~ = const - B v with

    B = (|G12|^2/O1^2) k1 + (k1 - k2) + (|G23-|^2/O4m^2) (k1 - k2 + k3-)

(signed wave numbers; k3- < 0 for a counter-propagating control). B is affine
in |G23-|^2 and vanishes for one control intensity when k3- is opposite and
larger than k1 - k2. :func:`solve_control_rabi` finds that intensity
self-consistently; :func:`refine_numeric` then flattens the exact per-velocity
resonance centers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .dressed_response import chi4nl_ratio, df_resonance_omega1, induced_resonance, p_factors
from .quantum_scheme import DOPPLER_MHZ, FieldSet, SchemeConfig

log = logging.getLogger(__name__)


class DesignError(RuntimeError):
    pass


class InfeasibleGeometry(DesignError):
    """No positive control intensity can cancel the Doppler shift."""


@dataclass
class CompensationReport:
    bracket: float            # B, nm^-1 (MHz per m/s after * 1e3)
    solved_rabi: float        # MHz
    self_consistent_detuning: float  # Omega4-, MHz
    center_spread: float      # MHz, over |v| <= 2u unless stated
    iterations: int
    omega1: float = math.nan  # DF resonance, MHz
    gamma02_tilde: float = math.nan
    warnings: list = field(default_factory=list)
    refined_rabi: Optional[float] = None
    refined_spread: Optional[float] = None
    refined_omega1: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _wavevectors(fields: FieldSet):
    return (fields.E1.wavevector, fields.E2.wavevector, fields.E3minus.wavevector)


def validity_warnings(scheme: SchemeConfig, fields: FieldSet, omega1: float) -> list:
    """Far-detuning conditions under which the linear-in-v expansion holds."""
    out = []
    omega4m = omega1 - fields.E2.detuning + fields.E3minus.detuning
    if abs(omega1) <= 5 * scheme.doppler_hwhm("01"):
        out.append(f"|Omega1| = {abs(omega1):.4g} MHz is within 5 Doppler HWHM of transition 01")
    if fields.g23m > 0 and abs(omega4m) <= 5 * scheme.doppler_hwhm("03"):
        out.append(f"|Omega4-| = {abs(omega4m):.4g} MHz is within 5 Doppler HWHM of transition 03")
    return out


def compensation_residual(scheme: SchemeConfig, fields: FieldSet, omega1: float,
                          warnings: Optional[list] = None) -> float:
    """Linear Doppler coefficient B of the dressed two-photon resonance (nm^-1).

    Warnings about the far-detuning validity domain are appended to
    ``warnings`` when a list is passed; B is computed regardless.
    """
    k1, k2, k3m = _wavevectors(fields)
    omega4m = omega1 - fields.E2.detuning + fields.E3minus.detuning
    if warnings is not None:
        warnings.extend(validity_warnings(scheme, fields, omega1))
    s12 = fields.g12 ** 2 / omega1 ** 2 if fields.g12 else 0.0
    s23 = fields.g23m ** 2 / omega4m ** 2 if fields.g23m else 0.0
    return s12 * k1 + (k1 - k2) + s23 * (k1 - k2 + k3m)


def solve_control_rabi(scheme: SchemeConfig, fields: FieldSet, omega1: Optional[float] = None,
                       *, rtol: float = 1e-6, max_iter: int = 50) -> CompensationReport:
    """Control Rabi frequency that zeroes B, iterated with the resonance position.

    Each pass sets |G23-|^2 = O4m^2 [(|G12|^2/O1^2) k1 + (k1 - k2)] / (-(k1 - k2 + k3-))
    and then moves omega1 onto the dressed resonance for that intensity, which
    changes O4m = omega1 - Omega2 + Omega3-. ``omega1`` is only the starting
    point (default: the bare Raman resonance, omega1 = Omega2).
    """
    k1, k2, k3m = _wavevectors(fields)
    slope = -(k1 - k2 + k3m)
    if slope <= 0:
        raise InfeasibleGeometry(
            "no compensation geometry: control wave number must oppose and exceed k1 - k2 "
            f"(k1 - k2 = {k1 - k2:.4g}, k3- = {k3m:.4g} nm^-1)")
    om1 = fields.E2.detuning if omega1 is None else float(omega1)
    g = 0.0
    for it in range(1, max_iter + 1):
        omega4m = om1 - fields.E2.detuning + fields.E3minus.detuning
        need = fields.g12 ** 2 / om1 ** 2 * k1 + (k1 - k2)
        if need <= 0:
            raise InfeasibleGeometry("no compensation geometry: Doppler term has the wrong sign")
        g_new = abs(omega4m) * math.sqrt(need / slope)
        om1 = df_resonance_omega1(scheme, fields.with_control(rabi=g_new))
        if abs(g_new - g) <= rtol * g_new:
            g = g_new
            break
        g = g_new
    else:
        raise DesignError(f"control Rabi frequency did not converge in {max_iter} iterations")

    solved = fields.with_control(rabi=g).with_omega1(om1)
    warnings: list = []
    b = compensation_residual(scheme, solved, om1, warnings)
    gt, _ = induced_resonance(scheme, solved, om1)
    try:
        spread = center_spread(scheme, solved, default_v_samples(scheme), om1)
    except DesignError as exc:
        spread = math.nan
        warnings.append(f"center spread unavailable: {exc}")
    return CompensationReport(
        bracket=b, solved_rabi=g,
        self_consistent_detuning=om1 - fields.E2.detuning + fields.E3minus.detuning,
        center_spread=spread, iterations=it, omega1=om1, gamma02_tilde=gt,
        warnings=warnings)


# -- numeric refinement ----------------------------------------------------

def default_v_samples(scheme: SchemeConfig, n: int = 9, reach: float = 2.0) -> np.ndarray:
    return np.linspace(-reach * scheme.u, reach * scheme.u, n)


def _search_window(scheme: SchemeConfig, fields: FieldSet, omega1: float, vmax: float) -> float:
    b = compensation_residual(scheme, fields, omega1)
    gt, _ = induced_resonance(scheme, fields, omega1)
    return 2.0 * abs(b) * DOPPLER_MHZ * vmax + 20.0 * gt


def resonance_centers(scheme: SchemeConfig, fields: FieldSet, v_samples: Sequence[float],
                      omega1: Optional[float] = None, window: Optional[float] = None,
                      n_grid: int = 801, max_widen: int = 3) -> np.ndarray:
    """Per-velocity probe detuning that maximizes |chi4nl| (MHz).

    A grid scan over ``omega1 +/- window`` picks the best sample for every
    velocity, then a bounded Brent search polishes it to ~1e-6 MHz. The
    window is widened (x4, up to ``max_widen`` times) when a maximum sits on
    its edge.
    """
    v_samples = np.asarray(v_samples, dtype=float)
    if omega1 is None:
        omega1 = df_resonance_omega1(scheme, fields)
    if window is None:
        window = _search_window(scheme, fields, omega1, np.max(np.abs(v_samples)))
    for _ in range(max_widen + 1):
        grid = np.linspace(omega1 - window, omega1 + window, n_grid)
        p = p_factors(scheme, fields, grid[:, None], v_samples[None, :])
        idx = np.argmax(np.abs(chi4nl_ratio(p, fields)), axis=0)
        if np.all((idx > 0) & (idx < n_grid - 1)):
            break
        window *= 4.0
    else:
        v_bad = v_samples[(idx == 0) | (idx == n_grid - 1)]
        raise DesignError(f"resonance for v = {v_bad[0]:.1f} m/s left the search window")
    step = grid[1] - grid[0]
    centers = np.empty(len(v_samples))
    for j, (v, i) in enumerate(zip(v_samples, idx)):
        def mag(om, v=v):
            return abs(chi4nl_ratio(p_factors(scheme, fields, om, v), fields))

        centers[j] = polish_maximum(mag, grid[i] - step, grid[i] + step)
    return centers


def polish_maximum(fn, lo: float, hi: float, xatol: float = 1e-6) -> float:
    """Bounded Brent search for the maximum of a scalar function bracketed by [lo, hi]."""
    res = minimize_scalar(lambda x: -fn(x), bounds=(lo, hi), method="bounded",
                          options={"xatol": xatol})
    return float(res.x)


def center_spread(scheme: SchemeConfig, fields: FieldSet, v_samples: Sequence[float],
                  omega1: Optional[float] = None) -> float:
    c = resonance_centers(scheme, fields, v_samples, omega1)
    return float(np.max(c) - np.min(c))


def refine_numeric(scheme: SchemeConfig, fields: FieldSet,
                   omega1_window: Optional[float] = None,
                   v_samples: Optional[Sequence[float]] = None,
                   *, bracket: float = 0.2, xrtol: float = 1e-4) -> CompensationReport:
    """Minimize the spread of per-velocity resonance centers over |G23-|.

    Starts from ``fields.E3minus.rabi`` (normally the closed-form solution) and
    searches |G23-| within a relative ``bracket`` of it. The probe window
    follows the dressed resonance as the control intensity changes.
    """
    if v_samples is None:
        v_samples = default_v_samples(scheme)
    v_samples = np.asarray(v_samples, dtype=float)
    g0 = fields.g23m
    if not g0 > 0:
        raise DesignError("refinement needs a starting control Rabi frequency")
    lo, hi = (1 - bracket) * g0, (1 + bracket) * g0
    evals = 0

    def spread(g):
        nonlocal evals
        evals += 1
        f = fields.with_control(rabi=g)
        om1 = df_resonance_omega1(scheme, f)
        c = resonance_centers(scheme, f, v_samples, om1, omega1_window)
        return float(np.max(c) - np.min(c))

    res = minimize_scalar(spread, bounds=(lo, hi), method="bounded",
                          options={"xatol": xrtol * g0})
    g = float(res.x)
    if min(g - lo, hi - g) < 2 * xrtol * g0:
        raise DesignError(f"no interior minimum of the center spread in [{lo:.6g}, {hi:.6g}] MHz")
    best = fields.with_control(rabi=g)
    om1 = df_resonance_omega1(scheme, best)
    gt, _ = induced_resonance(scheme, best, om1)
    return CompensationReport(
        bracket=compensation_residual(scheme, best, om1), solved_rabi=g,
        self_consistent_detuning=om1 - fields.E2.detuning + fields.E3minus.detuning,
        center_spread=float(res.fun), iterations=evals, omega1=om1, gamma02_tilde=gt,
        warnings=validity_warnings(scheme, best, om1), refined_rabi=g)


def design(scheme: SchemeConfig, fields: FieldSet, refine: bool = True,
           v_samples: Optional[Sequence[float]] = None) -> CompensationReport:
    """Closed-form solve followed (optionally) by numeric refinement.

    The returned report keeps the closed-form value in ``solved_rabi`` and the
    refined value, when the refinement succeeds, in ``refined_rabi``.
    """
    report = solve_control_rabi(scheme, fields)
    if v_samples is not None:
        f = fields.with_control(rabi=report.solved_rabi)
        report.center_spread = center_spread(scheme, f, v_samples, report.omega1)
    if not refine:
        return report
    try:
        refined = refine_numeric(scheme, fields.with_control(rabi=report.solved_rabi),
                                 v_samples=v_samples)
    except DesignError as exc:
        report.warnings.append(f"numeric refinement failed: {exc}")
        return report
    report.refined_rabi = refined.refined_rabi
    report.refined_spread = refined.center_spread
    report.refined_omega1 = refined.omega1
    return report
