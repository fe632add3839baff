"""Per-velocity susceptibilities dressed by the strong fields E2 and E3-.

All functions broadcast over numpy arrays of probe detuning and velocity, so a
whole (omega1, v) surface is a single call::

    p = p_factors(scheme, fields, omega1[:, None], v[None, :])
    chi = chi4nl_ratio(p, fields)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantum_scheme import DOPPLER_MHZ, FieldSet, SchemeConfig, SchemeError

RESPONSES = ("chi1", "chi4", "chi4nl")


@dataclass(frozen=True)
class PFactors:
    """Complex resonance denominators (MHz) for one or many (omega1, v) points."""

    p01: np.ndarray
    p01m: np.ndarray
    p02: np.ndarray
    p02m: np.ndarray
    p03: np.ndarray
    p03m: np.ndarray
    p02tilde: np.ndarray
    omega4: np.ndarray
    omega4m: np.ndarray
    omega1m: np.ndarray
    gamma01: float
    gamma02: float
    gamma03: float


def _check_widths(scheme: SchemeConfig):
    widths = (scheme.gamma("01"), scheme.gamma02, scheme.gamma("03"))
    if min(widths) <= 0:
        raise SchemeError("homogeneous half-widths must be positive")
    return widths


def p_factors(scheme: SchemeConfig, fields: FieldSet, omega1, v, omega4=None) -> PFactors:
    """Resonance factors P = Gamma + i(detuning - k v) for the dressed scheme.

    The Doppler coefficients are signed wave-number combinations that follow
    each coherence's phase: the 0-2 coherence driven through E3- carries
    k4 - k3-, the 0-3 coherence at omega4- carries k1 - k2 + k3- and the
    back-coupled 0-1 coherence at omega1- carries k4 - k3- + k2. With a
    counter-propagating control (k3- < 0) these become k4 + |k3|,
    k1 - k2 - |k3| and k4 + |k3| + k2.
    """
    g01, g02, g03 = _check_widths(scheme)
    omega1 = np.asarray(omega1, dtype=float)
    v = np.asarray(v, dtype=float)
    if omega4 is None:
        omega4 = fields.omega4(omega1)
    elif not np.allclose(omega4, fields.omega4(omega1), rtol=0, atol=1e-9):
        raise SchemeError("omega4 must equal omega1 - Omega2 + Omega3+")
    omega4 = np.asarray(omega4, dtype=float)

    s1 = fields.E1.wavevector
    s2 = fields.E2.wavevector
    s3m = fields.E3minus.wavevector
    s4 = fields.E4.wavevector
    om2 = fields.E2.detuning
    om3m = fields.E3minus.detuning
    dv = v * DOPPLER_MHZ

    omega4m = omega1 - om2 + om3m
    omega1m = omega4 - om3m + om2

    p01 = g01 + 1j * (omega1 - s1 * dv)
    p01m = g01 + 1j * (omega1m - (s4 - s3m + s2) * dv)
    p02 = g02 + 1j * (omega1 - om2 - (s1 - s2) * dv)
    p02m = g02 + 1j * (omega4 - om3m - (s4 - s3m) * dv)
    p03 = g03 + 1j * (omega4 - s4 * dv)
    p03m = g03 + 1j * (omega4m - (s1 - s2 + s3m) * dv)
    p02tilde = p02 + fields.g12 ** 2 / p01 + fields.g23m ** 2 / p03m
    return PFactors(p01, p01m, p02, p02m, p03, p03m, p02tilde,
                    omega4, omega4m, omega1m, g01, g02, g03)


def chi1_ratio(p: PFactors, fields: FieldSet):
    """Dressed probe susceptibility normalized to its fields-off resonant value."""
    g23m2 = fields.g23m ** 2
    return p.gamma01 * (p.p03m * p.p02 + g23m2) / (p.p01 * p.p03m * p.p02tilde)


def chi4_ratio(p: PFactors, fields: FieldSet):
    """Dressed linear susceptibility at the generated frequency, normalized."""
    g12s = fields.g12 ** 2
    g23m2 = fields.g23m ** 2
    brace = p.p02m + g23m2 / p.p03 + g12s / p.p01m
    return (p.gamma03 / p.p03) * (p.p01m * p.p02m + g12s) / (p.p01m * brace)


def fwm_denominator(p: PFactors, fields: FieldSet):
    """P01 * P02~ * (P03 + |G23-|^2 / P02-), the resonant part of chi^(3)."""
    return p.p01 * p.p02tilde * (p.p03 + fields.g23m ** 2 / p.p02m)


def chi4nl_ratio(p: PFactors, fields: FieldSet):
    """Nonlinear FWM susceptibility divided by its fields-off, resonant, v = 0 value."""
    return p.gamma01 * p.gamma02 * p.gamma03 / fwm_denominator(p, fields)


_CHI = {"chi1": chi1_ratio, "chi4": chi4_ratio, "chi4nl": chi4nl_ratio}


def response(scheme: SchemeConfig, fields: FieldSet, omega1, v, which: str = "chi4nl"):
    """Evaluate one of ``chi1``, ``chi4``, ``chi4nl`` on broadcast (omega1, v)."""
    try:
        fn = _CHI[which]
    except KeyError:
        raise ValueError(f"unknown response {which!r}; expected one of {RESPONSES}") from None
    return fn(p_factors(scheme, fields, omega1, v), fields)


def _stark_terms(scheme: SchemeConfig, fields: FieldSet, omega1: float) -> complex:
    p = p_factors(scheme, fields, omega1, 0.0)
    return complex(fields.g12 ** 2 / p.p01 + fields.g23m ** 2 / p.p03m)


def induced_resonance(scheme: SchemeConfig, fields: FieldSet, omega1_hint=None):
    """Half-width and position of the dressed two-photon resonance at v = 0.

    Returns ``(gamma02_tilde, omega02_tilde)`` in MHz, evaluated at
    ``omega1_hint`` (default: the Doppler-free resonance itself, where
    ``omega02_tilde`` vanishes).
    """
    if omega1_hint is None:
        omega1_hint = df_resonance_omega1(scheme, fields)
    s = _stark_terms(scheme, fields, float(omega1_hint))
    gamma_t = scheme.gamma02 + s.real
    omega_t = (omega1_hint - fields.E2.detuning) + s.imag
    return gamma_t, omega_t


def df_resonance_omega1(scheme: SchemeConfig, fields: FieldSet, *,
                        tol: float = 1e-9, max_iter: int = 500) -> float:
    """Probe detuning that puts v = 0 atoms on the dressed two-photon resonance.

    Solves Im P02~(omega1, v=0) = 0 by fixed-point iteration on the power shift
    x = omega1 - Omega2, starting from the bare Raman resonance x = 0. This
    selects the branch continuously connected to the undressed line.
    """
    om2 = fields.E2.detuning
    x = 0.0
    for _ in range(max_iter):
        x_new = -_stark_terms(scheme, fields, om2 + x).imag
        if abs(x_new - x) <= tol * max(1.0, abs(x_new)):
            return om2 + x_new
        x = x_new
    raise RuntimeError("dressed resonance position did not converge")
