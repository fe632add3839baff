"""Level scheme, field configuration and the Na2 presets.

Unit conventions used throughout the package:

* detunings, homogeneous half-widths and Rabi frequencies are ordinary
  frequencies in MHz;
* wavelengths are in nm and wave numbers are inverse wavelengths in nm^-1;
* velocities are in m/s.

The Doppler shift of a wave with signed inverse wavelength ``k`` seen by an
atom moving at ``v`` is ``k * v * DOPPLER_MHZ`` (MHz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Mapping, Optional

DOPPLER_MHZ = 1e3  # (m/s) * (1/nm) -> MHz
SQRT_LN2 = math.sqrt(math.log(2.0))

TRANSITION_LABELS = ("01", "12", "23", "03")
FIELD_ROLES = ("E1", "E2", "E3plus", "E3minus", "E4")

# Na2 model constants (wavelength nm, half-width MHz, Doppler HWHM MHz)
NA2_WAVELENGTHS = {"01": 661.0, "12": 746.0, "23": 514.0, "03": 473.0}
NA2_GAMMAS = {"01": 20.69, "12": 23.08, "23": 18.30, "03": 15.92}
NA2_DOPPLER_HWHM = {"01": 678.0, "12": 601.0, "23": 873.0, "03": 948.0}


class SchemeError(ValueError):
    """Invalid scheme or field parameters."""


def doppler_hwhm(u: float, wavelength: float) -> float:
    """Doppler HWHM (MHz) of a line at ``wavelength`` nm for thermal velocity ``u``."""
    return u / wavelength * DOPPLER_MHZ * SQRT_LN2


def thermal_velocity(hwhm: float, wavelength: float) -> float:
    """Inverse of :func:`doppler_hwhm`: most-probable speed in m/s."""
    return hwhm * wavelength / (DOPPLER_MHZ * SQRT_LN2)


def derive_gamma02(gammas: Mapping[str, float]) -> float:
    """Half-width of the 0-2 Raman coherence.

    With Gamma_ij = (g_i + g_j)/2 and a non-decaying ground level, the
    01, 23 and 03 widths fix the level rates and Gamma_02 = Gamma_23 - Gamma_03.
    """
    return gammas["23"] - gammas["03"]


@dataclass(frozen=True)
class Transition:
    label: str
    wavelength: float
    gamma: float

    def __post_init__(self):
        if self.label not in TRANSITION_LABELS:
            raise SchemeError(f"unknown transition label {self.label!r}")
        if not self.wavelength > 0:
            raise SchemeError(f"transition {self.label}: wavelength must be > 0")
        if not self.gamma > 0:
            raise SchemeError(f"transition {self.label}: gamma must be > 0")

    def doppler_hwhm(self, u: float) -> float:
        return doppler_hwhm(u, self.wavelength)


@dataclass(frozen=True)
class SchemeConfig:
    """The four-level medium.

    ``alpha01`` is only the unit of optical thickness; ``dipole_ratio_sq`` is
    |d03|^2/|d01|^2 and sets alpha04 relative to alpha01.
    """

    transitions: Dict[str, Transition]
    u: float
    gamma02: float
    dipole_ratio_sq: float = 1.0
    alpha01: float = 1.0

    def __post_init__(self):
        missing = set(TRANSITION_LABELS) - set(self.transitions)
        if missing:
            raise SchemeError(f"missing transitions: {sorted(missing)}")
        for name in ("u", "gamma02", "dipole_ratio_sq", "alpha01"):
            if not getattr(self, name) > 0:
                raise SchemeError(f"{name} must be > 0")

    def gamma(self, label: str) -> float:
        return self.transitions[label].gamma

    def wavelength(self, label: str) -> float:
        return self.transitions[label].wavelength

    def doppler_hwhm(self, label: str) -> float:
        return self.transitions[label].doppler_hwhm(self.u)

    @property
    def generated_inv_wavelength(self) -> float:
        """1/lambda of the generated wave from frequency conservation (not from lambda03)."""
        return (1.0 / self.wavelength("01") - 1.0 / self.wavelength("12")
                + 1.0 / self.wavelength("23"))

    def replace(self, **changes) -> "SchemeConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "transitions": {k: {"wavelength": t.wavelength, "gamma": t.gamma}
                            for k, t in self.transitions.items()},
            "u": self.u,
            "gamma02": self.gamma02,
            "dipole_ratio_sq": self.dipole_ratio_sq,
            "alpha01": self.alpha01,
        }


@dataclass(frozen=True)
class Field:
    """One wave: Rabi frequency (MHz), detuning (MHz), propagation sign, 1/lambda (nm^-1).

    ``detuning`` may be ``None`` for E1 (chosen later by a scan or the designer)
    and is always ``None`` for E4, whose detuning follows from the others.
    """

    role: str
    rabi: float = 0.0
    detuning: Optional[float] = 0.0
    direction: int = 1
    inv_wavelength: float = 0.0

    def __post_init__(self):
        if self.role not in FIELD_ROLES:
            raise SchemeError(f"unknown field role {self.role!r}")
        if self.rabi < 0:
            raise SchemeError(f"{self.role}: rabi must be >= 0")
        if self.direction not in (1, -1):
            raise SchemeError(f"{self.role}: direction must be +1 or -1")
        if not self.inv_wavelength > 0:
            raise SchemeError(f"{self.role}: inv_wavelength must be > 0")

    @property
    def wavevector(self) -> float:
        """Signed inverse wavelength along z."""
        return self.direction * self.inv_wavelength


@dataclass(frozen=True)
class FieldSet:
    E1: Field
    E2: Field
    E3plus: Field
    E3minus: Field
    E4: Field = field(default=None)

    def __post_init__(self):
        if self.E4 is None:
            k4 = self.E1.wavevector - self.E2.wavevector + self.E3plus.wavevector
            object.__setattr__(self, "E4", Field("E4", 0.0, None, 1, abs(k4)))

    @classmethod
    def from_scheme(cls, scheme: SchemeConfig, *, g12: float, g23p: float,
                    g23m: float, omega2: float, omega3p: float, omega3m: float,
                    omega1: Optional[float] = None,
                    control_direction: int = -1) -> "FieldSet":
        k1 = 1.0 / scheme.wavelength("01")
        k2 = 1.0 / scheme.wavelength("12")
        k3 = 1.0 / scheme.wavelength("23")
        return cls(
            E1=Field("E1", 0.0, omega1, 1, k1),
            E2=Field("E2", g12, omega2, 1, k2),
            E3plus=Field("E3plus", g23p, omega3p, 1, k3),
            E3minus=Field("E3minus", g23m, omega3m, control_direction, k3),
            E4=Field("E4", 0.0, None, 1, scheme.generated_inv_wavelength),
        )

    # the susceptibility formulas use these names
    @property
    def g12(self) -> float:
        return self.E2.rabi

    @property
    def g23p(self) -> float:
        return self.E3plus.rabi

    @property
    def g23m(self) -> float:
        return self.E3minus.rabi

    @property
    def omega1(self) -> Optional[float]:
        return self.E1.detuning

    def omega4(self, omega1):
        """Generated-wave detuning, omega1 - Omega2 + Omega3+."""
        return omega1 - self.E2.detuning + self.E3plus.detuning

    def with_omega1(self, omega1: float) -> "FieldSet":
        return replace(self, E1=replace(self.E1, detuning=float(omega1)))

    def with_control(self, rabi: Optional[float] = None,
                     direction: Optional[int] = None) -> "FieldSet":
        e3m = self.E3minus
        if rabi is not None:
            e3m = replace(e3m, rabi=float(rabi))
        if direction is not None:
            e3m = replace(e3m, direction=int(direction))
        return replace(self, E3minus=e3m)

    def without_control(self) -> "FieldSet":
        return self.with_control(rabi=0.0)

    def strong_fields_off(self) -> "FieldSet":
        return replace(self, E2=replace(self.E2, rabi=0.0),
                       E3minus=replace(self.E3minus, rabi=0.0))

    def to_dict(self) -> dict:
        return {role: {"rabi": f.rabi, "detuning": f.detuning,
                       "direction": f.direction,
                       "inv_wavelength": f.inv_wavelength}
                for role, f in ((r, getattr(self, r)) for r in FIELD_ROLES)}


def sodium_preset() -> SchemeConfig:
    """Na2 four-level model; u from the 01 Doppler width, Gamma_02 from the level rates."""
    transitions = {label: Transition(label, NA2_WAVELENGTHS[label], NA2_GAMMAS[label])
                   for label in TRANSITION_LABELS}
    return SchemeConfig(
        transitions=transitions,
        u=thermal_velocity(NA2_DOPPLER_HWHM["01"], NA2_WAVELENGTHS["01"]),
        gamma02=derive_gamma02(NA2_GAMMAS),
        dipole_ratio_sq=1.0,
        alpha01=1.0,
    )


def fig1b_fields(scheme: SchemeConfig) -> FieldSet:
    """Far-detuned configuration with a 25.2 GHz control field."""
    return FieldSet.from_scheme(scheme, g12=128.5, g23p=5.78, g23m=25.2e3,
                                omega2=92.3e3, omega3p=-7.3e3, omega3m=73.2e3)


def fig1c_fields(scheme: SchemeConfig) -> FieldSet:
    """Near-resonant configuration with a 635.8 MHz control field."""
    return FieldSet.from_scheme(scheme, g12=74.2, g23p=5.78, g23m=635.8,
                                omega2=2.3e3, omega3p=-1.96e3, omega3m=1.83e3)


def fig1c_inset_fields(scheme: SchemeConfig) -> FieldSet:
    """Strong E2 alone (G12 = 742.2 MHz), no control field, Omega3+ = 0."""
    return FieldSet.from_scheme(scheme, g12=742.2, g23p=5.78, g23m=0.0,
                                omega2=2.3e3, omega3p=0.0, omega3m=1.83e3)


SCHEME_PRESETS: Dict[str, Callable[[], SchemeConfig]] = {"na2": sodium_preset}
FIELD_PRESETS: Dict[str, Callable[[SchemeConfig], FieldSet]] = {
    "fig1b": fig1b_fields,
    "fig1c": fig1c_fields,
    "fig1c-inset": fig1c_inset_fields,
}
