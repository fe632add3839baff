"""Maxwell velocity averaging and lineshape metrics.

The default quadrature is Gauss-Hermite on the most-probable-speed Maxwell
weight W(v) = exp(-v^2/u^2) / (sqrt(pi) u). Dressed resonances that are
narrow in velocity defeat any fixed Gauss-Hermite rule, so
:func:`average_response` checks every spectrum and, when a narrow feature is
detected, re-evaluates it with adaptive Gauss-Kronrod quadrature. The uniform
trapezoid grid is kept as an independent oracle for tests.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import roots_hermite, wofz

from .dressed_response import RESPONSES, p_factors, response
from .quantum_scheme import DOPPLER_MHZ, FieldSet, SchemeConfig

log = logging.getLogger(__name__)

GH = "gauss-hermite"
TRAP = "adaptive-trapezoid"
ADAPTIVE = "adaptive-gauss-kronrod"
_KIND_ALIASES = {"gh": GH, GH: GH, "trap": TRAP, "trapezoid": TRAP, TRAP: TRAP}

SPECTRUM_KINDS = RESPONSES + ("chi4nl_sq",)
TRAP_HALF_SPAN = 5.0  # in units of u
CONVERGENCE_RTOL = 1e-8
ADAPTIVE_RTOL = 1e-11
_CHUNK = 1 << 20  # complex samples evaluated per block


class QuadratureError(RuntimeError):
    """Velocity average could not be computed to the requested accuracy."""


class LineShapeError(ValueError):
    """Spectrum does not have a single interior peak."""


class MultiModalError(LineShapeError):
    def __init__(self, peaks):
        self.peaks = [float(p) for p in peaks]
        super().__init__(f"{len(self.peaks)} peaks above half of the global maximum "
                         f"at {[round(p, 3) for p in self.peaks]}")


@dataclass(frozen=True)
class VelocityGrid:
    nodes: np.ndarray
    weights: np.ndarray
    u: float
    kind: str

    @property
    def n(self) -> int:
        return len(self.nodes)


def maxwell_weight(v, u: float):
    v = np.asarray(v, dtype=float)
    return np.exp(-(v / u) ** 2) / (np.sqrt(np.pi) * u)


def make_grid(u: float, n: int = 128, kind: str = GH) -> VelocityGrid:
    """Quadrature nodes and weights with the Maxwell weight folded in.

    ``kind`` is ``"gauss-hermite"`` (alias ``"gh"``) or
    ``"adaptive-trapezoid"`` (alias ``"trap"``): uniform nodes on
    [-5u, 5u] with explicit W(v) weights, renormalized to absorb the
    ~1.5e-12 truncated tail mass.
    """
    if n < 8:
        raise ValueError(f"grid needs at least 8 nodes, got {n}")
    if not u > 0:
        raise ValueError("thermal velocity must be > 0")
    try:
        kind = _KIND_ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown quadrature kind {kind!r}") from None
    if kind == GH:
        # scipy stays finite past n ~ 300, where numpy's hermgauss overflows
        x, w = roots_hermite(n)
        nodes, weights = u * x, w / np.sqrt(np.pi)
    else:
        nodes = np.linspace(-TRAP_HALF_SPAN * u, TRAP_HALF_SPAN * u, n)
        weights = maxwell_weight(nodes, u) * (nodes[1] - nodes[0])
        weights[[0, -1]] *= 0.5
    weights = weights / weights.sum()
    return VelocityGrid(nodes, weights, float(u), kind)


def velocity_average(grid: VelocityGrid, f: Callable[[np.ndarray], np.ndarray]):
    """Sum of weights * f(nodes) over the last axis.

    ``f`` receives the node array and may return any array whose last axis
    runs over the nodes.
    """
    values = np.asarray(f(grid.nodes))
    return np.sum(values * grid.weights, axis=-1)


# -- spectra ---------------------------------------------------------------

@dataclass
class ComplexSpectrum:
    detunings: np.ndarray
    values: np.ndarray
    label: str = ""
    quadrature: str = GH
    flagged: bool = False

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.detunings.shape != self.values.shape or self.detunings.ndim != 1:
            raise ValueError("detunings and values must be 1-D and of equal length")
        if np.any(np.diff(self.detunings) <= 0):
            raise ValueError("detunings must be strictly increasing")

    @property
    def abs2(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def to_csv(self, path, header: Optional[str] = None) -> None:
        """Write ``detuning_MHz, re, im, abs2`` rows, optionally after a ``#`` header line."""
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["detuning_MHz", "re", "im", "abs2"])
            for d, z, a in zip(self.detunings, self.values, self.abs2):
                w.writerow([repr(float(d)), repr(float(z.real)), repr(float(z.imag)), repr(float(a))])


def _integrand(scheme, fields, omega1, v, which):
    if which == "chi4nl_sq":
        return np.abs(response(scheme, fields, omega1, v, "chi4nl")) ** 2
    return response(scheme, fields, omega1, v, which)


def _grid_average(scheme, fields, omega1, which, grid):
    omega1 = np.atleast_1d(np.asarray(omega1, dtype=float))
    out = np.empty(omega1.shape, dtype=complex)
    step = max(1, _CHUNK // grid.n)
    for i in range(0, len(omega1), step):
        block = omega1[i:i + step]
        vals = _integrand(scheme, fields, block[:, None], grid.nodes[None, :], which)
        out[i:i + step] = np.sum(vals * grid.weights, axis=-1)
    return out


def narrow_features(scheme: SchemeConfig, fields: FieldSet, omega1, which: str = "chi4nl"):
    """Centers and widths (m/s) of the per-velocity resonances that matter for ``which``.

    Covers the probe line (P01), the dressed two-photon line (P02~, linearized
    in v) and, without a control field, the generated-wave line (P03).
    Returns an array of shape (n_features, len(omega1), 2).
    """
    omega1 = np.atleast_1d(np.asarray(omega1, dtype=float))
    feats = []
    k1 = fields.E1.wavevector * DOPPLER_MHZ
    if which in ("chi1", "chi4nl", "chi4nl_sq"):
        feats.append((omega1 / k1, np.full_like(omega1, scheme.gamma("01") / abs(k1))))
        h = 1e-3 * scheme.u
        p0 = p_factors(scheme, fields, omega1, 0.0).p02tilde
        slope = (p_factors(scheme, fields, omega1, h).p02tilde.imag
                 - p_factors(scheme, fields, omega1, -h).p02tilde.imag) / (2 * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(slope == 0, np.nan, slope)
            feats.append((-p0.imag / slope, np.abs(p0.real / slope)))
    if which in ("chi4", "chi4nl", "chi4nl_sq") and fields.g23m == 0:
        k4 = fields.E4.wavevector * DOPPLER_MHZ
        feats.append((fields.omega4(omega1) / k4,
                      np.full_like(omega1, scheme.gamma("03") / abs(k4))))
    return np.array([np.stack(f, axis=-1) for f in feats])


def _unresolved(grid: VelocityGrid, feats: np.ndarray, reach: float = 4.0) -> bool:
    if feats.size == 0:
        return False
    centers, widths = feats[..., 0], feats[..., 1]
    inside = np.abs(centers) <= reach * grid.u
    if not np.any(inside):
        return False
    spacing = np.interp(centers[inside], 0.5 * (grid.nodes[1:] + grid.nodes[:-1]),
                        np.diff(grid.nodes))
    return bool(np.any(widths[inside] < 3.0 * spacing))


def _adaptive_average(scheme, fields, omega1, which, u, block: int = 32):
    omega1 = np.atleast_1d(np.asarray(omega1, dtype=float))
    out = np.empty(omega1.shape, dtype=complex)
    span = 6.0 * u  # exp(-36) ~ 2e-16 tail
    for i in range(0, len(omega1), block):
        chunk = omega1[i:i + block]
        feats = narrow_features(scheme, fields, chunk, which)
        pts = feats[..., 0].ravel() if feats.size else np.empty(0)
        pts = np.unique(pts[np.isfinite(pts) & (np.abs(pts) < span)])

        def g(v, chunk=chunk):
            return maxwell_weight(v, u) * _integrand(scheme, fields, chunk, v, which)

        res, err = quad_vec(g, -span, span, epsrel=ADAPTIVE_RTOL, epsabs=0.0,
                            norm="max", limit=20000,
                            points=pts if len(pts) else None)
        scale = np.max(np.abs(res))
        if not np.all(np.isfinite(res)) or err > 1e-8 * max(scale, 1e-300):
            raise QuadratureError(f"adaptive velocity average failed (error {err:.3g})")
        out[i:i + block] = res
    return out


@dataclass
class AverageInfo:
    quadrature: str
    flagged: bool
    reasons: list = field(default_factory=list)


def average_response(scheme: SchemeConfig, fields: FieldSet, omega1, which: str = "chi4nl",
                     grid: Optional[VelocityGrid] = None, guard: bool = True):
    """Maxwell average of a per-velocity response at each probe detuning.

    Returns ``(values, info)``. With ``guard`` on, a Gauss-Hermite result is
    accepted only if no narrow velocity feature is predicted and doubling the
    node count changes it by less than 1e-8 (relative to the largest value);
    otherwise the spectrum is flagged and recomputed adaptively.
    """
    if which not in SPECTRUM_KINDS:
        raise ValueError(f"unknown spectrum selector {which!r}; expected one of {SPECTRUM_KINDS}")
    if grid is None:
        grid = make_grid(scheme.u)
    omega1 = np.atleast_1d(np.asarray(omega1, dtype=float))
    values = _grid_average(scheme, fields, omega1, which, grid)
    if not guard or grid.kind != GH:
        return values, AverageInfo(grid.kind, False)

    reasons = []
    if _unresolved(grid, narrow_features(scheme, fields, omega1, which)):
        reasons.append("velocity feature narrower than 3 node spacings")
    else:
        fine = _grid_average(scheme, fields, omega1, which, make_grid(grid.u, 2 * grid.n, GH))
        scale = np.max(np.abs(fine))
        if not np.all(np.isfinite(fine)) or np.max(np.abs(fine - values)) > CONVERGENCE_RTOL * scale:
            reasons.append("Gauss-Hermite not converged under node doubling")
    if not reasons:
        return values, AverageInfo(GH, False)
    log.info("narrow-feature guard tripped (%s); using adaptive quadrature", reasons[0])
    return _adaptive_average(scheme, fields, omega1, which, grid.u), AverageInfo(ADAPTIVE, True, reasons)


def averaged_spectrum(scheme: SchemeConfig, fields: FieldSet, omega1_range: Sequence[float],
                      grid: Optional[VelocityGrid] = None, which: str = "chi4nl",
                      guard: bool = True) -> ComplexSpectrum:
    """Velocity-averaged response versus probe detuning.

    ``which="chi4nl"`` is the coherent average <chi4nl> (what drives the
    generated field); ``"chi4nl_sq"`` is the incoherent <|chi4nl|^2>.
    """
    omega1_range = np.asarray(omega1_range, dtype=float)
    if omega1_range.size == 0:
        raise ValueError("empty detuning range")
    values, info = average_response(scheme, fields, omega1_range, which, grid, guard)
    return ComplexSpectrum(omega1_range, values, which, info.quadrature, info.flagged)


def doppler_limited_absorption(gamma: float, k: float, u: float, detuning=0.0):
    """Exact Maxwell average of Re[Gamma / (Gamma + i(detuning - k v))] (Voigt profile).

    ``k`` in nm^-1, ``gamma`` and ``detuning`` in MHz.
    """
    ku = abs(k) * u * DOPPLER_MHZ
    z = (np.asarray(detuning, dtype=float) + 1j * gamma) / ku
    return np.sqrt(np.pi) * gamma / ku * wofz(z).real


# -- lineshape metrics -----------------------------------------------------

class LineMetrics(NamedTuple):
    peak_position: float
    peak_value: float
    hwhm: float


_PARTS = {
    "abs": np.abs,
    "abs2": lambda z: np.abs(z) ** 2,
    "re": np.real,
    "-re": lambda z: -np.real(z),
}


def line_metrics(spectrum: ComplexSpectrum, part: str = "abs") -> LineMetrics:
    """Peak position/value and HWHM of ``part`` of the spectrum.

    The peak is refined by a parabola through the maximal sample and its
    neighbours; the half-maximum crossings are linearly interpolated.
    Raises :class:`LineShapeError` for a boundary peak or a missing
    half-maximum crossing, :class:`MultiModalError` when more than one local
    maximum exceeds half the global one.
    """
    x = spectrum.detunings
    y = _PARTS[part](spectrum.values).astype(float)
    if len(y) < 3:
        raise LineShapeError("need at least 3 samples")
    i = int(np.argmax(y))
    if i == 0 or i == len(y) - 1:
        raise LineShapeError("peak at the boundary of the scan")
    ymax = y[i]

    interior = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
    big = interior[y[interior] > 0.5 * ymax]
    if len(big) > 1:
        raise MultiModalError(x[big])

    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    h_left, h_right = x[i] - x[i - 1], x[i + 1] - x[i]
    h = h_right if shift >= 0 else h_left
    peak_pos = x[i] + shift * h
    peak_val = y1 - 0.25 * (y0 - y2) * shift

    half = 0.5 * peak_val
    left = np.flatnonzero(y[:i] < half)
    right = np.flatnonzero(y[i:] < half)
    if len(left) == 0 or len(right) == 0:
        raise LineShapeError("half maximum not reached inside the scan")
    a = left[-1]
    xl = x[a] + (half - y[a]) * (x[a + 1] - x[a]) / (y[a + 1] - y[a])
    b = i + right[0]
    xr = x[b - 1] + (half - y[b - 1]) * (x[b] - x[b - 1]) / (y[b] - y[b - 1])
    return LineMetrics(float(peak_pos), float(peak_val), float(0.5 * (xr - xl)))
