"""Error overlap integral, average fidelity and thermal-floor budgets.

``chi = (1 / pi) * integral dw S_z(w) sum_l G_l(w) / w**2`` and the average
fidelity is ``(1 + exp(-chi)) / 2``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .control import ControlSequence, ProtocolFamily, protocol_family
from .filterfunc import FilterFunctionSet
from .quadrature import integrate_panels, seed_panels
from .spectra import DephasingSpectrum, thermal_floor_spectrum

log = logging.getLogger(__name__)

DEFAULT_BAND = (2 * np.pi * 0.1, 2 * np.pi * 10e6)
TAU_RANGE = (1e-9, 100e-3)
FLAG_RTOL = 0.01
VALIDITY_PRODUCT = 100.0


def infidelity_from_chi(chi):
    return -0.5 * math.expm1(-chi)


@dataclass(frozen=True)
class ChiResult:
    chi: float
    avg_fidelity: float
    infidelity: float
    quadrature_error_estimate: float
    band: tuple[float, float]
    flagged: bool = False
    n_panels: int = 0

    @property
    def beyond_first_order(self):
        return self.chi > 1.0

    @classmethod
    def from_chi(cls, chi, error, band, n_panels=0):
        infid = infidelity_from_chi(chi)
        flagged = error > FLAG_RTOL * abs(chi) and error > 0
        return cls(chi, 1.0 - infid, infid, error, tuple(band), flagged, n_panels)


def _as_ff(ff):
    if isinstance(ff, FilterFunctionSet):
        return ff
    if isinstance(ff, ControlSequence):
        return FilterFunctionSet.from_sequence(ff)
    raise TypeError(f"expected a FilterFunctionSet or ControlSequence, got {type(ff).__name__}")


def chi(spectrum: DephasingSpectrum, ff, band=DEFAULT_BAND, rtol=1e-7) -> ChiResult:
    """Overlap integral over ``band`` (rad/s).

    Panels are at most ``pi / tau`` wide so every half-oscillation of the
    filter function is resolved by its own Gauss-Kronrod rule.
    """
    ff = _as_ff(ff)
    lo, hi = float(band[0]), float(band[1])
    if not 0 < lo < hi:
        raise ValueError(f"band must satisfy 0 < min < max, got {band}")
    if spectrum.zero:
        return ChiResult.from_chi(0.0, 0.0, (lo, hi))
    edges = seed_panels(lo, hi, np.pi / ff.duration, breakpoints=spectrum.breakpoints)

    def integrand(w):
        return spectrum(w) * ff.total_over_omega2(w)

    res = integrate_panels(integrand, edges, rtol=rtol)
    return ChiResult.from_chi(res.value / np.pi, res.error / np.pi, (lo, hi), res.n_panels)


@dataclass(frozen=True)
class InfidelityCurve:
    protocol: str
    samples: tuple[tuple[float, ChiResult], ...]
    provenance: str

    def __post_init__(self):
        taus = [t for t, _ in self.samples]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("tau samples must increase strictly")

    @property
    def taus(self):
        return np.array([t for t, _ in self.samples])

    @property
    def chi(self):
        return np.array([r.chi for _, r in self.samples])

    @property
    def infidelity(self):
        return np.array([r.infidelity for _, r in self.samples])

    def rows(self):
        for tau, r in self.samples:
            yield tau, r.chi, r.infidelity, r.flagged


def _family(protocol):
    return protocol if isinstance(protocol, ProtocolFamily) else protocol_family(protocol)


def infidelity_curve(spectrum, protocol, taus: Sequence[float], band=DEFAULT_BAND) -> InfidelityCurve:
    family = _family(protocol)
    samples = tuple((float(t), chi(spectrum, family(float(t)), band)) for t in taus)
    return InfidelityCurve(family.name, samples, spectrum.provenance)


def kappa(protocol, omega_c, tau):
    """Mean of ``sum_l G_l`` over ``[0, omega_c]``.

    With a flat phase-noise floor ``L`` up to ``omega_c`` this gives
    ``chi = kappa * omega_c / (2 pi) * 10**(L / 10)`` exactly.
    """
    family = _family(protocol)
    if omega_c * tau / (2 * np.pi) < VALIDITY_PRODUCT * (1 - 1e-12):
        warnings.warn(f"omega_c * tau / 2 pi = {omega_c * tau / (2 * np.pi):.3g} < "
                      f"{VALIDITY_PRODUCT:g}; kappa depends on tau here", RuntimeWarning, stacklevel=2)
    ff = FilterFunctionSet.from_sequence(family(tau))
    lo = omega_c * 1e-12
    edges = seed_panels(lo, omega_c, np.pi / tau)
    res = integrate_panels(ff.total, edges, rtol=1e-9)
    return res.value / omega_c


@dataclass(frozen=True)
class ThermalFloorResult:
    kappa: float
    chi_min: float
    infidelity_floor: float
    valid: bool
    chi_check: float | None = None


def thermal_floor(ssb_floor, omega_c, protocol, tau, cross_check=True) -> ThermalFloorResult:
    family = _family(protocol)
    valid = omega_c * tau / (2 * np.pi) >= VALIDITY_PRODUCT * (1 - 1e-12)  # tolerate rounding at the edge
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        k = kappa(family, omega_c, tau)
    chi_min = k * omega_c / (2 * np.pi) * 10 ** (ssb_floor / 10)
    check = None
    if cross_check:
        spec = thermal_floor_spectrum(ssb_floor, omega_c)
        check = chi(spec, family(tau), (omega_c * 1e-12, omega_c)).chi
    return ThermalFloorResult(k, chi_min, infidelity_from_chi(chi_min), valid, check)


@dataclass(frozen=True)
class TimeToError:
    target: float
    tau: float | None  # None: no crossing below tau_max
    infidelity: float | None
    tau_max: float
    below_range: bool = False
    multi_crossing: bool = False

    @property
    def sentinel(self):
        return self.tau is None

    def label(self):
        if self.tau is None:
            return f"> {self.tau_max * 1e3:g} ms"
        if self.below_range:
            return f"< {self.tau * 1e9:g} ns"
        return f"{self.tau:.6g}"


class _InfidelityCache:
    """Memoised ``tau -> infidelity`` so several targets share one scan."""

    def __init__(self, spectrum, family, band):
        self.spectrum, self.family, self.band = spectrum, family, band
        self.values = {}

    def __call__(self, tau):
        tau = float(tau)
        if tau not in self.values:
            self.values[tau] = chi(self.spectrum, self.family(tau), self.band).infidelity
        return self.values[tau]


def time_to_error(spectrum, protocol, p, band=DEFAULT_BAND, tau_range=TAU_RANGE,
                  per_decade=4, rtol=0.01, cache=None) -> TimeToError:
    """Smallest tau whose infidelity reaches ``p`` (bisection on log tau)."""
    if not 0 < p < 0.5:
        raise ValueError("target infidelity must lie in (0, 0.5)")
    family = _family(protocol)
    t_lo, t_hi = tau_range
    if spectrum.zero:
        return TimeToError(p, None, None, t_hi)
    infid = cache if cache is not None else _InfidelityCache(spectrum, family, band)

    n = int(round(per_decade * np.log10(t_hi / t_lo))) + 1
    grid = np.geomspace(t_lo, t_hi, n)
    values = []
    crossing = None
    for i, t in enumerate(grid):
        values.append(infid(t))
        if crossing is None and values[-1] >= p:
            crossing = i
        if crossing is not None and i >= crossing + per_decade:
            break
    if crossing is None:
        return TimeToError(p, None, None, t_hi)
    multi = any(v < p for v in values[crossing + 1:])
    if crossing == 0:
        return TimeToError(p, float(grid[0]), values[0], t_hi, below_range=True, multi_crossing=multi)

    lo, hi = np.log(grid[crossing - 1]), np.log(grid[crossing])
    f_hi = values[crossing]
    for _ in range(200):
        if f_hi <= (1 + rtol) * p or hi - lo < 1e-12:
            break
        mid = 0.5 * (lo + hi)
        f_mid = infid(math.exp(mid))
        if f_mid >= p:
            hi, f_hi = mid, f_mid
        else:
            lo = mid
    return TimeToError(p, math.exp(hi), f_hi, t_hi, multi_crossing=multi)


def time_to_errors(spectrum, protocol, targets, band=DEFAULT_BAND, tau_range=TAU_RANGE,
                   per_decade=4, rtol=0.01) -> list[TimeToError]:
    """``time_to_error`` for several targets, sharing infidelity evaluations."""
    family = _family(protocol)
    cache = _InfidelityCache(spectrum, family, band)
    return [time_to_error(spectrum, family, p, band, tau_range, per_decade, rtol, cache) for p in targets]
