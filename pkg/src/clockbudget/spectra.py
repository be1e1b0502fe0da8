"""Phase-noise curves, power-law models and dephasing spectra.

All spectral densities are one-sided functions of angular frequency ``w``
(rad/s), normalised so that a process has variance
``(1 / 2 pi) * integral_0^inf S(w) dw``.  Single-sideband phase noise is
``L(w) = 10 log10(S_phi(w) / 2)`` in dBc/Hz and the dephasing spectrum is
``S_z(w) = w**2 S_phi(w) / 4 = w**2 10**(L / 10) / 2``.  The factor one half
is applied in exactly one place, :func:`ssb_to_sz`.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

TWO_PI = 2 * np.pi
LN10_OVER_10 = np.log(10.0) / 10.0

CLASSES = {-4: "random-walk FM", -3: "flicker FM", -2: "white FM", -1: "flicker PM", 0: "white PM"}
SNAP_TOL = 0.25
CONTINUITY_DB = 0.01


class CurveError(ValueError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class FitError(ValueError):
    pass


def ssb_to_sz(omega, ssb_dbc):
    return 0.5 * np.asarray(omega) ** 2 * np.exp(np.asarray(ssb_dbc) * LN10_OVER_10)


def ssb_to_sphi(ssb_dbc):
    return 2.0 * np.exp(np.asarray(ssb_dbc) * LN10_OVER_10)


def sphi_to_ssb(s_phi):
    return 10.0 * np.log10(np.asarray(s_phi) / 2.0)


# --------------------------------------------------------------------------
# tabulated curves

@dataclass(frozen=True)
class PhaseNoiseCurve:
    points: tuple[tuple[float, float], ...]
    carrier_frequency: float | None = None
    label: str = ""

    def __post_init__(self):
        pts = tuple((float(f), float(l)) for f, l in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise CurveError(f"need at least 2 points, got {len(pts)}")
        for i, (f, l) in enumerate(pts):
            if not (f > 0 and math.isfinite(f)):
                raise CurveError(f"offset frequency must be positive, got {f}", i)
            if not math.isfinite(l):
                raise CurveError(f"phase noise must be finite, got {l}", i)
            if i and f <= pts[i - 1][0]:
                raise CurveError(f"offset frequencies must increase strictly ({pts[i - 1][0]} -> {f})", i)

    @property
    def offsets_hz(self):
        return np.array([p[0] for p in self.points])

    @property
    def ssb(self):
        return np.array([p[1] for p in self.points])

    @property
    def omega(self):
        return TWO_PI * self.offsets_hz

    @property
    def omega_range(self):
        w = self.omega
        return float(w[0]), float(w[-1])


def _split_row(line):
    if "," in line:
        return [c.strip() for c in next(csv.reader([line]))]
    if "\t" in line:
        return [c.strip() for c in line.split("\t")]
    return line.split()


def load_phase_noise_curve(source, label=None, carrier_frequency=None) -> PhaseNoiseCurve:
    """Read ``offset_Hz, dBc_per_Hz`` records from a path or text stream.

    ``#`` comments, blank lines and a non-numeric header are skipped (a
    ``# carrier_frequency_hz: <value>`` comment fills in the metadata); the
    delimiter may be a comma, a tab or whitespace.  Rows must already be
    sorted by offset.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return load_phase_noise_curve(fh, label or os.path.basename(str(source)), carrier_frequency)
    points = []
    seen_data = False
    for lineno, raw in enumerate(source, start=1):
        line, _, comment = raw.partition("#")
        line = line.strip()
        key, sep, value = comment.partition(":")
        if sep and key.strip() == "carrier_frequency_hz" and carrier_frequency is None:
            carrier_frequency = float(value)
        if not line:
            continue
        cells = [c for c in _split_row(line) if c != ""]
        try:
            values = [float(c) for c in cells[:2]]
        except ValueError:
            if seen_data:
                raise CurveError(f"non-numeric record {line!r}", lineno) from None
            continue  # header
        if len(values) < 2:
            raise CurveError(f"expected two columns, got {line!r}", lineno)
        seen_data = True
        f, l = values
        if not f > 0:
            raise CurveError(f"offset frequency must be positive, got {f}", lineno)
        if points and f <= points[-1][0]:
            raise CurveError(f"offsets not strictly increasing ({points[-1][0]} -> {f})", lineno)
        points.append((f, l))
    if len(points) < 2:
        raise CurveError(f"need at least 2 data rows, got {len(points)}")
    return PhaseNoiseCurve(tuple(points), carrier_frequency, label or "")


def loads_phase_noise_curve(text, **kw) -> PhaseNoiseCurve:
    return load_phase_noise_curve(io.StringIO(text), **kw)


def interpolate_ssb(curve: PhaseNoiseCurve, omega):
    """Log-log interpolation of L(w); terminal slopes continue outside the table."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("interpolate_ssb needs omega > 0")
    x = np.log10(curve.omega)
    y = curve.ssb
    lx = np.log10(w)
    out = np.interp(lx, x, y)
    lo_slope = (y[1] - y[0]) / (x[1] - x[0])
    hi_slope = (y[-1] - y[-2]) / (x[-1] - x[-2])
    out = np.where(lx < x[0], y[0] + lo_slope * (lx - x[0]), out)
    out = np.where(lx > x[-1], y[-1] + hi_slope * (lx - x[-1]), out)
    # exact at the tabulated abscissae
    idx = np.searchsorted(x, lx)
    hit = (idx < x.size) & (np.take(x, np.minimum(idx, x.size - 1)) == lx)
    out = np.where(hit, np.take(y, np.minimum(idx, x.size - 1)), out)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# power-law models

@dataclass(frozen=True)
class PowerLawSegment:
    omega_lo: float
    omega_hi: float
    exponent: float
    coefficient: float  # dBc/Hz at omega_lo
    classification: str
    fitted_exponent: float | None = None
    residual_db: float | None = None

    def ssb(self, omega):
        return self.coefficient + 10.0 * self.exponent * np.log10(np.asarray(omega) / self.omega_lo)


@dataclass(frozen=True)
class PowerLawModel:
    segments: tuple[PowerLawSegment, ...]
    label: str = ""

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise FitError("power-law model needs at least one segment")
        for prev, nxt in zip(segs, segs[1:]):
            if not math.isclose(prev.omega_hi, nxt.omega_lo, rel_tol=1e-12):
                raise FitError(f"segments not contiguous at {prev.omega_hi} / {nxt.omega_lo}")
            jump = abs(float(prev.ssb(nxt.omega_lo)) - nxt.coefficient)
            if jump > CONTINUITY_DB:
                raise FitError(f"discontinuity of {jump:.3f} dB at {nxt.omega_lo:.6g} rad/s")

    @property
    def omega_range(self):
        return self.segments[0].omega_lo, self.segments[-1].omega_hi

    @property
    def breakpoints(self):
        return [s.omega_lo for s in self.segments[1:]]

    def ssb(self, omega):
        w = np.asarray(omega, dtype=float)
        edges = np.array([s.omega_lo for s in self.segments[1:]])
        idx = np.searchsorted(edges, w, side="right")
        exps = np.array([s.exponent for s in self.segments])[idx]
        coef = np.array([s.coefficient for s in self.segments])[idx]
        lo = np.array([s.omega_lo for s in self.segments])[idx]
        out = coef + 10.0 * exps * np.log10(w / lo)
        return out if out.ndim else float(out)

    def to_dict(self):
        return {
            "label": self.label,
            "segments": [
                {"omega_lo_rad_s": s.omega_lo, "omega_hi_rad_s": s.omega_hi, "exponent": s.exponent,
                 "coefficient_dBc_per_Hz": s.coefficient, "classification": s.classification,
                 "fitted_exponent": s.fitted_exponent, "residual_db": s.residual_db}
                for s in self.segments
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        segs = [PowerLawSegment(d["omega_lo_rad_s"], d["omega_hi_rad_s"], d["exponent"],
                                d["coefficient_dBc_per_Hz"], d.get("classification") or classify(d["exponent"]),
                                d.get("fitted_exponent"), d.get("residual_db"))
                for d in doc["segments"]]
        return cls(tuple(segs), doc.get("label", ""))


def classify(exponent):
    if float(exponent).is_integer() and int(exponent) in CLASSES:
        return CLASSES[int(exponent)]
    return "other"


def snap_exponent(slope):
    nearest = round(slope)
    if nearest in CLASSES and abs(slope - nearest) <= SNAP_TOL:
        return float(nearest), CLASSES[nearest]
    return float(slope), "other"


def fit_power_law_segments(curve: PhaseNoiseCurve, breakpoints: Sequence[float] | None = None,
                           label=None) -> PowerLawModel:
    """Least-squares log-log slope per segment, snapped to canonical exponents.

    ``breakpoints`` are interior segment boundaries in rad/s.  Each segment
    is anchored at its left boundary value so the model is continuous.
    """
    w = curve.omega
    lo, hi = w[0], w[-1]
    bps = sorted(float(b) for b in (() if breakpoints is None else breakpoints))
    for b in bps:
        if not lo < b < hi:
            raise FitError(f"breakpoint {b:.6g} rad/s outside curve range ({lo:.6g}, {hi:.6g})")
    edges = [lo, *bps, hi]
    x = np.log10(w)
    y = curve.ssb
    segs = []
    anchor = None
    for k, (a, b) in enumerate(zip(edges, edges[1:])):
        inside = (w >= a * (1 - 1e-12)) & (w <= b * (1 + 1e-12))
        if inside.sum() < 2:
            raise FitError(f"segment {k} [{a:.6g}, {b:.6g}] rad/s contains fewer than 2 points")
        xs, ys = x[inside], y[inside]
        slope_db, intercept = np.polyfit(xs, ys, 1)
        fitted = slope_db / 10.0
        p, cls = snap_exponent(fitted)
        if anchor is None:
            # best intercept for the snapped slope, evaluated at the left edge
            anchor = float(np.mean(ys - 10.0 * p * (xs - np.log10(a))))
        resid = ys - (anchor + 10.0 * p * (xs - np.log10(a)))
        seg = PowerLawSegment(a, b, p, anchor, cls, float(fitted), float(np.sqrt(np.mean(resid**2))))
        segs.append(seg)
        anchor = float(seg.ssb(b))
    return PowerLawModel(tuple(segs), label if label is not None else curve.label)


# --------------------------------------------------------------------------
# dephasing spectra

@dataclass(frozen=True)
class DephasingSpectrum:
    """``S_z(w)`` evaluator with its support and origin.

    ``ssb`` is kept for spectra derived from phase-noise data so that the
    round trip back to dBc/Hz is available.
    """

    sz: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    provenance: str
    breakpoints: tuple[float, ...] = ()
    ssb: Callable[[np.ndarray], np.ndarray] | None = None
    description: dict = field(default_factory=dict, compare=False)
    zero: bool = False

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        if self.zero:
            return np.zeros_like(w)
        return self.sz(w)

    def scaled(self, factor):
        return DephasingSpectrum(lambda w, f=self.sz: factor * f(w), self.support, self.provenance,
                                 self.breakpoints, None, {**self.description, "scale": factor},
                                 self.zero or factor == 0)

    def __add__(self, other):
        lo = min(self.support[0], other.support[0])
        hi = max(self.support[1], other.support[1])
        return DephasingSpectrum(lambda w: self(w) + other(w), (lo, hi), "synthetic",
                                 tuple(sorted(set(self.breakpoints) | set(other.breakpoints))),
                                 None, {"sum": [self.description, other.description]},
                                 self.zero and other.zero)

    def band_limited(self, lo, hi):
        """Zero outside ``[lo, hi]``."""
        def sz(w, f=self.__call__):
            return np.where((w >= lo) & (w <= hi), f(w), 0.0)
        return DephasingSpectrum(sz, (lo, hi), self.provenance,
                                 tuple(sorted({*self.breakpoints, lo, hi})), None,
                                 {**self.description, "band_rad_s": [lo, hi]}, self.zero)

    def to_table(self, omega):
        w = np.asarray(omega, dtype=float)
        return np.column_stack([w, self(w)])


def to_dephasing_psd(x: PhaseNoiseCurve | PowerLawModel) -> DephasingSpectrum:
    if isinstance(x, PhaseNoiseCurve):
        def ssb(w, c=x):
            return interpolate_ssb(c, w)
        return DephasingSpectrum(lambda w: ssb_to_sz(w, ssb(w)), x.omega_range, "tabulated",
                                 tuple(x.omega[1:-1]), ssb,
                                 {"kind": "tabulated", "label": x.label,
                                  "points_hz_dbc": [list(p) for p in x.points]})
    if isinstance(x, PowerLawModel):
        return DephasingSpectrum(lambda w: ssb_to_sz(w, x.ssb(w)), x.omega_range, "power-law",
                                 tuple(x.breakpoints), x.ssb, {"kind": "power-law", **x.to_dict()})
    raise TypeError(f"cannot convert {type(x).__name__} to a dephasing spectrum")


def phase_psd(spectrum: DephasingSpectrum):
    """Evaluator for ``S_phi(w) = 4 S_z(w) / w**2``."""
    def s_phi(omega):
        w = np.asarray(omega, dtype=float)
        if np.any(w <= 0):
            raise ValueError("S_phi is undefined at omega <= 0")
        return 4.0 * spectrum(w) / w**2
    return s_phi


def thermal_floor_ssb(temperature, carrier_power_dbm=0.0):
    """Thermal floor relative to the carrier, -174 dBc/Hz at 290 K and 0 dBm."""
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    return -174.0 + 10.0 * math.log10(temperature / 290.0) - carrier_power_dbm


def thermal_floor_spectrum(ssb_floor, omega_c) -> DephasingSpectrum:
    """Flat phase noise ``ssb_floor`` up to the hard cutoff ``omega_c``."""
    if not omega_c > 0:
        raise ValueError("cutoff must be positive")
    desc = {"kind": "thermal-floor", "ssb_floor_dBc_per_Hz": ssb_floor, "omega_c_rad_s": omega_c}
    if ssb_floor == -math.inf:
        return DephasingSpectrum(lambda w: np.zeros_like(w), (0.0, omega_c), "thermal-floor",
                                 (omega_c,), None, desc, zero=True)

    def sz(w):
        return np.where(w <= omega_c, ssb_to_sz(w, ssb_floor), 0.0)

    def ssb(w):
        return np.where(np.asarray(w) <= omega_c, ssb_floor, -np.inf)
    return DephasingSpectrum(sz, (0.0, omega_c), "thermal-floor", (omega_c,), ssb, desc)


def power_law_spectrum(level, slope, omega_ref=1.0, band=None) -> DephasingSpectrum:
    """Synthetic ``S_z = level * (w / omega_ref)**slope``, optionally band-limited."""
    desc = {"kind": "synthetic-power-law", "level": level, "slope": slope, "omega_ref_rad_s": omega_ref}
    spec = DephasingSpectrum(lambda w: level * (w / omega_ref) ** slope, (0.0, math.inf), "synthetic",
                             (), None, desc, zero=level == 0)
    return spec.band_limited(*band) if band is not None else spec


def zero_spectrum() -> DephasingSpectrum:
    return DephasingSpectrum(lambda w: np.zeros_like(w), (0.0, math.inf), "synthetic", (), None,
                             {"kind": "zero"}, zero=True)


def write_spectrum_table(fh, spectrum: DephasingSpectrum, omega: Iterable[float]):
    w = np.asarray(list(omega), dtype=float)
    fh.write("omega_rad_s,S_z_rad2_s-2_per_Hz\n")
    for wi, si in zip(w, spectrum(w)):
        fh.write(f"{wi:.17g},{si:.17g}\n")


def describe(spectrum: DephasingSpectrum) -> str:
    return json.dumps({"provenance": spectrum.provenance, "support_rad_s": list(spectrum.support),
                       **spectrum.description}, indent=2, sort_keys=True, default=float)
