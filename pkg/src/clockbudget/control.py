"""Piecewise-constant control sequences for single-qubit protocols.

The drive on a segment is ``0.5 * rabi_rate * (cos(phase) X + sin(phase) Y)``,
so a segment of duration ``d`` rotates the Bloch vector by ``rabi_rate * d``
about the equatorial axis ``(cos phase, sin phase, 0)``.  Zero-duration
segments are instantaneous markers carrying an explicit rotation angle.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

TARGETS = ("identity", "pi_x", "custom")
TARGET_TOL = 1e-10


class SequenceError(ValueError):
    pass


class CalibrationError(RuntimeError):
    def __init__(self, message, best_residual):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


def su2_rotation(angle, axis):
    """``exp(-i angle/2 n.sigma)`` for a unit vector ``axis``."""
    nx, ny, nz = axis
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c - 1j * s * nz, -1j * s * (nx - 1j * ny)],
                     [-1j * s * (nx + 1j * ny), c + 1j * s * nz]])


def phase_invariant_distance(u, v):
    """max-norm of ``u - exp(i a) v`` minimised over the global phase ``a``."""
    overlap = np.trace(v.conj().T @ u)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(u - phase * v)))


@dataclass(frozen=True)
class ControlSegment:
    rabi_rate: float
    phase: float
    duration: float
    marker_angle: float | None = None

    def __post_init__(self):
        if self.duration < 0 or not np.isfinite(self.duration):
            raise SequenceError(f"segment duration must be >= 0, got {self.duration}")
        if self.rabi_rate < 0:
            raise SequenceError(f"rabi rate must be >= 0, got {self.rabi_rate}")
        if self.duration == 0 and self.marker_angle is None:
            raise SequenceError("zero-duration segment needs a marker_angle")
        if self.duration > 0 and self.marker_angle is not None:
            raise SequenceError("marker_angle is only allowed on zero-duration segments")

    @property
    def is_marker(self):
        return self.duration == 0

    @property
    def angle(self):
        return self.marker_angle if self.is_marker else self.rabi_rate * self.duration

    @property
    def axis(self):
        return np.array([np.cos(self.phase), np.sin(self.phase), 0.0])

    def propagator(self):
        return su2_rotation(self.angle, self.axis)


@dataclass(frozen=True)
class ControlSequence:
    segments: tuple[ControlSegment, ...]
    declared_target: str = "custom"
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.declared_target not in TARGETS:
            raise SequenceError(f"unknown target {self.declared_target!r}")
        if not self.duration > 0:
            raise SequenceError("total sequence duration must be > 0")
        target = self.target_unitary()
        if target is not None:
            err = phase_invariant_distance(self.propagator(), target)
            if err > TARGET_TOL:
                raise SequenceError(
                    f"composite rotation misses {self.declared_target} by {err:.2e}")

    @property
    def duration(self):
        return sum(s.duration for s in self.segments)

    def boundaries(self):
        """Start times of each segment plus the final time."""
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def propagator(self):
        u = IDENTITY
        for seg in self.segments:
            u = seg.propagator() @ u
        return u

    def target_unitary(self):
        if self.declared_target == "identity":
            return IDENTITY
        if self.declared_target == "pi_x":
            return su2_rotation(np.pi, (1.0, 0.0, 0.0))
        return None

    def scaled(self, s):
        """Durations times ``s``, Rabi rates divided by ``s``."""
        segs = [ControlSegment(seg.rabi_rate / s, seg.phase, seg.duration * s, seg.marker_angle)
                for seg in self.segments]
        return ControlSequence(segs, self.declared_target, self.label)

    def to_dict(self):
        segs = []
        for seg in self.segments:
            d = {"omega_rad_s": seg.rabi_rate, "phase_rad": seg.phase, "duration_s": seg.duration}
            if seg.is_marker:
                d["angle_rad"] = seg.marker_angle
            segs.append(d)
        return {"label": self.label, "declared_target": self.declared_target, "segments": segs}

    @classmethod
    def from_dict(cls, doc):
        segs = [ControlSegment(d["omega_rad_s"], d["phase_rad"], d["duration_s"], d.get("angle_rad"))
                for d in doc["segments"]]
        return cls(segs, doc.get("declared_target", "custom"), doc.get("label", ""))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _positive(name, value):
    if not (value > 0 and np.isfinite(value)):
        raise SequenceError(f"{name} must be positive and finite, got {value}")


def ramsey(tau):
    _positive("tau", tau)
    return ControlSequence([ControlSegment(0.0, 0.0, tau)], "identity", "ramsey")


def spin_echo(tau, rabi_rate=None):
    """Free evolution with a central pi_x.

    ``rabi_rate=None`` gives an instantaneous pulse; otherwise the pulse takes
    ``pi / rabi_rate`` and is carved symmetrically out of the free periods.
    """
    _positive("tau", tau)
    if rabi_rate is None:
        segs = [ControlSegment(0.0, 0.0, tau / 2),
                ControlSegment(0.0, 0.0, 0.0, marker_angle=np.pi),
                ControlSegment(0.0, 0.0, tau / 2)]
    else:
        _positive("rabi_rate", rabi_rate)
        if rabi_rate * tau <= 2 * np.pi:
            raise SequenceError("finite echo pulse needs rabi_rate * tau > 2 pi")
        t_pi = np.pi / rabi_rate
        free = (tau - t_pi) / 2
        segs = [ControlSegment(0.0, 0.0, free),
                ControlSegment(rabi_rate, 0.0, t_pi),
                ControlSegment(0.0, 0.0, free)]
    return ControlSequence(segs, "pi_x", "echo")


def primitive_pulse(theta, phase, rabi_rate):
    _positive("theta", theta)
    _positive("rabi_rate", rabi_rate)
    seg = ControlSegment(rabi_rate, phase, theta / rabi_rate)
    turns = theta / (2 * np.pi)
    if np.isclose(theta, np.pi) and phase == 0:
        target = "pi_x"
    elif np.isclose(turns, round(turns)):
        target = "identity"
    else:
        target = "custom"
    return ControlSequence([seg], target, "primitive")


def _wamf_segments(rabi_a, rabi_b):
    """Four equal slots with amplitudes (a, b, b, a) jointly rotating by pi.

    A negative amplitude is a phase flip of the drive.
    """
    d = np.pi / (2 * (rabi_a + rabi_b))
    segs = []
    for amp in (rabi_a, rabi_b, rabi_b, rabi_a):
        segs.append(ControlSegment(abs(amp), 0.0 if amp >= 0 else np.pi, d))
    return segs


def _moment(ratio):
    """Zero-frequency toggling-frame moment of the unit-peak WAMF family."""
    from .filterfunc import zero_frequency_moment

    segs = _wamf_segments(1.0, ratio)
    return zero_frequency_moment(ControlSequence(segs, "custom"))


def _relative_residual(ratio):
    """First-order coefficient relative to a primitive pi of the same length."""
    tau = sum(s.duration for s in _wamf_segments(1.0, ratio))
    return float(np.sum(_moment(ratio) ** 2)) / (4 * tau**2 / np.pi**2)


@lru_cache(maxsize=None)
def _calibrated_ratio(max_iter=200, threshold=1e-18):
    ref = _moment(1.0)
    ref_dir = ref / np.linalg.norm(ref)

    def signed(r):
        return float(np.dot(_moment(r), ref_dir))

    # scan down from the primitive (r = 1) for the first sign change
    grid = np.linspace(1.0, -1.0, 129)[:-1]
    values = [signed(r) for r in grid]
    bracket = None
    for k in range(1, len(grid)):
        if np.sign(values[k]) != np.sign(values[k - 1]):
            bracket = (grid[k], grid[k - 1])
            break
    if bracket is None:
        best = min(_relative_residual(r) for r in grid)
        raise CalibrationError("no amplitude ratio cancels the first-order moment", best)

    lo, hi = bracket
    f_lo = signed(lo)
    best_r, best_res = hi, _relative_residual(hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = signed(mid)
        res = _relative_residual(mid)
        if res < best_res:
            best_r, best_res = mid, res
        if f_mid == 0.0:
            break
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    if best_res > threshold:
        raise CalibrationError("WAMF calibration did not reach the suppression threshold", best_res)
    return best_r


def calibrate_wamf(rabi_ref):
    """Amplitudes ``(rabi_a, rabi_b)`` of the first-order-insensitive pi_x.

    ``rabi_a`` is the peak rate; ``rabi_b = r * rabi_a`` with ``r`` in (-1, 1]
    chosen so the zero-frequency moment of the toggling-frame dephasing axis
    vanishes, which makes the filter function rise as omega**4.
    """
    _positive("rabi_ref", rabi_ref)
    r = _calibrated_ratio()
    return float(rabi_ref), float(r * rabi_ref)


def wamf_pi(rabi_ref):
    rabi_a, rabi_b = calibrate_wamf(rabi_ref)
    return ControlSequence(_wamf_segments(rabi_a, rabi_b), "pi_x", "wamf")


def wamf_duration(rabi_ref):
    rabi_a, rabi_b = calibrate_wamf(rabi_ref)
    return 4 * np.pi / (2 * (rabi_a + rabi_b))


@dataclass(frozen=True)
class ProtocolFamily:
    """Maps an operation time tau to the protocol's control sequence."""

    name: str
    echo_rabi_rate: float | None = field(default=None)

    def __call__(self, tau) -> ControlSequence:
        _positive("tau", tau)
        if self.name == "ramsey":
            return ramsey(tau)
        if self.name == "echo":
            return spin_echo(tau, self.echo_rabi_rate)
        if self.name == "primitive-pi":
            return primitive_pulse(np.pi, 0.0, np.pi / tau)
        if self.name == "wamf-pi":
            return wamf_pi(wamf_duration(1.0) / tau)
        raise SequenceError(f"unknown protocol {self.name!r}")


PROTOCOLS: Sequence[str] = ("ramsey", "echo", "primitive-pi", "wamf-pi")


def protocol_family(name) -> ProtocolFamily:
    if name not in PROTOCOLS:
        raise SequenceError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}")
    return ProtocolFamily(name)
