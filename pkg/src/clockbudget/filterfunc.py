"""First-order dephasing filter functions of piecewise-constant controls.

With the control propagator ``U_c(t)`` the dephasing operator in the toggling
frame is ``U_c^dag Z U_c = sum_l R_l(t) sigma_l``.  On a segment of rate
``W`` about the equatorial axis ``n`` the row ``R(t)`` is a combination of
``{1, cos W s, sin W s}`` (``s`` = time into the segment), so its Fourier
integral is closed form.  ``G_l(w) = w**2 |int_0^tau R_l(t) exp(i w t) dt|**2``;
Ramsey gives ``G_z = 4 sin(w tau / 2)**2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .control import ControlSequence

log = logging.getLogger(__name__)

E_Z = np.array([0.0, 0.0, 1.0])


class FilterOrderError(RuntimeError):
    pass


def _rodrigues(axis, angle):
    n = np.asarray(axis, dtype=float)
    k = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.cos(angle) * np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * np.outer(n, n)


@dataclass(frozen=True)
class SegmentTerms:
    start: float
    duration: float
    rate: float
    entry_rotation: np.ndarray  # SO(3) image of U_c at segment start
    constant: np.ndarray
    cosine: np.ndarray
    sine: np.ndarray


@dataclass(frozen=True)
class TogglingFrameTrajectory:
    """Per-segment analytic form of ``R(t)``; markers only update the frame."""

    terms: tuple[SegmentTerms, ...]
    duration: float
    final_rotation: np.ndarray

    def at(self, t):
        """``R(t)`` as an array of shape ``(3, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((3, t.size))
        for k, seg in enumerate(self.terms):
            last = k == len(self.terms) - 1
            upper = t <= seg.start + seg.duration if last else t < seg.start + seg.duration
            mask = (t >= seg.start) & upper
            if not mask.any():
                continue
            phase = seg.rate * (t[mask] - seg.start)
            out[:, mask] = (seg.constant[:, None] + seg.cosine[:, None] * np.cos(phase)
                            + seg.sine[:, None] * np.sin(phase))
        return out


def toggling_frame_trajectory(seq: ControlSequence) -> TogglingFrameTrajectory:
    rot = np.eye(3)
    t = 0.0
    terms = []
    for seg in seq.segments:
        if seg.is_marker:
            rot = _rodrigues(seg.axis, seg.angle) @ rot
            continue
        n = seg.axis
        terms.append(SegmentTerms(
            start=t, duration=seg.duration, rate=seg.rabi_rate, entry_rotation=rot,
            constant=(n[2] * n) @ rot,
            cosine=(E_Z - n[2] * n) @ rot,
            sine=np.array([-n[1], n[0], 0.0]) @ rot,
        ))
        rot = _rodrigues(n, seg.angle) @ rot
        t += seg.duration
    return TogglingFrameTrajectory(tuple(terms), t, rot)


SERIES_THRESHOLD = 1e-4


def _window(nu, d):
    """``int_0^d exp(i nu s) ds``, regular at ``nu = 0``."""
    return d * np.exp(0.5j * nu * d) * np.sinc(nu * d / (2 * np.pi))


def _window_from(z_shift, nu, d):
    """Same integral from a precomputed ``exp(i nu d)``.

    Near ``nu = 0`` the quotient is 0/0 and the regular form is used instead.
    """
    small = np.abs(nu) * d < SERIES_THRESHOLD
    out = np.empty(nu.shape, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / nu
        # (z - 1) / (i nu) split into real arithmetic
        out.real = z_shift.imag * inv
        out.imag = (1.0 - z_shift.real) * inv
    if small.any():
        out[small] = _window(nu[small], d)
    return out


def fourier_integrals(traj: TogglingFrameTrajectory, omega):
    """``int_0^tau R_l(t) exp(i w t) dt`` for each ``l``; shape ``(3, N)``."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    acc = np.zeros((3, omega.size), dtype=complex)
    shift = np.ones(omega.size, dtype=complex)
    phasors = {}  # exp(i w d) per distinct duration; balanced sequences repeat durations

    def add(coef, e):
        for l in range(3):
            if coef[l] != 0:
                acc[l] += coef[l] * e

    for k, seg in enumerate(traj.terms):
        if k:
            prev = traj.terms[k - 1]
            if prev.start + prev.duration != seg.start:
                shift = np.exp(1j * omega * seg.start)
        z = phasors.get(seg.duration)
        if z is None:
            z = phasors[seg.duration] = np.exp(1j * omega * seg.duration)
        if seg.rate == 0.0:
            add(seg.constant + seg.cosine, _window_from(z, omega, seg.duration) * shift)
        else:
            u = np.exp(1j * seg.rate * seg.duration)
            q = 0.5 * (seg.cosine - 1j * seg.sine)
            add(q, _window_from(z * u, omega + seg.rate, seg.duration) * shift)
            add(q.conj(), _window_from(z / u, omega - seg.rate, seg.duration) * shift)
            if np.any(seg.constant):
                add(seg.constant, _window_from(z, omega, seg.duration) * shift)
        shift = shift * z
    return acc


@dataclass(frozen=True)
class FilterFunctionSet:
    trajectory: TogglingFrameTrajectory

    @classmethod
    def from_sequence(cls, seq: ControlSequence):
        return cls(toggling_frame_trajectory(seq))

    @property
    def duration(self):
        return self.trajectory.duration

    def __call__(self, omega):
        """``(G_x, G_y, G_z)`` stacked as shape ``(3, N)``."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        f = fourier_integrals(self.trajectory, omega)
        return omega**2 * (f.real**2 + f.imag**2)

    def total(self, omega):
        return self(omega).sum(axis=0)

    def total_over_omega2(self, omega):
        """``sum_l G_l / w**2``, finite at ``w = 0``."""
        f = fourier_integrals(self.trajectory, omega)
        return (f.real**2 + f.imag**2).sum(axis=0)

    def to_table(self, omega):
        g = self(omega)
        return np.column_stack([omega, g[0], g[1], g[2], g.sum(axis=0)])


def filter_function(seq: ControlSequence, omega):
    if np.any(np.asarray(omega) <= 0):
        raise ValueError("filter function is evaluated at omega > 0")
    return FilterFunctionSet.from_sequence(seq)(omega)


def zero_frequency_moment(seq: ControlSequence):
    """``int_0^tau R(t) dt``; its squared norm is ``lim sum G / w**2``."""
    return fourier_integrals(toggling_frame_trajectory(seq), [0.0])[:, 0].real


def zero_frequency_coefficient(seq: ControlSequence):
    return float(np.sum(zero_frequency_moment(seq) ** 2))


def low_freq_order(seq: ControlSequence, n_points=24):
    """Log-log slope of ``sum_l G_l`` over ``[1e-3, 1e-2] / tau``."""
    tau = seq.duration
    ff = FilterFunctionSet.from_sequence(seq)
    lo, hi = 1e-3 / tau, 1e-2 / tau
    for attempt in range(2):
        omega = np.geomspace(lo, hi, n_points)
        g = ff.total(omega)
        tiny = np.finfo(float).tiny * 1e10
        if np.all(np.isfinite(g)) and np.all(g > tiny):
            slope, _ = np.polyfit(np.log(omega), np.log(g), 1)
            return float(slope)
        log.info("filter function underflows on [%g, %g]; widening", lo, hi)
        hi *= 10
    raise FilterOrderError("filter function underflows in the low-frequency fit window")
