"""Time-domain Monte Carlo oracle for the filter-function error budget.

LO phase noise is synthesised as a random-phase sum of cosines,
``phi_N(t) = sum_j a_j cos(w_j t + theta_j)`` with
``a_j = sqrt(S_phi(w_j) dw_j / pi)``, and the driven qubit is propagated in
two pictures:

* toggling (carrier + second interaction picture):
  ``H = -phi_dot_N / 2 Z + Omega / 2 (cos phi_C X + sin phi_C Y)``
* carrier: ``H = Omega / 2 (cos(phi_C + phi_N) X + sin(phi_C + phi_N) Y)``

related by ``U_carrier(t) = V(t) U_toggling(t) V(0)^dag`` with
``V(t) = exp(-i phi_N(t) / 2 Z)``.

SU(2) elements are handled as unit quaternions ``(q0, q1, q2, q3)`` meaning
``q0 I - i (q1 X + q2 Y + q3 Z)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .control import ControlSequence
from .spectra import DephasingSpectrum, phase_psd

log = logging.getLogger(__name__)

PER_DECADE = 50
LINEAR_SPACING = np.pi / 4  # times 1/duration
STEP_FACTOR = 0.01
DEFAULT_CHUNK = 512


class SynthesisError(ValueError):
    pass


class StepUnderflow(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# quaternion helpers

def qmul(p, q):
    """Hamilton product along the last axis (``U_p U_q``)."""
    p0, p1, p2, p3 = np.moveaxis(p, -1, 0)
    q0, q1, q2, q3 = np.moveaxis(q, -1, 0)
    return np.stack([p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
                     p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
                     p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
                     p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0], axis=-1)


def qconj(q):
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qexp(v):
    """``exp(-i v . sigma)`` for rotation vectors ``v`` of shape (..., 3)."""
    norm = np.sqrt(np.sum(v * v, axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(norm > 0, np.sin(norm) / norm, 1.0)
    return np.concatenate([np.cos(norm)[..., None], v * scale[..., None]], axis=-1)


def qchain(steps):
    """Time-ordered product ``U_n ... U_1`` over axis -2 by pairwise reduction."""
    q = steps
    while q.shape[-2] > 1:
        n = q.shape[-2]
        even = n - n % 2
        paired = qmul(q[..., 1:even:2, :], q[..., 0:even:2, :])
        if n % 2:
            paired = np.concatenate([paired, q[..., -1:, :]], axis=-2)
        q = paired
    return q[..., 0, :]


def quat_to_matrix(q):
    q0, q1, q2, q3 = np.moveaxis(np.asarray(q), -1, 0)
    out = np.empty(np.shape(q0) + (2, 2), dtype=complex)
    out[..., 0, 0] = q0 - 1j * q3
    out[..., 0, 1] = -1j * q1 - q2
    out[..., 1, 0] = -1j * q1 + q2
    out[..., 1, 1] = q0 + 1j * q3
    return out


def matrix_to_quat(u):
    u = np.asarray(u)
    det = np.linalg.det(u)
    u = u / np.sqrt(det)[..., None, None]
    q0 = 0.5 * (u[..., 0, 0] + u[..., 1, 1]).real
    q3 = 0.5 * (u[..., 1, 1] - u[..., 0, 0]).imag
    q1 = -0.5 * (u[..., 0, 1] + u[..., 1, 0]).imag
    q2 = 0.5 * (u[..., 1, 0] - u[..., 0, 1]).real
    return np.stack([q0, q1, q2, q3], axis=-1)


def quat_infidelity(target, u):
    """``1 - |Tr(V^dag U)|**2 / 4`` computed without cancellation."""
    rel = qmul(qconj(target), u)
    return np.sum(rel[..., 1:] ** 2, axis=-1)


def trace_fidelity(v, u):
    """``|Tr(V^dag U)|**2 / 4`` for 2x2 unitaries."""
    return float(abs(np.trace(np.asarray(v).conj().T @ np.asarray(u))) ** 2 / 4)


# --------------------------------------------------------------------------
# noise synthesis

def component_grid(band, duration, per_decade=PER_DECADE):
    """Bin centres and widths: log-uniform, then linear once bins get wide.

    Linear bins are at most ``pi / (4 duration)`` so the oscillations of any
    filter function of that duration are sampled finely.
    """
    lo, hi = float(band[0]), float(band[1])
    if not (0 < lo < hi) or not math.isfinite(hi):
        raise SynthesisError(f"empty or unbounded synthesis band {band}")
    max_width = LINEAR_SPACING / duration
    ratio = 10 ** (1 / per_decade)
    edges = [lo]
    while edges[-1] < hi:
        step = edges[-1] * (ratio - 1)
        if step > max_width:
            break
        edges.append(min(edges[-1] * ratio, hi))
    if edges[-1] < hi:
        n_lin = int(math.ceil((hi - edges[-1]) / max_width))
        edges.extend(np.linspace(edges[-1], hi, n_lin + 1)[1:])
    edges = np.asarray(edges)
    return 0.5 * (edges[:-1] + edges[1:]), np.diff(edges)


def _amplitudes(s_phi, omega, width):
    power = np.asarray(s_phi(omega), dtype=float)
    if np.any(power < 0) or not np.all(np.isfinite(power)):
        raise SynthesisError("S_phi must be finite and non-negative on the synthesis grid")
    return np.sqrt(power * width / np.pi)


def _phases(seed, index, n_components):
    rng = np.random.default_rng([int(seed), int(index)])
    return rng.uniform(0.0, 2 * np.pi, n_components)


@dataclass(frozen=True)
class NoiseTrajectory:
    """One realisation of ``phi_N`` sampled on a uniform grid.

    The cosine components are retained so ``phi`` and ``phi_dot`` can be
    evaluated analytically at any time.
    """

    times: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray
    dt: float
    seed: tuple
    omega: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray
    source: str = ""

    def phi_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.cos(np.multiply.outer(t, self.omega) + self.phase) @ self.amplitude

    def phi_dot_at(self, t):
        t = np.asarray(t, dtype=float)
        return -np.sin(np.multiply.outer(t, self.omega) + self.phase) @ (self.amplitude * self.omega)

    def to_table(self):
        return np.column_stack([self.times, self.phi, self.phi_dot])


def synthesize_trajectory(s_phi: Callable, duration, dt, seed, band=None, lines: Sequence = (),
                          index=0, source="") -> NoiseTrajectory:
    """Draw ``phi_N`` with one-sided PSD ``s_phi`` on ``band`` (rad/s).

    ``lines`` adds discrete tones ``(w0, weight)`` carrying mean-square
    ``weight / 2 pi``.
    """
    if not dt > 0 or duration < 100 * dt:
        raise SynthesisError("need dt > 0 and duration >= 100 dt")
    omega = np.zeros(0)
    amp = np.zeros(0)
    if band is not None:
        omega, width = component_grid(band, duration)
        amp = _amplitudes(s_phi, omega, width)
    if lines:
        w_lines = np.array([w for w, _ in lines], dtype=float)
        omega = np.concatenate([omega, w_lines])
        amp = np.concatenate([amp, np.sqrt(np.array([p for _, p in lines], dtype=float) / np.pi)])
    if omega.size == 0:
        raise SynthesisError("no spectral components to synthesise")
    if dt >= np.pi / omega.max():
        raise SynthesisError(f"dt = {dt:g} s violates Nyquist for omega_max = {omega.max():g} rad/s")
    phase = _phases(seed, index, omega.size)
    times = np.arange(int(math.floor(duration / dt + 1e-9)) + 1) * dt
    arg = np.multiply.outer(times, omega) + phase
    phi = np.cos(arg) @ amp
    phi_dot = -np.sin(arg) @ (amp * omega)
    return NoiseTrajectory(times, phi, phi_dot, dt, (seed, index), omega, amp, phase, source)


@dataclass(frozen=True)
class NoiseEnsemble:
    """Realisations ``start .. start + n - 1`` sharing one frequency grid."""

    omega: np.ndarray
    amplitude: np.ndarray
    cos_coef: np.ndarray  # (n, J): a_j cos(theta_j)
    sin_coef: np.ndarray  # (n, J): a_j sin(theta_j)

    @classmethod
    def draw(cls, omega, amplitude, seed, start, n):
        phases = np.stack([_phases(seed, start + i, omega.size) for i in range(n)])
        return cls(omega, amplitude, amplitude * np.cos(phases), amplitude * np.sin(phases))

    @classmethod
    def from_trajectory(cls, traj: NoiseTrajectory):
        a, th = traj.amplitude, traj.phase
        return cls(traj.omega, a, (a * np.cos(th))[None], (a * np.sin(th))[None])

    @property
    def size(self):
        return self.cos_coef.shape[0]

    def phi(self, t):
        arg = np.multiply.outer(self.omega, np.asarray(t, dtype=float))
        return self.cos_coef @ np.cos(arg) - self.sin_coef @ np.sin(arg)

    def phi_dot(self, t):
        arg = np.multiply.outer(self.omega, np.asarray(t, dtype=float))
        w = self.omega[None, :]
        return -(self.cos_coef * w) @ np.sin(arg) - (self.sin_coef * w) @ np.cos(arg)

    def phi_dot_bound(self):
        """Largest |phi_dot| any phase assignment could give."""
        return float(np.sum(self.amplitude * self.omega))


# --------------------------------------------------------------------------
# evolution

def _step_count(seg, h_max):
    n = int(math.ceil(seg.duration / h_max - 1e-12))
    return max(n, 1)


def _max_step(seq: ControlSequence, noise: NoiseEnsemble, dt):
    rate = max([s.rabi_rate for s in seq.segments if not s.is_marker] + [0.0])
    # sample |phi_dot| on the dt grid; the analytic bound is used only when it is smaller
    grid = np.arange(0.0, seq.duration + dt, dt)
    rate_noise = min(float(np.max(np.abs(noise.phi_dot(grid)))) if noise.omega.size else 0.0,
                     noise.phi_dot_bound())
    scale = max(rate, rate_noise)
    h = dt if scale == 0 else min(dt, STEP_FACTOR / scale)
    if h < seq.duration * 1e-9:
        raise StepUnderflow(f"integration step {h:g} s is too small for duration {seq.duration:g} s")
    return h


def _marker_quat(seg, extra_phase):
    ph = seg.phase + extra_phase
    v = 0.5 * seg.marker_angle * np.stack([np.cos(ph), np.sin(ph), np.zeros_like(ph)], axis=-1)
    return qexp(v)


def _evolve_batch(seq: ControlSequence, noise: NoiseEnsemble, dt, picture):
    """Propagators for every realisation in ``noise`` as quaternions (n, 4)."""
    n = noise.size
    h_max = _max_step(seq, noise, dt)
    total = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    t = 0.0
    for seg in seq.segments:
        if seg.is_marker:
            extra = noise.phi([t])[:, 0] if picture == "carrier" else np.zeros(n)
            total = qmul(_marker_quat(seg, extra), total)
            continue
        if seg.rabi_rate == 0.0:
            if picture == "toggling":
                # free evolution commutes with itself: one exact step
                ends = noise.phi([t, t + seg.duration])
                dphi = ends[:, 1] - ends[:, 0]
                v = np.zeros((n, 3))
                v[:, 2] = -0.5 * dphi
                total = qmul(qexp(v), total)
            t += seg.duration
            continue
        m = _step_count(seg, h_max)
        h = seg.duration / m
        half_angle = 0.5 * seg.rabi_rate * h
        if picture == "toggling":
            phi = noise.phi(t + h * np.arange(m + 1))
            v = np.empty((n, m, 3))
            v[..., 0] = half_angle * np.cos(seg.phase)
            v[..., 1] = half_angle * np.sin(seg.phase)
            v[..., 2] = -0.5 * np.diff(phi, axis=1)
        else:
            phi = noise.phi(t + h * (np.arange(m) + 0.5))
            v = np.empty((n, m, 3))
            v[..., 0] = half_angle * np.cos(seg.phase + phi)
            v[..., 1] = half_angle * np.sin(seg.phase + phi)
            v[..., 2] = 0.0
        total = qmul(qchain(qexp(v)), total)
        t += seg.duration
    return total


def frame_quat(phi):
    """``V = exp(-i phi / 2 Z)``."""
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi / 2), np.zeros_like(phi), np.zeros_like(phi), np.sin(phi / 2)], axis=-1)


def carrier_to_toggling(u_carrier, phi_start, phi_end):
    """``V(tau)^dag U_carrier V(0)`` as quaternions."""
    return qmul(qmul(qconj(frame_quat(phi_end)), u_carrier), frame_quat(phi_start))


def evolve_toggling(seq: ControlSequence, traj: NoiseTrajectory, dt=None):
    if traj.times[-1] < seq.duration * (1 - 1e-12):
        raise SynthesisError("trajectory shorter than the sequence")
    q = _evolve_batch(seq, NoiseEnsemble.from_trajectory(traj), dt or traj.dt, "toggling")
    return quat_to_matrix(q[0])


def evolve_carrier(seq: ControlSequence, traj: NoiseTrajectory, dt=None):
    if traj.times[-1] < seq.duration * (1 - 1e-12):
        raise SynthesisError("trajectory shorter than the sequence")
    q = _evolve_batch(seq, NoiseEnsemble.from_trajectory(traj), dt or traj.dt, "carrier")
    return quat_to_matrix(q[0])


def carrier_as_toggling(seq: ControlSequence, traj: NoiseTrajectory, u_carrier):
    """Map a carrier-picture propagator into the toggling picture."""
    ends = traj.phi_at(np.array([0.0, seq.duration]))
    q = carrier_to_toggling(matrix_to_quat(u_carrier), ends[0], ends[1])
    return quat_to_matrix(q)


# --------------------------------------------------------------------------
# ensemble fidelity

@dataclass(frozen=True)
class EnsembleFidelity:
    mean: float
    standard_error: float
    n_realizations: int
    picture: str
    mean_infidelity: float = 0.0
    infidelity_error: float = 0.0

    @property
    def chi(self):
        """Overlap integral implied by ``F = (1 + exp(-chi)) / 2``."""
        return -math.log1p(-2 * self.mean_infidelity)

    @property
    def chi_error(self):
        return 2 * self.infidelity_error / (1 - 2 * self.mean_infidelity)


def default_dt(band, duration):
    return min(np.pi / (2 * band[1]), duration / 100)


def mc_band(spectrum: DephasingSpectrum, duration, band=None):
    lo, hi = band if band is not None else spectrum.support
    if lo <= 0:
        lo = 1e-3 / duration
    if not math.isfinite(hi):
        raise SynthesisError("Monte Carlo needs a finite upper band edge")
    return float(lo), float(hi)


def mc_fidelity(spectrum: DephasingSpectrum, seq: ControlSequence, n=10_000, seed=0, band=None,
                dt=None, picture="toggling", chunk=DEFAULT_CHUNK) -> EnsembleFidelity:
    """Mean trace fidelity to the noise-free propagator over ``n`` realisations."""
    if n < 100:
        raise ValueError("need at least 100 realisations")
    if spectrum.zero:
        return EnsembleFidelity(1.0, 0.0, n, picture)
    band = mc_band(spectrum, seq.duration, band)
    dt = dt or default_dt(band, seq.duration)
    omega, width = component_grid(band, seq.duration)
    amp = _amplitudes(phase_psd(spectrum), omega, width)
    if not np.any(amp):
        return EnsembleFidelity(1.0, 0.0, n, picture)
    target = matrix_to_quat(seq.propagator())
    infid = np.empty(n)
    for start in range(0, n, chunk):
        size = min(chunk, n - start)
        noise = NoiseEnsemble.draw(omega, amp, seed, start, size)
        u = _evolve_batch(seq, noise, dt, picture)
        if picture == "carrier":
            ends = noise.phi([0.0, seq.duration])
            u = carrier_to_toggling(u, ends[:, 0], ends[:, 1])
        infid[start:start + size] = quat_infidelity(target, u)
    mean_inf = float(np.sum(infid) / n)
    se = float(np.std(infid, ddof=1) / math.sqrt(n))
    return EnsembleFidelity(1.0 - mean_inf, se, n, picture, mean_inf, se)


def picture_agreement(spectrum: DephasingSpectrum, seq: ControlSequence, n=100, seed=0, band=None, dt=None):
    """Per-realisation fidelity between the two pictures (after the frame map)."""
    band = mc_band(spectrum, seq.duration, band)
    dt = dt or default_dt(band, seq.duration)
    omega, width = component_grid(band, seq.duration)
    amp = _amplitudes(phase_psd(spectrum), omega, width)
    noise = NoiseEnsemble.draw(omega, amp, seed, 0, n)
    u_t = _evolve_batch(seq, noise, dt, "toggling")
    u_c = _evolve_batch(seq, noise, dt, "carrier")
    ends = noise.phi([0.0, seq.duration])
    mapped = carrier_to_toggling(u_c, ends[:, 0], ends[:, 1])
    return 1.0 - quat_infidelity(u_t, mapped)
