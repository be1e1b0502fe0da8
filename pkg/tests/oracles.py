"""Reference computations that share no code path with the package engine."""
import numpy as np

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (X, Y, Z)


def rotation(theta, phase):
    """exp(-i theta/2 (cos phase X + sin phase Y)) by its power series form."""
    n = np.cos(phase) * X + np.sin(phase) * Y
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * n


def _rotations(theta, phase):
    """Stack of rotation(theta_k, phase) for an array of angles."""
    theta = np.asarray(theta, dtype=float)[:, None, None]
    n = np.cos(phase) * X + np.sin(phase) * Y
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * n


def toggling_rows(segments, ts):
    """R_l(t) = Tr(U^dag Z U sigma_l) / 2 from explicit 2x2 matrix products.

    ``segments`` is a list of (rate, phase, duration, marker_angle_or_None);
    ``ts`` must be sorted.  Points on a boundary belong to the later segment
    except at the very end.  Returns shape (len(ts), 3).
    """
    ts = np.asarray(ts, dtype=float)
    out = np.empty((ts.size, 3))
    u_entry = np.eye(2, dtype=complex)
    clock = 0.0
    timed = [k for k, s in enumerate(segments) if s[3] is None]
    for k, (rate, phase, dur, marker) in enumerate(segments):
        if marker is not None:
            u_entry = rotation(marker, phase) @ u_entry
            continue
        upper = ts <= clock + dur if k == timed[-1] else ts < clock + dur
        sel = (ts >= clock) & upper
        if sel.any():
            u = _rotations(rate * (ts[sel] - clock), phase) @ u_entry
            op = np.conj(np.swapaxes(u, 1, 2)) @ Z @ u
            out[sel] = np.stack([0.5 * np.einsum("nij,ji->n", op, p).real for p in PAULIS], axis=1)
        u_entry = rotation(rate * dur, phase) @ u_entry
        clock += dur
    return out


def brute_force_filter(segments, omegas, nodes=24):
    """omega**2 |int R_l(t) exp(i omega t) dt|**2 by per-segment Gauss-Legendre quadrature.

    Each segment is split so that neither the rotation nor the largest
    Fourier phase advances by more than 0.5 rad per sub-interval.
    Returns shape (len(omegas), 3).
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    x, w = np.polynomial.legendre.leggauss(nodes)
    w_max = np.max(np.abs(omegas))
    ts, ws = [], []
    clock = 0.0
    for rate, phase, dur, marker in segments:
        if marker is not None:
            continue
        n_sub = max(1, int(np.ceil((rate + w_max) * dur / 0.5)))
        edges = np.linspace(clock, clock + dur, n_sub + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            ts.append(0.5 * (b - a) * x + 0.5 * (a + b))
            ws.append(0.5 * (b - a) * w)
        clock += dur
    ts, ws = np.concatenate(ts), np.concatenate(ws)
    rows = toggling_rows(segments, ts)
    integrals = np.exp(1j * np.outer(omegas, ts)) @ (ws[:, None] * rows)
    return omegas[:, None] ** 2 * np.abs(integrals) ** 2


def trapezoid_filter(segments, omegas, n_points=10_000):
    """Same quantity from a trapezoid rule on a uniform grid per segment."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    total = sum(d for _, _, d, m in segments if m is None)
    acc = np.zeros((omegas.size, 3), dtype=complex)
    clock = 0.0
    for rate, phase, dur, marker in segments:
        if marker is not None:
            continue
        m = max(2, int(round(n_points * dur / total)))
        ts = np.linspace(clock, clock + dur, m + 1)
        inside = ts.copy()
        inside[-1] = np.nextafter(ts[-1], -np.inf)
        # evaluate with the segment's own propagator, including its endpoint
        rows = toggling_rows(segments, inside) if clock + dur < total else toggling_rows(segments, ts)
        weights = np.full(m + 1, dur / m)
        weights[[0, -1]] *= 0.5
        acc += np.exp(1j * np.outer(omegas, ts)) @ (weights[:, None] * rows)
        clock += dur
    return omegas[:, None] ** 2 * np.abs(acc) ** 2


def ramsey_g(omega, tau):
    return 4 * np.sin(omega * tau / 2) ** 2


def echo_g(omega, tau):
    return 16 * np.sin(omega * tau / 4) ** 4


def gaussian_dephasing_infidelity(chi):
    """1 - (1 + <cos dphi>)/2 with <cos dphi> = exp(-chi) for Gaussian phase."""
    return 0.5 * (1 - np.exp(-chi))
