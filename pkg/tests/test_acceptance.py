"""Acceptance criteria, one test each; the terminal summary lists PASS/FAIL per criterion."""
import time

import numpy as np
import pytest

from clockbudget.control import ControlSegment, ControlSequence, primitive_pulse, protocol_family
from clockbudget.fidelity import chi, kappa, thermal_floor, time_to_errors
from clockbudget.filterfunc import filter_function, low_freq_order, zero_frequency_coefficient
from clockbudget.fixtures import FIXTURES, load_fixture
from clockbudget.montecarlo import mc_fidelity, picture_agreement
from clockbudget.spectra import phase_psd, power_law_spectrum, sphi_to_ssb, thermal_floor_ssb, to_dephasing_psd

from oracles import brute_force_filter

TWO_PI = 2 * np.pi
PROTOCOLS = ("ramsey", "echo", "primitive-pi", "wamf-pi")


class Checks:
    """Collects named sub-checks so a failure reports all of them at once."""

    def __init__(self, budget_s):
        self.budget = budget_s
        self.start = time.perf_counter()
        self.failed = []

    def __call__(self, name, ok, detail=""):
        if not ok:
            self.failed.append(f"{name} {detail}".strip())

    def finish(self):
        elapsed = time.perf_counter() - self.start
        self("runtime", elapsed < self.budget, f"{elapsed:.1f} s >= {self.budget} s")
        assert not self.failed, "; ".join(self.failed)


def rel(a, b):
    return abs(a / b - 1)


def test_criterion_1_white_noise_identity():
    c = Checks(10)
    for name in ("ramsey", "echo"):
        for tau in (10e-9, 10e-6, 10e-3):
            for s0tau in (1e-4, 1e-2, 1.0):
                s0 = s0tau / tau
                got = chi(power_law_spectrum(s0, 0.0), protocol_family(name)(tau), (1e-6 / tau, 1e4 / tau)).chi
                c(f"{name} tau={tau:g} S0tau={s0tau:g}", rel(got, s0tau) <= 1e-3, f"chi={got:.6g}")
    c.finish()


def test_criterion_2_thermal_floor_ratios():
    c = Checks(30)
    wc = TWO_PI * 100e6
    # omega_c tau / 2 pi >= 1e4 at every bandwidth, where kappa has settled for all protocols
    tau = 100e-6

    def floor(ssb, bw_hz, name="ramsey", t=tau):
        return thermal_floor(ssb, TWO_PI * bw_hz, name, t, cross_check=False).infidelity_floor

    for name in PROTOCOLS:
        f = [floor(-174.0, b, name) for b in (1e8, 1e9, 1e10)]
        c(f"{name} bandwidth 1:10", rel(f[1] / f[0], 10) <= 0.01, f"{f[1] / f[0]:.4f}")
        c(f"{name} bandwidth 1:100", rel(f[2] / f[0], 100) <= 0.01, f"{f[2] / f[0]:.4f}")
    ratio_4k = floor(thermal_floor_ssb(290), 1e8) / floor(thermal_floor_ssb(4), 1e8)
    c("290K->4K", rel(ratio_4k, 10**1.8) <= 0.05, f"ratio {ratio_4k:.2f} vs {10**1.8:.2f}")
    echo_ratio = floor(-174.0, 1e8, "echo") / floor(-174.0, 1e8, "ramsey")
    c("echo/ramsey", rel(echo_ratio, 3) <= 0.05, f"{echo_ratio:.4f}")
    for name in PROTOCOLS:
        k1, k2 = kappa(name, wc, 100e-6), kappa(name, wc, 1e-3)
        c(f"{name} tau decade", rel(k1, k2) < 0.02, f"{k1:.5f} vs {k2:.5f}")
    absolute = floor(-174.0, 1e8)
    c("absolute 290K/100MHz", 6e-12 <= absolute <= 6e-10, f"{absolute:.3g}")
    c.finish()


def test_criterion_3_filter_order_suite():
    c = Checks(10)
    tau = 1e-3
    expect = {"ramsey": (2, 0.05), "primitive-pi": (2, 0.2), "echo": (4, 0.05), "wamf-pi": (4, 0.2)}
    for name, (order, tol) in expect.items():
        got = low_freq_order(protocol_family(name)(tau))
        c(f"{name} order", abs(got - order) <= tol, f"{got:.4f}")
    coef = zero_frequency_coefficient(primitive_pulse(np.pi, 0.0, np.pi / tau))
    c("primitive zero-frequency coefficient", rel(coef, 4 * tau**2 / np.pi**2) <= 0.01, f"{coef:.6g}")
    c.finish()


def test_criterion_4_oracle_equivalence():
    c = Checks(15 * 60)
    tau = 1e-6
    band = (1e-3 / tau, 1e2 / tau)
    for slope, label in ((2.0, "white PM"), (0.0, "white FM"), (-1.0, "flicker FM")):
        for name in PROTOCOLS:
            seq = protocol_family(name)(tau)
            base = power_law_spectrum(1.0, slope, omega_ref=1 / tau, band=band)
            target = 5e-3
            spec = base.scaled(target / chi(base, seq, band).chi)
            ff = chi(spec, seq, band).chi
            c(f"{label}/{name} chi_FF in range", 1e-3 <= ff <= 1e-2, f"{ff:.3g}")
            mc = mc_fidelity(spec, seq, n=10_000, seed=1, band=band)
            c(f"{label}/{name} MC", rel(mc.chi, ff) <= 0.2, f"chi_MC={mc.chi:.4g} chi_FF={ff:.4g}")
            worst = np.min(picture_agreement(spec, seq, n=20, seed=2, band=band))
            c(f"{label}/{name} pictures", worst >= 1 - 1e-8, f"{1 - worst:.2e}")
    c.finish()


def test_criterion_5_brute_force_filter_function():
    c = Checks(60)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        segs = []
        for _ in range(8):
            rate = 0.0 if rng.random() < 0.25 else rng.uniform(0.1, 30.0)
            segs.append(ControlSegment(rate, rng.uniform(0, TWO_PI), rng.uniform(0.02, 0.3)))
        seq = ControlSequence(segs)
        w = np.geomspace(0.1, 100, 20) / seq.duration
        g = filter_function(seq, w).T
        ref = brute_force_filter([(s.rabi_rate, s.phase, s.duration, s.marker_angle) for s in segs], w)
        # axis components can vanish individually; compare against the total
        scale = ref.sum(axis=1, keepdims=True)
        worst = max(worst, float(np.max(np.abs(g - ref) / scale)))
    c("relative agreement", worst <= 1e-6, f"worst {worst:.2e}")
    c.finish()


def test_criterion_6_fixture_behaviour():
    c = Checks(60)
    lab = to_dephasing_psd(load_fixture("labgrade-like"))
    prec = to_dephasing_psd(load_fixture("precision-like"))
    seq = protocol_family("primitive-pi")(100e-6)
    ratio = chi(lab, seq).infidelity / chi(prec, seq).infidelity
    c("precision quieter", ratio >= 1e3, f"ratio {ratio:.3g}")
    targets = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    for label, spec in (("labgrade", lab), ("precision", prec)):
        rows = time_to_errors(spec, "primitive-pi", targets)
        taus = [r.tau if r.tau is not None else np.inf for r in rows]
        c(f"{label} monotone", all(b <= a for a, b in zip(taus, taus[1:])), str(taus))
        for r in rows:
            if r.tau is None or r.below_range:
                continue
            back = chi(spec, protocol_family("primitive-pi")(r.tau)).infidelity
            c(f"{label} inversion p={r.target:g}", rel(back, r.target) <= 0.01, f"{back:.4g}")
    c.finish()


def test_criterion_7_conversion_round_trips():
    c = Checks(1)
    for name in sorted(FIXTURES):
        curve = load_fixture(name)
        spec = to_dephasing_psd(curve)
        sz = spec(curve.omega)
        s_phi = phase_psd(spec)(curve.omega)
        back = sphi_to_ssb(s_phi)
        err = np.max(np.abs(back - curve.ssb) / np.abs(curve.ssb))
        c(f"{name} round trip", err <= 1e-12, f"{err:.2e}")
        c(f"{name} S_phi", np.allclose(4 * sz / curve.omega**2, s_phi, rtol=1e-12, atol=0))
    c.finish()
