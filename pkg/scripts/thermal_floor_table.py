"""Thermal-noise gate-error floors across bandwidths, temperatures and protocols."""
import argparse

import numpy as np

from clockbudget.control import PROTOCOLS
from clockbudget.fidelity import thermal_floor
from clockbudget.spectra import thermal_floor_ssb


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tau", type=float, default=100e-6, help="gate time, s")
    ap.add_argument("--temperatures", type=float, nargs="+", default=[290.0, 4.0])
    ap.add_argument("--bandwidths", type=float, nargs="+", default=[1e8, 1e9, 1e10])
    args = ap.parse_args()

    print("temperature_K,bandwidth_hz,protocol,floor_dBc_per_Hz,kappa,infidelity_floor,valid")
    for temp in args.temperatures:
        ssb = thermal_floor_ssb(temp)
        for bw in args.bandwidths:
            for proto in PROTOCOLS:
                r = thermal_floor(ssb, 2 * np.pi * bw, proto, args.tau, cross_check=False)
                print(f"{temp:g},{bw:g},{proto},{ssb:.3f},{r.kappa:.5f},{r.infidelity_floor:.3g},{int(r.valid)}")


if __name__ == "__main__":
    main()
