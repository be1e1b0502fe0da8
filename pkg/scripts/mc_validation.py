"""Monte Carlo oracle against the filter-function overlap for three noise classes."""
import argparse
import time

from clockbudget.control import PROTOCOLS, protocol_family
from clockbudget.fidelity import chi
from clockbudget.montecarlo import mc_fidelity, picture_agreement
from clockbudget.spectra import power_law_spectrum

SPECTRA = {"white-pm": 2.0, "white-fm": 0.0, "flicker-fm": -1.0}  # slope of S_z


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tau", type=float, default=1e-6)
    ap.add_argument("--chi", type=float, default=5e-3, help="filter-function chi to scale each spectrum to")
    ap.add_argument("-n", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    tau = args.tau
    band = (1e-3 / tau, 1e2 / tau)
    print("spectrum,protocol,chi_ff,chi_mc,chi_mc_stderr,relative_deviation,worst_picture_infidelity,seconds")
    for label, slope in SPECTRA.items():
        for proto in PROTOCOLS:
            seq = protocol_family(proto)(tau)
            base = power_law_spectrum(1.0, slope, omega_ref=1 / tau, band=band)
            spec = base.scaled(args.chi / chi(base, seq, band).chi)
            t0 = time.perf_counter()
            r = mc_fidelity(spec, seq, n=args.n, seed=args.seed, band=band)
            worst = 1 - picture_agreement(spec, seq, n=20, seed=args.seed + 1, band=band).min()
            print(f"{label},{proto},{args.chi:.4g},{r.chi:.4g},{r.chi_error:.2g},{r.chi / args.chi - 1:+.3f},"
                  f"{worst:.1e},{time.perf_counter() - t0:.1f}", flush=True)


if __name__ == "__main__":
    main()
