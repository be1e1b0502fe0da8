"""Gate time at which LO-induced infidelity reaches typical error-correction targets."""
import argparse

from clockbudget.fidelity import time_to_errors
from clockbudget.fixtures import load_fixture
from clockbudget.spectra import to_dephasing_psd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fixtures", nargs="+", default=["labgrade-like", "precision-like"])
    ap.add_argument("--protocols", nargs="+", default=["primitive-pi", "wamf-pi"])
    ap.add_argument("--targets", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    args = ap.parse_args()

    print("fixture,protocol,target,tau_s,multi_crossing")
    for name in args.fixtures:
        spec = to_dephasing_psd(load_fixture(name))
        for proto in args.protocols:
            for r in time_to_errors(spec, proto, args.targets):
                tau = r.label() if r.tau is None or r.below_range else f"{r.tau:.3g}"
                print(f"{name},{proto},{r.target:g},{tau},{int(r.multi_crossing)}", flush=True)


if __name__ == "__main__":
    main()
