"""``clockbudget`` command line: datasheet -> spectrum -> gate-error tables.

Every command resolves its parameters (flags > ``--config`` JSON > defaults),
records them in a JSON run manifest and writes delimited text whose first
line is ``# manifest-sha256: <digest>``.  ``clockbudget rerun MANIFEST``
replays a run and reproduces the output bytes.

Exit status: 0 success (possibly with flagged rows), 1 input error,
2 numeric failure.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .control import CalibrationError, SequenceError, protocol_family, PROTOCOLS
from .fidelity import DEFAULT_BAND, TAU_RANGE, chi, infidelity_curve, thermal_floor, time_to_errors
from .filterfunc import FilterOrderError
from .fixtures import FIXTURES, fixture_path
from .montecarlo import StepUnderflow, SynthesisError, mc_fidelity
from .quadrature import NonFiniteIntegrand
from .spectra import (CurveError, FitError, PowerLawModel, fit_power_law_segments, load_phase_noise_curve,
                      power_law_spectrum, ssb_to_sz, thermal_floor_ssb, to_dephasing_psd, zero_spectrum)

log = logging.getLogger("clockbudget")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
ORACLE_RTOL = 0.2
SYNTHETIC = {"white-pm": 2.0, "white-fm": 0.0, "flicker-fm": -1.0}
DEFAULTS = {
    "band_min_hz": DEFAULT_BAND[0] / (2 * np.pi),
    "band_max_hz": DEFAULT_BAND[1] / (2 * np.pi),
    "rtol": 1e-7,
    "tau_min_s": TAU_RANGE[0],
    "tau_max_s": TAU_RANGE[1],
    "tau_points": 41,
    "tau_s": 10e-6,
    "realizations": 10_000,
    "seed": 0,
    "targets": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
    "carrier_power_dbm": 0.0,
    "bandwidth_hz": [1e8, 1e9, 1e10],
    "per_decade": 4,
}
# keys that never influence the primary output
UNHASHED = ("out", "manifest")


class InputError(Exception):
    pass


# --------------------------------------------------------------------------
# spectrum sources

def _digest_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def resolve_source(source):
    """Map a spectrum argument to (kind, path or None)."""
    if source.startswith("synthetic:") or source == "zero":
        return "synthetic", None
    if source in FIXTURES:
        try:
            return "fixture", str(fixture_path(source))
        except FileNotFoundError as exc:
            raise InputError(str(exc)) from None
    if not os.path.isfile(source):
        raise InputError(f"cannot read spectrum source {source!r}: no such file")
    return ("model" if source.endswith(".json") else "curve"), source


def load_spectrum(source):
    """Spectrum plus, for tabulated input, its tabulated omega range."""
    kind, path = resolve_source(source)
    if kind == "synthetic":
        if source == "zero":
            return zero_spectrum(), None
        parts = source.split(":")
        name = parts[1] if len(parts) > 1 else ""
        if name == "zero":
            return zero_spectrum(), None
        if name not in SYNTHETIC or len(parts) > 3:
            raise InputError(f"unknown synthetic spectrum {source!r}; use synthetic:{{{','.join(SYNTHETIC)}}}[:LEVEL]")
        level = float(parts[2]) if len(parts) == 3 else 1.0
        return power_law_spectrum(level, SYNTHETIC[name]), None
    try:
        if kind == "model":
            with open(path, encoding="utf-8") as fh:
                model = PowerLawModel.from_dict(json.load(fh))
            return to_dephasing_psd(model), model.omega_range
        curve = load_phase_noise_curve(path, label=source)
    except CurveError as exc:
        where = f" (row {exc.row})" if exc.row is not None else ""
        raise InputError(f"{path}{where}: {exc}") from None
    except (KeyError, ValueError, FitError) as exc:
        raise InputError(f"{path}: {exc}") from None
    return to_dephasing_psd(curve), curve.omega_range


def input_digests(params):
    out = {}
    for key in ("input", "spectrum"):
        src = params.get(key)
        if src is None:
            continue
        _, path = resolve_source(src)
        if path is not None:
            out[src] = _digest_file(path)
    return out


# --------------------------------------------------------------------------
# formatting

def _num(x):
    return f"{x:.12g}"


def _table(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_num(v) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")
    return buf.getvalue()


def _band(params):
    lo, hi = 2 * np.pi * params["band_min_hz"], 2 * np.pi * params["band_max_hz"]
    if not 0 < lo < hi:
        raise InputError("band must satisfy 0 < band-min < band-max")
    return lo, hi


def _warn_extrapolation(params, tabulated):
    if params.get("tau_max_s", 0) > TAU_RANGE[1]:
        warnings.warn("tau beyond 100 ms: low-frequency extrapolation of the spectrum dominates", UserWarning)
    if tabulated is not None:
        lo, hi = _band(params)
        if hi > tabulated[1] * (1 + 1e-12) or lo < tabulated[0] * (1 - 1e-12):
            warnings.warn("band extends beyond the tabulated phase-noise range; "
                          "the spectrum is extrapolated with its terminal slopes", UserWarning)


# --------------------------------------------------------------------------
# commands; each returns the primary output text

def _load_curve(source):
    kind, path = resolve_source(source)
    if kind not in ("fixture", "curve"):
        raise InputError(f"{source!r} is not a phase-noise table")
    try:
        return load_phase_noise_curve(path, label=source)
    except CurveError as exc:
        where = f" (row {exc.row})" if exc.row is not None else ""
        raise InputError(f"{path}{where}: {exc}") from None


def cmd_convert(params):
    if params.get("model"):
        return cmd_fit(params)
    curve = _load_curve(params["input"])
    w = curve.omega
    rows = [(wi, li, si) for wi, li, si in zip(w, curve.ssb, ssb_to_sz(w, curve.ssb))]
    return _table(["omega_rad_s", "L_dBc_per_Hz", "S_z_rad2_s-2_per_Hz"], rows)


def cmd_fit(params):
    curve = _load_curve(params["input"])
    bps = [2 * np.pi * f for f in params.get("breakpoints_hz") or ()]
    try:
        model = fit_power_law_segments(curve, bps)
    except FitError as exc:
        raise InputError(str(exc)) from None
    doc = model.to_dict()
    doc["max_residual_db"] = max(s.residual_db for s in model.segments)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _tau_grid(params):
    t_lo, t_hi, n = params["tau_min_s"], params["tau_max_s"], int(params["tau_points"])
    if not (0 < t_lo <= t_hi) or n < 1:
        raise InputError("need 0 < tau-min <= tau-max and tau-points >= 1")
    if t_lo < TAU_RANGE[0]:
        raise InputError(f"tau-min below {TAU_RANGE[0]:g} s")
    return np.geomspace(t_lo, t_hi, n) if n > 1 else np.array([t_lo])


def cmd_infidelity(params):
    spectrum, tabulated = load_spectrum(params["spectrum"])
    _warn_extrapolation(params, tabulated)
    band = _band(params)
    taus = _tau_grid(params)
    rows = []
    for name in params["protocol"]:
        curve = infidelity_curve(spectrum, name, taus, band)
        for tau, c, inf, flagged in curve.rows():
            rows.append((name, tau, c, inf, int(flagged)))
    return _table(["protocol", "tau_s", "chi_dimensionless", "infidelity_dimensionless", "quadrature_flagged"],
                  rows)


def cmd_thermal_floor(params):
    if params.get("floor_dbc") is not None:
        floor = float(params["floor_dbc"])
    elif params.get("temperature_k") is not None:
        try:
            floor = thermal_floor_ssb(params["temperature_k"], params["carrier_power_dbm"])
        except ValueError as exc:
            raise InputError(str(exc)) from None
    else:
        raise InputError("give --temperature or --floor-dbc")
    tau = params["tau_s"]
    rows = []
    for name in params["protocol"]:
        for bw in params["bandwidth_hz"]:
            if not bw > 0:
                raise InputError("bandwidths must be positive")
            r = thermal_floor(floor, 2 * np.pi * bw, name, tau, cross_check=False)
            rows.append((name, float(bw), floor, tau, r.kappa, r.chi_min, r.infidelity_floor, int(r.valid)))
    return _table(["protocol", "bandwidth_hz", "floor_dBc_per_Hz", "tau_s", "kappa_dimensionless",
                   "chi_min_dimensionless", "infidelity_floor_dimensionless", "valid"], rows)


def cmd_qec_budget(params):
    spectrum, tabulated = load_spectrum(params["spectrum"])
    _warn_extrapolation(params, tabulated)
    targets = [float(p) for p in params["targets"]]
    if any(not 0 < p < 0.5 for p in targets):
        raise InputError("targets must lie in (0, 0.5)")
    band = _band(params)
    rows = []
    for name in params["protocol"]:
        results = time_to_errors(spectrum, name, targets, band,
                                 (params["tau_min_s"], params["tau_max_s"]), params["per_decade"])
        for r in results:
            tau = r.label() if r.tau is None or r.below_range else _num(r.tau)
            inf = "nan" if r.infidelity is None else _num(r.infidelity)
            rows.append((name, _num(r.target), tau, inf, int(r.multi_crossing)))
    return _table(["protocol", "target_infidelity_dimensionless", "tau_s", "infidelity_at_tau_dimensionless",
                   "multi_crossing"], rows)


def cmd_validate(params):
    spectrum, _ = load_spectrum(params["spectrum"])
    n = int(params["realizations"])
    if n < 100:
        raise InputError("need at least 100 realizations")
    tau = params["tau_s"]
    lo = 2 * np.pi * params["band_min_hz"] if params.get("band_min_hz") is not None else 1e-3 / tau
    hi = 2 * np.pi * params["band_max_hz"] if params.get("band_max_hz") is not None else 1e2 / tau
    if not 0 < lo < hi:
        raise InputError("band must satisfy 0 < band-min < band-max")
    band = (lo, hi)
    seq = protocol_family(params["protocol"][0])(tau)
    ff = chi(spectrum, seq, band, params["rtol"]).chi
    if params.get("target_chi") is not None:
        if ff == 0:
            raise InputError("cannot rescale a spectrum with zero overlap to a target chi")
        spectrum = spectrum.scaled(params["target_chi"] / ff)
        ff = params["target_chi"]
    result = mc_fidelity(spectrum, seq, n=n, seed=int(params["seed"]), band=band)
    dev = (result.chi - ff) / ff if ff else 0.0
    ok = abs(dev) <= ORACLE_RTOL
    lines = [
        f"protocol,{params['protocol'][0]}",
        f"tau_s,{_num(tau)}",
        f"band_rad_s,{_num(band[0])};{_num(band[1])}",
        f"realizations,{n}",
        f"seed,{int(params['seed'])}",
        f"chi_ff_dimensionless,{_num(ff)}",
        f"chi_mc_dimensionless,{_num(result.chi)}",
        f"chi_mc_stderr_dimensionless,{_num(result.chi_error)}",
        f"relative_deviation_dimensionless,{_num(dev)}",
        f"tolerance_dimensionless,{_num(ORACLE_RTOL)}",
        f"result,{'PASS' if ok else 'FAIL'}",
    ]
    return "\n".join(lines) + "\n", EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "convert": cmd_convert,
    "fit": cmd_fit,
    "infidelity": cmd_infidelity,
    "thermal-floor": cmd_thermal_floor,
    "qec-budget": cmd_qec_budget,
    "validate": cmd_validate,
}


# --------------------------------------------------------------------------
# manifests

def manifest_for(command, params):
    core = {k: v for k, v in params.items() if k not in UNHASHED}
    doc = {
        "command": command,
        "parameters": core,
        "input_digests": input_digests(params),
        "tool_version": __version__,
        "seed": params.get("seed"),
        "band_hz": [params.get("band_min_hz"), params.get("band_max_hz")],
        "tolerances": {"rtol": params.get("rtol"), "oracle_rtol": ORACLE_RTOL},
    }
    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
    return doc, digest


def _emit(text, digest, out, json_output):
    if json_output:
        doc = json.loads(text)
        doc["manifest_sha256"] = digest
        payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        payload = f"# manifest-sha256: {digest}\n" + text
    if out:
        Path(out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def execute(command, params):
    doc, digest = manifest_for(command, params)
    result = COMMANDS[command](params)
    text, status = result if isinstance(result, tuple) else (result, EXIT_OK)
    json_output = command == "fit" or (command == "convert" and params.get("model"))
    _emit(text, digest, params.get("out"), json_output)
    manifest_path = params.get("manifest") or (params["out"] + ".manifest.json" if params.get("out") else None)
    if manifest_path:
        Path(manifest_path).write_text(json.dumps({**doc, "manifest_sha256": digest}, indent=2, sort_keys=True)
                                       + "\n", encoding="utf-8")
    if status == EXIT_NUMERIC:
        print("error: Monte Carlo oracle disagrees with the filter-function result", file=sys.stderr)
    return status


def rerun(manifest_path, out=None):
    try:
        doc = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
        command, params = doc["command"], dict(doc["parameters"])
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read manifest {manifest_path!r}: {exc}") from None
    if command not in COMMANDS:
        raise InputError(f"manifest names unknown command {command!r}")
    current = input_digests(params)
    if current != doc.get("input_digests", {}):
        raise InputError("input files changed since the manifest was written")
    params["out"] = out
    params["manifest"] = None
    return execute(command, params)


# --------------------------------------------------------------------------
# argument parsing

def _floats(text):
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    common.add_argument("--config", help="JSON document presetting band, tolerances and other options")
    common.add_argument("-v", "--verbose", action="store_true")

    band = argparse.ArgumentParser(add_help=False)
    band.add_argument("--band-min", dest="band_min_hz", type=float, help="lower band edge, Hz")
    band.add_argument("--band-max", dest="band_max_hz", type=float, help="upper band edge, Hz")
    band.add_argument("--rtol", type=float, help="quadrature relative tolerance")

    proto = argparse.ArgumentParser(add_help=False)
    proto.add_argument("--protocol", nargs="+", choices=PROTOCOLS, default=None)

    parser = argparse.ArgumentParser(prog="clockbudget", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", parents=[common], help="phase-noise table -> S_z table")
    p.add_argument("input")
    p.add_argument("--model", action="store_true", help="emit a fitted power-law model document instead")
    p.add_argument("--breakpoints-hz", dest="breakpoints_hz", type=_floats)

    p = sub.add_parser("fit", parents=[common], help="fit a piecewise power-law model")
    p.add_argument("input")
    p.add_argument("--breakpoints-hz", dest="breakpoints_hz", type=_floats)

    p = sub.add_parser("infidelity", parents=[common, band, proto], help="infidelity versus tau")
    p.add_argument("spectrum", help="fixture name, phase-noise file, model .json or synthetic:KIND[:LEVEL]")
    p.add_argument("--tau-min", dest="tau_min_s", type=float)
    p.add_argument("--tau-max", dest="tau_max_s", type=float)
    p.add_argument("--tau-points", dest="tau_points", type=int)

    p = sub.add_parser("thermal-floor", parents=[common, proto], help="thermal-noise gate-error floor")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--temperature", dest="temperature_k", type=float, help="K")
    g.add_argument("--floor-dbc", dest="floor_dbc", type=float, help="dBc/Hz")
    p.add_argument("--carrier-power", dest="carrier_power_dbm", type=float, help="dBm")
    p.add_argument("--bandwidth", dest="bandwidth_hz", type=_floats, help="Hz, comma separated")
    p.add_argument("--tau", dest="tau_s", type=float, help="s")

    p = sub.add_parser("qec-budget", parents=[common, band, proto], help="time to reach target error rates")
    p.add_argument("spectrum")
    p.add_argument("--targets", type=_floats)
    p.add_argument("--tau-min", dest="tau_min_s", type=float)
    p.add_argument("--tau-max", dest="tau_max_s", type=float)

    p = sub.add_parser("validate", parents=[common, band, proto], help="Monte Carlo oracle check")
    p.add_argument("spectrum")
    p.add_argument("--tau", dest="tau_s", type=float)
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--target-chi", dest="target_chi", type=float,
                   help="rescale the spectrum so the filter-function chi equals this value")

    p = sub.add_parser("rerun", help="replay a run manifest")
    p.add_argument("manifest_file")
    p.add_argument("--out")
    return parser


def resolve_params(args):
    config = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config {args.config!r}: {exc}") from None
        if not isinstance(config, dict):
            raise InputError("config must be a JSON object")
    # validate defaults to a band tied to tau, so no global band default there
    no_default = {"band_min_hz", "band_max_hz"} if args.command == "validate" else set()
    params = {}
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose"):
            continue
        if value is None:
            value = config.get(key)
        if value is None and key not in no_default:
            value = DEFAULTS.get(key)
        params[key] = value
    if "protocol" in params:
        proto = params["protocol"] or config.get("protocol") or ["ramsey"]
        params["protocol"] = [proto] if isinstance(proto, str) else list(proto)
        unknown = [p for p in params["protocol"] if p not in PROTOCOLS]
        if unknown:
            raise InputError(f"unknown protocol(s) {unknown}")
    if args.command == "qec-budget":
        params["per_decade"] = int(config.get("per_decade", DEFAULTS["per_decade"]))
    return params


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                if args.command == "rerun":
                    return rerun(args.manifest_file, args.out)
                return execute(args.command, resolve_params(args))
            finally:
                for w in caught:
                    print(f"warning: {w.message}", file=sys.stderr)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SequenceError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CalibrationError, NonFiniteIntegrand, StepUnderflow, SynthesisError, FilterOrderError,
            FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
