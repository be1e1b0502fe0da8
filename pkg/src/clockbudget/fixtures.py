"""Bundled synthetic phase-noise fixtures.

``CLOCKBUDGET_FIXTURES`` points at an alternative directory holding files of
the same names.
"""
from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

from .spectra import PhaseNoiseCurve, load_phase_noise_curve

ENV_VAR = "CLOCKBUDGET_FIXTURES"
FIXTURES = {
    "labgrade-like": "labgrade_like.csv",
    "precision-like": "precision_like.csv",
    "thermal-290K": "thermal_290K.csv",
}


def fixture_dir() -> Path:
    override = os.environ.get(ENV_VAR)
    if override:
        return Path(override)
    return Path(str(resources.files("clockbudget") / "data"))


def fixture_path(name) -> Path:
    fname = FIXTURES.get(name, name)
    path = fixture_dir() / fname
    if not path.is_file():
        raise FileNotFoundError(f"no fixture {name!r} at {path}")
    return path


def load_fixture(name) -> PhaseNoiseCurve:
    return load_phase_noise_curve(fixture_path(name), label=name)
