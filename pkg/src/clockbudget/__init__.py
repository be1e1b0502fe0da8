"""Error budgets for qubit gates limited by local-oscillator phase noise."""
from .control import (ControlSegment, ControlSequence, ProtocolFamily, calibrate_wamf, primitive_pulse,
                      protocol_family, ramsey, spin_echo, wamf_pi)
from .fidelity import (ChiResult, chi, infidelity_curve, kappa, thermal_floor, time_to_error)
from .filterfunc import FilterFunctionSet, filter_function, low_freq_order, toggling_frame_trajectory
from .montecarlo import EnsembleFidelity, NoiseTrajectory, evolve_carrier, evolve_toggling, mc_fidelity, \
    synthesize_trajectory
from .spectra import (DephasingSpectrum, PhaseNoiseCurve, PowerLawModel, fit_power_law_segments,
                      interpolate_ssb, load_phase_noise_curve, phase_psd, thermal_floor_spectrum,
                      thermal_floor_ssb, to_dephasing_psd)

__version__ = "0.1.0"
