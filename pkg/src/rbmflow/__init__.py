"""Ising Monte Carlo, RBM training and RBM-flow fixed points."""

from .fitkit import FitResult, extrapolate, fit_emin_law, parameter_trend
from .flow import (FixedPointEstimate, FlowConfig, FlowTrajectory, SweepResult, find_fixed_point,
                   flow_from_temperature, nh_grid, run_flow, sweep_nh)
from .lattice import (Lattice, SpinConfig, energy_per_site, flip_delta, lattice, magnetization,
                      total_energy)
from .rbm import (RbmModel, TrainConfig, TrainReport, cd1_update, hidden_expectation, reconstruct,
                  sample_binary, train, visible_expectation)
from .sampler import (Dataset, SamplerParams, equilibrate, generate_dataset, metropolis_step,
                      n_conf_for, temperature_grid)
from .spectral import (SpectralReport, classify, classify_pattern, eigenvalue_gap_profile,
                       nonrandom_ratio, weight_spectrum)
from .thermometer import CalibrationCurve, calibrate, estimate_temperature

__version__ = "0.1.0"
