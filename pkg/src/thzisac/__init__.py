"""Antenna selection and beam-squint-compensated hybrid beamforming for
wideband THz integrated sensing-and-communications arrays."""

from .config import ConfigError, SystemConfig, load_config, save_config
from .scenario import (ChannelSet, Scenario, echo_signal, eta, generate_channel,
                       load_scenario, los_gain, nlos_gain, sample_scenario,
                       save_scenario, sensing_steering_matrix, steering_vector,
                       subcarrier_frequency)
from .beamformer import (HybridBeamformer, JscBeamformer, ManifoldState,
                         baseband_ls, bsc_update_baseband,
                         comms_beamformer_full, design_directions,
                         design_hybrid, euclidean_gradient, fd_jsc_beamformer,
                         jsc_combine, manifold_cg_step, procrustes_update,
                         riemannian_gradient, sd_analog, sd_analog_steered)
from .selection import (GroupConfig, SelectionBudgetError, SelectionResult,
                        SubarrayConfig, array_gain, array_gain_profile,
                        count_configs, dirichlet_sinc, exhaustive_select,
                        full_subarrays, gss_subarrays, rank_combination,
                        sequential_select, spectral_efficiency,
                        subarray_from_indices, subarray_from_rank,
                        subarray_overlap, unrank_combination)
from .experiments import (SweepSpec, evaluate_selection_robustness,
                          export_dataset, run_sweep)

__version__ = "0.1.0"
