"""Desk-scale exact simulator of continuous-variable quantum Gaussian
process regression: classical GPR oracle, one-sparse Hermitian dilation,
hybrid qubit-qumode simulation, and the end-to-end estimation pipeline."""

__version__ = "0.1.0"

from .gpr import (KernelSpec, NoiseModel, TrainingSet, CovarianceSystem,
                  PosteriorResult, kernel_eval, build_covariance_system,
                  classical_posterior, condition_number, noise_dilution)
from .dilation import (DilatedMatrix, OneSparseMatrix, OneSparseReflection,
                       OneSparseDecomposition, OracleQ, embed_khat,
                       hermitian_dilation, quantize, decompose_one_sparse,
                       build_decomposition, oracle_q, dump_decomposition)
from .hybrid import (GaussianPair, HomodyneWindow, Register, RegisterLayout,
                     DiscreteOperator, BranchedHybridState, make_squeezed_pair,
                     apply_coupled_evolution, window_project,
                     discrete_expectation, overlap_closed_form,
                     sheared_wavefunction, shear_overlap, window_overlap)
from .gridoracle import (QuadratureGrid, grid_for, squeezed_pair_grid,
                         grid_oracle_evolve, grid_covariance)
from .algorithm import (AmplitudeEncoding, encode_vector, build_joint_input,
                        TrotterSchedule, SelectedParameters, select_parameters,
                        apply_direct_unitary, fractional_query,
                        permutation_walk, readout_expectation,
                        readout_observable)
from .engine import (HybridEnsemble, exp_swap_step, run_swap_steps,
                     trace_distance, window_project_ensemble)
from .pipeline import (RunConfig, RunReport, run_mean_estimation,
                       run_variance_estimation, C_WINDOW)
from .data import load_dataset, save_dataset, generate_synthetic
