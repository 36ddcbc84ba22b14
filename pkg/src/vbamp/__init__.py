"""Vector-prior Bayesian AMP for jointly sparse recovery.

Recovery of B jointly sparse signals from MMV (shared matrix) or DCS
(independent matrices) measurements with a multivariate Bernoulli-Gauss
prior, plus the analytical machinery that predicts its performance: the
covariance state-evolution recursion, the joint decorrelation transform,
and the replica free-energy potential whose local maxima are the
algorithm's fixed points.  A single-pixel color-imaging pipeline and two
reference schemes (scalar AMP, group lasso) round out the package.
"""

from .decorrelate import Diagonalizer, joint_diagonalizer, snr_bounds, \
    transform_problem
from .denoiser import BgDenoiser, DenoiseResult, EffectiveChannel, bg_denoise, \
    bg_jacobian, conditional_covariance, mmse_oracle
from .free_energy import FreeEnergyPoint, FreeEnergySpec, free_energy, gamma, \
    predict_performance, stationary_points, zeta
from .model import DCS, MMV, BgPrior, JointSparseSignal, MeasurementEnsemble, \
    MeasurementSet, NoiseModel, ProblemInstance, generate_ensemble, \
    generate_matrix, infer_signal_covariance, measure, sample_signal
from .single_pixel import DctModel, MaskSet, convert_measurements, generate_masks, \
    nmse_db, read_ppm, synth_image, write_ppm
from .solver import EmOptions, RunOptions, RunTrace, VbampState, vbamp_em_run, \
    vbamp_iterate, vbamp_run
from .state_evolution import IntegratorSpec, SeTrajectory, se_run, se_step

__version__ = "0.1.0"
