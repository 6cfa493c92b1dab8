"""Neural-network solutions and parametric surrogates for differential and
integral equations, classical reference solvers, and surrogate-accelerated
Bayesian inference of physical parameters."""

from . import mcmc, nn, problems, reference, trainer
from .mcmc import InferenceSpec, kde, log_likelihood, log_prior, run_chains, \
    summarize, function_band
from .nn import DenseNetwork, Jet, NumericalError, Tensor, init_dense, \
    load_checkpoint, save_checkpoint
from .problems import Box, Dataset, IntegralProblem, LossWeights, \
    PdeProblem, biot_eval, biot_prior_domain, fin_problem, \
    voltammetry_integral, voltammetry_pde
from .reference import GridSolution, gen_synthetic_data, solve_fin_fd, \
    solve_volterra_first_kind, solve_volterra_second_kind, surrogate_current
from .trainer import CollocationBatch, SurrogateModel, TrainConfig, \
    TrainingDivergence, augmented_loss, integral_loss, load_surrogate, \
    parametric_pde_loss, pde_loss, sample_batch, train, train_augmented

__version__ = "0.1.0"
