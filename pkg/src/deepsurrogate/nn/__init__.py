"""Network core: autodiff engine, dense networks with jets, optimizer, RBF head."""
from .autodiff import NumericalError, Tensor, gradient
from .network import (DenseNetwork, Jet, forward, forward_flat, forward_jet,
                      init_dense, load_checkpoint, param_gradient,
                      save_checkpoint)
from .optimizer import OptimizerState, optimizer_step
from .rbf import (RbfExpansion, VOLTAMMETRY_DOMAIN, rbf_eval, rbf_eval_batch,
                  rbf_head, split_head_outputs)

__all__ = [
    "DenseNetwork", "Jet", "NumericalError", "OptimizerState", "RbfExpansion",
    "Tensor", "VOLTAMMETRY_DOMAIN", "forward", "forward_flat", "forward_jet",
    "gradient", "init_dense", "load_checkpoint", "optimizer_step",
    "param_gradient", "rbf_eval", "rbf_eval_batch", "rbf_head",
    "save_checkpoint", "split_head_outputs",
]
