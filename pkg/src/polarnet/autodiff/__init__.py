"""Tape-based reverse-mode differentiation, parameters and optimizers."""
from .gradcheck import GradCheckReport, grad_check
from .params import Optimizer, OptimizerConfig, ParamStore
from .tape import Tape, Var, backward
from .training import TrainConfig, evaluate, forward, recalibrate_batch_norm, train_loop, train_step

__all__ = [
    "GradCheckReport", "Optimizer", "OptimizerConfig", "ParamStore", "Tape", "TrainConfig", "Var",
    "backward", "evaluate", "forward", "grad_check", "recalibrate_batch_norm", "train_loop", "train_step",
]
