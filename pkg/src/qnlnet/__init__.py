"""Hybrid quantum-classical binary image classifier built on a four-qubit non-local block."""

from .circuit import CX_PATTERNS, EncoderConfig, QnlNetParams, ansatz_layer, encode, forward
from .classical_nn import CnnHead, PcaHead, PcaModel, pca_fit, pca_transform, to_probabilities
from .harness import RunConfig, TrainState, evaluate, load_checkpoint, save_checkpoint, sweep, train
from .loss_optim import AdamState, LrSchedule, adam_step, backprop_chain, lr_decay, nll_grad, nll_loss
from .model import HybridModel
from .quantum_grad import QuantumGradient, grad_all, shift_grad_angle
from .statevector import StateVector, apply_1q, apply_cx, expectation_z, zero_state

__version__ = "0.1.0"

__all__ = [
    "CX_PATTERNS", "EncoderConfig", "QnlNetParams", "ansatz_layer", "encode", "forward",
    "CnnHead", "PcaHead", "PcaModel", "pca_fit", "pca_transform", "to_probabilities",
    "RunConfig", "TrainState", "evaluate", "load_checkpoint", "save_checkpoint", "sweep", "train",
    "AdamState", "LrSchedule", "adam_step", "backprop_chain", "lr_decay", "nll_grad", "nll_loss",
    "HybridModel", "QuantumGradient", "grad_all", "shift_grad_angle",
    "StateVector", "apply_1q", "apply_cx", "expectation_z", "zero_state",
]
