"""Loss and Adam with its learning-rate schedule, plus the full backward chain."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classical_nn import probability_grad
from .errors import DomainError, ShapeError, UsageError
from .quantum_grad import grad_all


def _check_probs(p0, p1, label):
    if not (0.0 < p0 < 1.0 and 0.0 < p1 < 1.0):
        raise DomainError(f"probabilities must lie in (0, 1), got ({p0}, {p1})")
    if label not in (0, 1):
        raise DomainError(f"label must be 0 or 1, got {label!r}")


def nll_loss(p0: float, p1: float, label: int) -> float:
    _check_probs(p0, p1, label)
    return float(-(label * np.log(p1) + (1 - label) * np.log(p0)))


def nll_grad(p0: float, p1: float, label: int):
    """``(dL/dp0, dL/dp1)``."""
    _check_probs(p0, p1, label)
    return -(1 - label) / p0, -label / p1


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0


def adam_step(state: AdamState, params, grads) -> np.ndarray:
    """One bias-corrected Adam update. Moments in ``state`` are updated in place."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape:
        raise ShapeError(f"params {params.shape} and grads {grads.shape} differ")
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    elif state.m.shape != params.shape:
        raise ShapeError(f"optimizer state has shape {state.m.shape}, params {params.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = state.m / (1 - state.beta1**state.t)
    v_hat = state.v / (1 - state.beta2**state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class LrSchedule:
    base_lr: float
    gamma: float = 0.9
    epoch: int = 0

    @property
    def lr(self) -> float:
        return self.base_lr * self.gamma**self.epoch


def lr_decay(schedule: LrSchedule) -> float:
    """Advance one epoch and return the new learning rate."""
    schedule.epoch += 1
    return schedule.lr


@dataclass
class ForwardRecord:
    """Activations cached by one forward pass of the hybrid model."""

    features: np.ndarray
    head_cache: dict
    q: float
    post: float
    p0: float
    p1: float
    extra: dict = field(default_factory=dict)


def backprop_chain(record: ForwardRecord, model, label: int) -> np.ndarray:
    """Flat gradient of the sample's NLL loss, aligned with ``model.param_vector()``.

    Loss -> probabilities -> post layer -> circuit (parameter shift, both
    angles and inputs) -> feature head.
    """
    if record is None or record.head_cache is None:
        raise UsageError("backprop_chain needs a recorded forward pass")
    dl_dp0, dl_dp1 = nll_grad(record.p0, record.p1, label)
    dp1 = probability_grad(record.p0, record.p1)
    d_post = dl_dp1 * dp1 - dl_dp0 * dp1

    grads = {}
    w = model.post.weight[0, 0]
    grads["post.weight"] = np.array([[d_post * record.q]])
    grads["post.bias"] = np.array([d_post])
    d_q = d_post * w

    qg = grad_all(record.features, model.encoder, model.ansatz, model.qparams, model.readout)
    grads["quantum.angles"] = d_q * qg.d_angles
    if qg.d_scales is not None:
        grads["quantum.scales"] = d_q * qg.d_scales
    grads.update(model.head.backward(record.head_cache, d_q * qg.d_inputs))
    return model.flatten(grads)
