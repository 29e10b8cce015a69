"""Parameter-shift gradients of the circuit output.

Every trainable rotation here (Rx, Ry, Rz, and P up to a global phase) is
generated by an operator with eigenvalues +-1/2, so

    d<Z>/dtheta = (<Z>(theta + pi/2) - <Z>(theta - pi/2)) / 2

holds exactly. Input gradients go through the encoder phases: a feature
that appears in several encoder repetitions collects one term per
repetition.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .circuit import (
    ANGLES_PER_LAYER,
    EncoderConfig,
    QnlNetParams,
    encode_phases,
    encoder_phases,
    forward_from_phases,
    run_layers,
)
from .errors import ConfigurationError
from .statevector import expectation_z

SHIFT = np.pi / 2


@dataclass(frozen=True)
class QuantumGradient:
    d_angles: np.ndarray
    d_inputs: np.ndarray
    d_scales: np.ndarray | None = None

    def size(self) -> int:
        n = self.d_angles.size + self.d_inputs.size
        return n + (0 if self.d_scales is None else self.d_scales.size)


def _tick(evals, n=1):
    if evals is not None:
        evals["forward"] += n


def shift_grad_angle(x, cfg: EncoderConfig, ansatz: int, params: QnlNetParams, layer: int, slot: int,
                     readout: int = 0, evals: Counter | None = None) -> float:
    """d<Z>/d(angle at ``layer``, ``slot``) by two shifted evaluations."""
    if not 0 <= layer < params.reps_ansatz or not 0 <= slot < ANGLES_PER_LAYER:
        raise ConfigurationError(f"no angle at layer={layer}, slot={slot} for D={params.reps_ansatz}")
    params.check(cfg)
    phases = encoder_phases(x, cfg, params.scales)
    values = []
    for sign in (1.0, -1.0):
        angles = params.angles.copy()
        angles[layer, slot] += sign * SHIFT
        values.append(forward_from_phases(phases, ansatz, angles, readout))
    _tick(evals, 2)
    return 0.5 * (values[0] - values[1])


def _angle_gradients(phases, ansatz, angles, readout, evals):
    # Layers before the shifted one are shared between both evaluations.
    prefix = [encode_phases(phases)]
    for row in angles[:-1]:
        prefix.append(run_layers(prefix[-1], ansatz, row[None, :]))
    grads = np.zeros_like(angles)
    for layer in range(angles.shape[0]):
        for slot in range(ANGLES_PER_LAYER):
            vals = []
            for sign in (1.0, -1.0):
                shifted = angles[layer:].copy()
                shifted[0, slot] += sign * SHIFT
                vals.append(expectation_z(run_layers(prefix[layer], ansatz, shifted), readout))
            grads[layer, slot] = 0.5 * (vals[0] - vals[1])
    _tick(evals, 2 * angles.size)
    return grads


def phase_gradients(phases, ansatz: int, angles, readout: int = 0, evals: Counter | None = None) -> np.ndarray:
    """d<Z>/d(encoder phase) for every repetition and qubit."""
    phases = np.asarray(phases, dtype=float)
    grads = np.zeros_like(phases)
    for j in range(phases.shape[0]):
        for k in range(phases.shape[1]):
            vals = []
            for sign in (1.0, -1.0):
                shifted = phases.copy()
                shifted[j, k] += sign * SHIFT
                vals.append(forward_from_phases(shifted, ansatz, angles, readout))
            grads[j, k] = 0.5 * (vals[0] - vals[1])
    _tick(evals, 2 * phases.size)
    return grads


def grad_all(x, cfg: EncoderConfig, ansatz: int, params: QnlNetParams, readout: int = 0,
             evals: Counter | None = None) -> QuantumGradient:
    """Gradients with respect to the angles and inputs, plus the encoder scales when trainable."""
    params.check(cfg)
    x = np.asarray(x, dtype=float)
    phases = encoder_phases(x, cfg, params.scales)
    d_angles = _angle_gradients(phases, ansatz, params.angles, readout, evals)
    d_phase = phase_gradients(phases, ansatz, params.angles, readout, evals)
    if cfg.trainable:
        dphase_dx = params.scales
        d_scales = d_phase * x[None, :]
    else:
        dphase_dx = np.full_like(d_phase, 2.0)
        d_scales = None
    d_inputs = (d_phase * dphase_dx).sum(axis=0)
    return QuantumGradient(d_angles=d_angles, d_inputs=d_inputs, d_scales=d_scales)
