"""The four-qubit QNL-Net circuit: phase encoder, entangling ansatz, Z readout."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError
from .statevector import (
    StateVector,
    apply_1q,
    apply_cx,
    count_gate,
    expectation_z,
    gate_h,
    gate_p,
    gate_rx,
    gate_ry,
    gate_rz,
    zero_state,
)

N_QUBITS = 4
ANGLES_PER_LAYER = 5
ENCODER_MODES = ("data_bound", "trainable_scale")
DEFAULT_SCALE = 2.0

# Rotations opening each layer: (gate, qubit) for angle slots 0..3.
# Slot 4 is the closing Rz on qubit 0.
LAYER_ROTATIONS = (("rz", 0), ("ry", 1), ("ry", 2), ("rx", 3))
FINAL_ROTATION = ("rz", 0)

# (control, target) pairs in execution order. Operator products are read
# right to left, so C_X(q1 q2) C_X(q2 q3) C_X(q3 q0) runs CX(3->0) first.
CX_PATTERNS = {
    0: ((3, 0), (2, 3), (1, 2)),  # cyclic
    1: ((1, 0), (2, 1), (3, 2)),  # reverse linear chain
    2: ((2, 0), (3, 2), (1, 3)),  # mixed
}

_ROTATION_GATES = {"rx": gate_rx, "ry": gate_ry, "rz": gate_rz}


@dataclass(frozen=True)
class EncoderConfig:
    n_qubits: int = N_QUBITS
    reps: int = 1
    mode: str = "data_bound"

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigurationError(f"encoder reps must be >= 1, got {self.reps}")
        if self.mode not in ENCODER_MODES:
            raise ConfigurationError(f"encoder mode must be one of {ENCODER_MODES}, got {self.mode!r}")
        if not 1 <= self.n_qubits <= 8:
            raise ConfigurationError(f"encoder n_qubits out of range: {self.n_qubits}")

    @property
    def trainable(self) -> bool:
        return self.mode == "trainable_scale"


def check_ansatz(ansatz) -> int:
    if ansatz not in CX_PATTERNS:
        raise ConfigurationError(f"ansatz id must be 0, 1 or 2, got {ansatz!r}")
    return int(ansatz)


@dataclass
class QnlNetParams:
    """Trainable circuit parameters.

    ``angles`` has one row of five angles per ansatz layer. ``scales`` holds
    per-repetition encoder multipliers and is only used in
    ``trainable_scale`` mode.
    """

    angles: np.ndarray
    scales: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.angles = np.array(self.angles, dtype=float, ndmin=2)
        if self.angles.ndim != 2 or self.angles.shape[1] != ANGLES_PER_LAYER or self.angles.shape[0] < 1:
            raise ShapeError(f"angles must have shape (D, 5), got {self.angles.shape}")
        if self.scales is not None:
            self.scales = np.array(self.scales, dtype=float, ndmin=2)

    @property
    def reps_ansatz(self) -> int:
        return self.angles.shape[0]

    @classmethod
    def initial(cls, reps_ansatz, cfg: EncoderConfig, rng=None, spread=0.1):
        """Angles uniform in [-spread, spread]; encoder scales start at 2."""
        rng = np.random.default_rng() if rng is None else rng
        angles = rng.uniform(-spread, spread, size=(reps_ansatz, ANGLES_PER_LAYER))
        scales = np.full((cfg.reps, cfg.n_qubits), DEFAULT_SCALE) if cfg.trainable else None
        return cls(angles, scales)

    def copy(self) -> "QnlNetParams":
        return QnlNetParams(self.angles.copy(), None if self.scales is None else self.scales.copy())

    def check(self, cfg: EncoderConfig) -> None:
        if cfg.trainable:
            if self.scales is None:
                raise ConfigurationError("trainable_scale encoder requires scales")
            if self.scales.shape != (cfg.reps, cfg.n_qubits):
                raise ShapeError(f"scales must have shape {(cfg.reps, cfg.n_qubits)}, got {self.scales.shape}")


def encoder_phases(x, cfg: EncoderConfig, scales=None) -> np.ndarray:
    """Phase angles fed to the P gates, one row per encoder repetition."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.n_qubits,):
        raise ShapeError(f"expected {cfg.n_qubits} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("features must be finite")
    if cfg.trainable:
        if scales is None:
            raise ConfigurationError("trainable_scale encoder requires scales")
        scales = np.asarray(scales, dtype=float)
        if scales.shape != (cfg.reps, cfg.n_qubits):
            raise ShapeError(f"scales must have shape {(cfg.reps, cfg.n_qubits)}, got {scales.shape}")
        return scales * x
    return np.tile(2.0 * x, (cfg.reps, 1))


def encode_phases(phases, counter: Counter | None = None) -> StateVector:
    """Run ``[H on all qubits, then P(phase_k) on qubit k]`` once per row."""
    phases = np.asarray(phases, dtype=float)
    n = phases.shape[1]
    state = zero_state(n)
    h = gate_h()
    for row in phases:
        for q in range(n):
            state = apply_1q(state, h, q)
            count_gate(counter, "h")
        for q in range(n):
            state = apply_1q(state, gate_p(row[q]), q)
            count_gate(counter, "p")
    return state


def encode(x, cfg: EncoderConfig, scales=None, counter: Counter | None = None) -> StateVector:
    return encode_phases(encoder_phases(x, cfg, scales), counter)


def ansatz_layer(state: StateVector, ansatz: int, angles, counter: Counter | None = None) -> StateVector:
    """One layer: four rotations, the ansatz's three CX gates, a closing Rz on qubit 0."""
    if state.n_qubits != N_QUBITS:
        raise ConfigurationError(f"the ansatz is wired for {N_QUBITS} qubits, state has {state.n_qubits}")
    pattern = CX_PATTERNS[check_ansatz(ansatz)]
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (ANGLES_PER_LAYER,):
        raise ShapeError(f"layer needs 5 angles, got shape {angles.shape}")
    for (name, q), theta in zip(LAYER_ROTATIONS, angles[:4]):
        state = apply_1q(state, _ROTATION_GATES[name](theta), q)
        count_gate(counter, name)
    for control, target in pattern:
        state = apply_cx(state, control, target)
        count_gate(counter, "cx")
    name, q = FINAL_ROTATION
    state = apply_1q(state, _ROTATION_GATES[name](angles[4]), q)
    count_gate(counter, name)
    return state


def run_layers(state: StateVector, ansatz: int, angles, counter: Counter | None = None) -> StateVector:
    for row in np.asarray(angles, dtype=float):
        state = ansatz_layer(state, ansatz, row, counter)
    return state


def forward(x, cfg: EncoderConfig, ansatz: int, params: QnlNetParams, readout: int = 0,
            counter: Counter | None = None) -> float:
    """<Z> at the readout qubit after the encoder and ``D`` ansatz layers."""
    params.check(cfg)
    state = encode(x, cfg, params.scales, counter)
    state = run_layers(state, ansatz, params.angles, counter)
    return expectation_z(state, readout)


def forward_from_phases(phases, ansatz: int, angles, readout: int = 0,
                        counter: Counter | None = None) -> float:
    state = run_layers(encode_phases(phases, counter), ansatz, angles, counter)
    return expectation_z(state, readout)
