"""Dense statevector simulator for small registers.

Qubit ``k`` is bit ``k`` of the basis-state index (little-endian), so the
amplitude of ``|q3 q2 q1 q0>`` lives at index ``q0 + 2*q1 + 4*q2 + 8*q3``.
Expectations are computed exactly from amplitudes; there is no sampling.
"""

from __future__ import annotations

from collections import Counter
from functools import lru_cache
from math import cos, sin, sqrt

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 8

_H = np.array([[1, 1], [1, -1]], dtype=complex) / sqrt(2)


class StateVector:
    """``2**n_qubits`` complex amplitudes of an ``n_qubits`` register."""

    __slots__ = ("n_qubits", "amps")

    def __init__(self, amps, n_qubits=None):
        amps = np.asarray(amps, dtype=complex)
        if n_qubits is None:
            n_qubits = int(round(np.log2(amps.size))) if amps.size else 0
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise ConfigurationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
        if amps.shape != (2**n_qubits,):
            raise ConfigurationError(f"expected {2**n_qubits} amplitudes, got shape {amps.shape}")
        self.n_qubits = n_qubits
        self.amps = amps

    def norm(self) -> float:
        """Squared norm, sum of |amp|^2."""
        return float(np.vdot(self.amps, self.amps).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.amps.copy(), self.n_qubits)

    def __len__(self):
        return self.amps.size

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits})"


def zero_state(n_qubits: int) -> StateVector:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps, int(n_qubits))


# Gate constructors. All angles are in radians.

def gate_h() -> np.ndarray:
    return _H.copy()


def gate_p(lam: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * lam)]], dtype=complex)


def gate_rx(lam: float) -> np.ndarray:
    c, s = cos(lam / 2), sin(lam / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def gate_ry(lam: float) -> np.ndarray:
    c, s = cos(lam / 2), sin(lam / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def gate_rz(lam: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * lam), 0], [0, np.exp(0.5j * lam)]], dtype=complex)


GATES = {
    "p": gate_p,
    "rx": gate_rx,
    "ry": gate_ry,
    "rz": gate_rz,
}


def _check_qubit(state: StateVector, q: int) -> None:
    if not 0 <= q < state.n_qubits:
        raise IndexError(f"qubit {q} out of range for {state.n_qubits}-qubit state")


def apply_1q(state: StateVector, g: np.ndarray, q: int) -> StateVector:
    """Apply a 2x2 gate to qubit ``q`` and return the new state."""
    _check_qubit(state, q)
    n = state.n_qubits
    # (high bits, bit q, low bits); matmul acts on the middle axis
    view = state.amps.reshape(2 ** (n - q - 1), 2, 2**q)
    return StateVector(np.matmul(g, view).reshape(-1), n)


@lru_cache(maxsize=None)
def _cx_permutation(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**n)
    flip = (idx >> control) & 1
    return idx ^ (flip << target)


def apply_cx(state: StateVector, control: int, target: int) -> StateVector:
    """Flip ``target`` on every basis state whose ``control`` bit is 1."""
    if control == target:
        raise ConfigurationError("CX control and target must differ")
    _check_qubit(state, control)
    _check_qubit(state, target)
    perm = _cx_permutation(state.n_qubits, control, target)
    return StateVector(state.amps[perm], state.n_qubits)


def expectation_z(state: StateVector, q: int) -> float:
    """<Z> on qubit ``q``: P(bit q = 0) - P(bit q = 1)."""
    _check_qubit(state, q)
    n = state.n_qubits
    probs = (np.abs(state.amps) ** 2).reshape(2 ** (n - q - 1), 2, 2**q)
    return float(probs[:, 0, :].sum() - probs[:, 1, :].sum())


def count_gate(counter: Counter | None, name: str) -> None:
    if counter is not None:
        counter[name] += 1
