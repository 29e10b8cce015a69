"""
A four-qubit circuit, gate by gate
==================================

Builds the encoder and one ansatz layer on a dense statevector and checks
the result against plain matrix products.
"""

# %%
import numpy as np

from qnlnet import EncoderConfig, QnlNetParams, forward
from qnlnet.circuit import encode, run_layers
from qnlnet.statevector import apply_1q, apply_cx, expectation_z, gate_h, zero_state

# %%
# Qubit k is bit k of the amplitude index. A Hadamard on qubit 0 followed
# by a CX from qubit 0 to qubit 1 gives a Bell pair on indices 0 and 3.
state = apply_cx(apply_1q(zero_state(2), gate_h(), 0), 0, 1)
print(np.round(state.amps, 6))

# %%
# The encoder: r repetitions of Hadamards then phase gates P(2 x_k).
x = np.array([0.3, -1.1, 0.8, 0.05])
cfg = EncoderConfig(reps=2)
encoded = encode(x, cfg)
print("norm after encoding:", encoded.norm())

# %%
# Ansatz layers add rotations and a CX entangling pattern. The readout is
# the analytic expectation of Z on qubit 0.
angles = np.random.default_rng(0).uniform(-np.pi, np.pi, (2, 5))
for ansatz in (0, 1, 2):
    print(ansatz, forward(x, cfg, ansatz, QnlNetParams(angles)))

# %%
# With a single encoder repetition and a single layer, qubit 0 never leaves
# the equator of the Bloch sphere, so its Z expectation is exactly zero.
one = EncoderConfig(reps=1)
print([forward(x, one, a, QnlNetParams(angles[:1])) for a in (0, 1, 2)])

# %%
# Reading out another qubit of the same circuit gives a nonzero signal.
final = run_layers(encode(x, one), 0, angles[:1])
print([round(expectation_z(final, q), 6) for q in range(4)])
