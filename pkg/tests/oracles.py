"""Independent reference implementations used only by the tests.

Nothing here calls into the package's simulation or layer code.
"""

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)


def h():
    return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def p(lam):
    return np.diag([1, np.exp(1j * lam)])


def rx(lam):
    return np.cos(lam / 2) * I2 - 1j * np.sin(lam / 2) * X


def ry(lam):
    return np.cos(lam / 2) * I2 - 1j * np.sin(lam / 2) * np.array([[0, -1j], [1j, 0]])


def rz(lam):
    return np.cos(lam / 2) * I2 - 1j * np.sin(lam / 2) * np.diag([1, -1]).astype(complex)


def kron_all(mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def embed(g, q, n):
    """Full 2^n matrix for a one-qubit gate; qubit n-1 is the leftmost Kronecker factor."""
    return kron_all([g if k == q else I2 for k in reversed(range(n))])


def cx(control, target, n):
    a = kron_all([P0 if k == control else I2 for k in reversed(range(n))])
    b = kron_all([P1 if k == control else (X if k == target else I2) for k in reversed(range(n))])
    return a + b


def z_on(q, n):
    return embed(np.diag([1, -1]).astype(complex), q, n)


PATTERNS = {0: [(3, 0), (2, 3), (1, 2)], 1: [(1, 0), (2, 1), (3, 2)], 2: [(2, 0), (3, 2), (1, 3)]}


def circuit_unitary(x, ansatz, angles, reps_r=1, scales=None):
    """Dense 16x16 unitary of encoder plus ansatz layers."""
    n = 4
    u = np.eye(16, dtype=complex)
    for j in range(reps_r):
        lam = 2 * np.asarray(x) if scales is None else np.asarray(scales)[j] * np.asarray(x)
        layer = kron_all([h() for _ in range(n)])
        phase = kron_all([p(lam[k]) for k in reversed(range(n))])
        u = phase @ layer @ u
    for row in np.atleast_2d(angles):
        m = embed(rx(row[3]), 3, n) @ embed(ry(row[2]), 2, n) @ embed(ry(row[1]), 1, n) @ embed(rz(row[0]), 0, n)
        for c, t in PATTERNS[ansatz]:
            m = cx(c, t, n) @ m
        m = embed(rz(row[4]), 0, n) @ m
        u = m @ u
    return u


def circuit_expectation(x, ansatz, angles, reps_r=1, scales=None, readout=0):
    psi = circuit_unitary(x, ansatz, angles, reps_r, scales)[:, 0]
    return float(np.real(np.conj(psi) @ z_on(readout, 4) @ psi))


def central_diff(f, x, eps=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        g[idx] = (f(xp) - f(xm)) / (2 * eps)
    return g


def conv_loops(x, kernel, bias):
    H, W, C = x.shape
    kh, kw, _, K = kernel.shape
    out = np.zeros((H - kh + 1, W - kw + 1, K))
    for i in range(H - kh + 1):
        for j in range(W - kw + 1):
            for k in range(K):
                s = bias[k]
                for m in range(kh):
                    for n_ in range(kw):
                        for c in range(C):
                            s += x[i + m, j + n_, c] * kernel[m, n_, c, k]
                out[i, j, k] = s
    return out


def maxpool_loops(x):
    H, W, C = x.shape
    out = np.zeros((H // 2, W // 2, C))
    for i in range(H // 2):
        for j in range(W // 2):
            for c in range(C):
                out[i, j, c] = max(x[2 * i, 2 * j, c], x[2 * i, 2 * j + 1, c],
                                   x[2 * i + 1, 2 * j, c], x[2 * i + 1, 2 * j + 1, c])
    return out


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
