"""Classical layers written against numpy, plus the CNN and PCA feature heads.

Images are ``(height, width, channels)`` float arrays. Convolution kernels
are ``(5, 5, in_channels, out_channels)``; fully connected weights are
``(out, in)``. Every layer has a forward function and a matching backward
function returning exact gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FitError, ShapeError, UsageError

KERNEL_SIZE = 5
PROB_CLAMP = 1e-12


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# --- convolution ----------------------------------------------------------

@dataclass
class ConvLayer:
    kernel: np.ndarray  # (5, 5, in, out)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        k = self.kernel.shape
        if len(k) != 4 or k[:2] != (KERNEL_SIZE, KERNEL_SIZE):
            raise ShapeError(f"kernel must be (5, 5, in, out), got {k}")
        if self.bias.shape != (k[3],):
            raise ShapeError(f"bias must have shape ({k[3]},), got {self.bias.shape}")

    @property
    def in_channels(self):
        return self.kernel.shape[2]

    @property
    def out_channels(self):
        return self.kernel.shape[3]

    @classmethod
    def init(cls, in_channels, out_channels, rng):
        fan_in = in_channels * KERNEL_SIZE * KERNEL_SIZE
        return cls(_uniform(rng, fan_in, (KERNEL_SIZE, KERNEL_SIZE, in_channels, out_channels)),
                   _uniform(rng, fan_in, (out_channels,)))


def conv2d_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Valid, stride-1 cross-correlation plus per-channel bias."""
    if x.ndim != 3 or x.shape[2] != layer.in_channels:
        raise ShapeError(f"input {x.shape} does not match kernel with {layer.in_channels} channels")
    if x.shape[0] < KERNEL_SIZE or x.shape[1] < KERNEL_SIZE:
        raise ShapeError(f"input {x.shape} smaller than the 5x5 kernel")
    windows = sliding_window_view(x, (KERNEL_SIZE, KERNEL_SIZE), axis=(0, 1))  # (i, j, c, m, n)
    out = np.tensordot(windows, layer.kernel, axes=([3, 4, 2], [0, 1, 2]))
    return out + layer.bias


def conv2d_backward(x: np.ndarray, layer: ConvLayer, grad_out: np.ndarray):
    """Returns ``(grad_input, grad_kernel, grad_bias)``."""
    k = KERNEL_SIZE
    expected = (x.shape[0] - k + 1, x.shape[1] - k + 1, layer.out_channels)
    if grad_out.shape != expected:
        raise ShapeError(f"grad_out shape {grad_out.shape}, expected {expected}")
    grad_bias = grad_out.sum(axis=(0, 1))
    windows = sliding_window_view(x, (k, k), axis=(0, 1))  # (i, j, c, m, n)
    grad_kernel = np.tensordot(windows, grad_out, axes=([0, 1], [0, 1]))  # (c, m, n, out)
    grad_kernel = grad_kernel.transpose(1, 2, 0, 3)
    padded = np.pad(grad_out, ((k - 1, k - 1), (k - 1, k - 1), (0, 0)))
    gwin = sliding_window_view(padded, (k, k), axis=(0, 1))  # (p, q, out, m', n')
    flipped = layer.kernel[::-1, ::-1]
    grad_input = np.tensordot(gwin, flipped, axes=([3, 4, 2], [0, 1, 3]))
    return grad_input, grad_kernel, grad_bias


# --- elementwise and pooling ----------------------------------------------

def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad_out):
    return grad_out * (x > 0)


def maxpool2x2_forward(x: np.ndarray):
    """2x2 max pool over the spatial axes. Odd trailing rows/columns are dropped.

    Returns the pooled array and the flat in-window argmax used by the
    backward pass (first maximum in row-major order on ties).
    """
    h2, w2 = x.shape[0] // 2, x.shape[1] // 2
    c = x.shape[2]
    blocks = x[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2, c).transpose(0, 2, 4, 1, 3).reshape(h2, w2, c, 4)
    arg = blocks.argmax(axis=-1)
    return np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0], arg


def maxpool2x2_backward(input_shape, arg, grad_out):
    h2, w2, c = grad_out.shape
    blocks = np.zeros((h2, w2, c, 4))
    np.put_along_axis(blocks, arg[..., None], grad_out[..., None], axis=-1)
    grad = np.zeros(input_shape)
    grad[: 2 * h2, : 2 * w2] = blocks.reshape(h2, w2, c, 2, 2).transpose(0, 3, 1, 4, 2).reshape(2 * h2, 2 * w2, c)
    return grad


@dataclass
class DropoutState:
    p: float = 0.5
    training: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"dropout probability must be in [0, 1), got {self.p}")


def dropout_forward(x, state: DropoutState, rng=None):
    """Inverted dropout: survivors are scaled by 1/(1-p) so inference is identity.

    Returns ``(output, mask)``; ``mask`` already includes the scale.
    """
    if not state.training or state.p == 0.0:
        return x, None
    if rng is None:
        raise UsageError("training-mode dropout needs an RNG")
    mask = (rng.random(x.shape) >= state.p) / (1.0 - state.p)
    return x * mask, mask


def dropout_backward(mask, grad_out):
    return grad_out if mask is None else grad_out * mask


# --- fully connected ------------------------------------------------------

@dataclass
class FcLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=float, ndmin=2)
        self.bias = np.array(self.bias, dtype=float, ndmin=1)
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} does not match weight {self.weight.shape}")

    @classmethod
    def init(cls, n_in, n_out, rng):
        return cls(_uniform(rng, n_in, (n_out, n_in)), _uniform(rng, n_in, (n_out,)))


def fc_forward(x, layer: FcLayer):
    x = np.asarray(x, dtype=float)
    if x.shape != (layer.weight.shape[1],):
        raise ShapeError(f"input shape {x.shape} does not match weight {layer.weight.shape}")
    return layer.weight @ x + layer.bias


def fc_backward(x, layer: FcLayer, grad_out):
    """Returns ``(grad_input, grad_weight, grad_bias)``."""
    grad_out = np.asarray(grad_out, dtype=float)
    if grad_out.shape != (layer.weight.shape[0],):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match weight {layer.weight.shape}")
    return layer.weight.T @ grad_out, np.outer(grad_out, x), grad_out.copy()


# --- CNN head -------------------------------------------------------------

CNN_INPUT_SHAPES = ((28, 28, 1), (32, 32, 3))


class CnnHead:
    """conv(5x5, k1) -> ReLU -> pool -> conv(5x5, k2) -> ReLU -> pool -> dropout
    -> flatten -> FC(128) -> ReLU -> FC(4)."""

    def __init__(self, input_shape=(28, 28, 1), rng=None, k1=2, k2=16, hidden=128, n_out=4, dropout=0.5):
        input_shape = tuple(input_shape)
        if input_shape not in CNN_INPUT_SHAPES:
            raise ShapeError(f"unsupported image shape {input_shape}; expected one of {CNN_INPUT_SHAPES}")
        rng = np.random.default_rng() if rng is None else rng
        self.input_shape = input_shape
        h, w, c = input_shape
        self.conv1 = ConvLayer.init(c, k1, rng)
        self.conv2 = ConvLayer.init(k1, k2, rng)
        h, w = (h - 4) // 2, (w - 4) // 2
        h, w = (h - 4) // 2, (w - 4) // 2
        self.flat_size = h * w * k2
        self.fc1 = FcLayer.init(self.flat_size, hidden, rng)
        self.fc2 = FcLayer.init(hidden, n_out, rng)
        self.dropout = DropoutState(p=dropout)

    def parameters(self):
        return {
            "conv1.kernel": self.conv1.kernel, "conv1.bias": self.conv1.bias,
            "conv2.kernel": self.conv2.kernel, "conv2.bias": self.conv2.bias,
            "fc1.weight": self.fc1.weight, "fc1.bias": self.fc1.bias,
            "fc2.weight": self.fc2.weight, "fc2.bias": self.fc2.bias,
        }

    def forward(self, image, training=False, rng=None):
        image = np.asarray(image, dtype=float)
        if image.shape != self.input_shape:
            raise ShapeError(f"image shape {image.shape}, head expects {self.input_shape}")
        cache = {"x0": image}
        y1 = conv2d_forward(image, self.conv1)
        a1 = relu_forward(y1)
        p1, arg1 = maxpool2x2_forward(a1)
        y2 = conv2d_forward(p1, self.conv2)
        a2 = relu_forward(y2)
        p2, arg2 = maxpool2x2_forward(a2)
        self.dropout.training = training
        d, mask = dropout_forward(p2, self.dropout, rng)
        flat = d.reshape(-1)
        z1 = fc_forward(flat, self.fc1)
        h1 = relu_forward(z1)
        out = fc_forward(h1, self.fc2)
        cache.update(y1=y1, a1=a1, p1=p1, arg1=arg1, y2=y2, a2=a2, p2=p2, arg2=arg2,
                     mask=mask, flat=flat, z1=z1, h1=h1)
        return out, cache

    def shapes(self, cache):
        """Intermediate shapes of one forward pass, in order."""
        keys = ("y1", "p1", "y2", "p2", "flat", "h1")
        return [cache[k].shape for k in keys]

    def backward(self, cache, grad_out):
        g = {}
        gh1, g["fc2.weight"], g["fc2.bias"] = fc_backward(cache["h1"], self.fc2, grad_out)
        gz1 = relu_backward(cache["z1"], gh1)
        gflat, g["fc1.weight"], g["fc1.bias"] = fc_backward(cache["flat"], self.fc1, gz1)
        gp2 = dropout_backward(cache["mask"], gflat.reshape(cache["p2"].shape))
        ga2 = maxpool2x2_backward(cache["a2"].shape, cache["arg2"], gp2)
        gy2 = relu_backward(cache["y2"], ga2)
        gp1, g["conv2.kernel"], g["conv2.bias"] = conv2d_backward(cache["p1"], self.conv2, gy2)
        ga1 = maxpool2x2_backward(cache["a1"].shape, cache["arg1"], gp1)
        gy1 = relu_backward(cache["y1"], ga1)
        _, g["conv1.kernel"], g["conv1.bias"] = conv2d_backward(cache["x0"], self.conv1, gy1)
        return g


# --- PCA head -------------------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray  # (P,)
    components: np.ndarray  # (P, L), orthonormal columns
    out_mean: np.ndarray  # (L,)
    out_std: np.ndarray  # (L,)
    singular_values: np.ndarray = field(default=None)
    provenance: str = "train"

    @property
    def n_components(self):
        return self.components.shape[1]


def pca_fit(data, n_components=4) -> PcaModel:
    """Fit on an ``(N, P)`` training matrix via SVD of the centered data.

    Each component's sign is fixed so that its largest-magnitude entry is
    positive; repeated fits on the same data give identical components.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        data = data.reshape(data.shape[0], -1)
    n, p = data.shape
    if n <= n_components:
        raise FitError(f"need more than {n_components} samples to fit PCA, got {n}")
    if not np.all(np.isfinite(data)):
        raise FitError("PCA training data contains non-finite values")
    mean = data.mean(axis=0)
    centered = data - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:n_components].T.copy()
    pivot = np.abs(comps).argmax(axis=0)
    signs = np.sign(comps[pivot, np.arange(n_components)])
    comps *= np.where(signs == 0, 1.0, signs)
    z = centered @ comps
    out_mean = z.mean(axis=0)
    out_std = z.std(axis=0)
    if np.any(out_std <= 1e-12 * max(1.0, float(s[0]) if s.size else 1.0)):
        raise FitError(f"degenerate data: projected std {out_std}")
    return PcaModel(mean, comps, out_mean, out_std, singular_values=s[:n_components].copy())


def pca_project(model: PcaModel, data):
    """Centered projection onto the components, before standardization."""
    if model is None:
        raise UsageError("PCA model is not fitted")
    data = np.asarray(data, dtype=float)
    if data.size == model.mean.size:
        return (data.reshape(-1) - model.mean) @ model.components
    return (data.reshape(data.shape[0], -1) - model.mean) @ model.components


def pca_transform(model: PcaModel, data):
    """Project and standardize with the training statistics."""
    return (pca_project(model, data) - model.out_mean) / model.out_std


class PcaHead:
    """Fixed PCA projection followed by a trainable 4x4 linear layer."""

    def __init__(self, pca: PcaModel, rng=None):
        rng = np.random.default_rng() if rng is None else rng
        self.pca = pca
        self.fc = FcLayer.init(pca.n_components, pca.n_components, rng)

    def parameters(self):
        return {"fc3.weight": self.fc.weight, "fc3.bias": self.fc.bias}

    def forward(self, image, training=False, rng=None):
        z = pca_transform(self.pca, image)
        return fc_forward(z, self.fc), {"z": z}

    def backward(self, cache, grad_out):
        _, gw, gb = fc_backward(cache["z"], self.fc, grad_out)
        return {"fc3.weight": gw, "fc3.bias": gb}


# --- probability transform ------------------------------------------------

def to_probabilities(post_out: float):
    """``(p0, p1)`` with ``p1 = sigmoid(post_out)``, clamped away from 0 and 1."""
    post_out = float(post_out)
    if post_out >= 0:
        p1 = 1.0 / (1.0 + np.exp(-post_out))
    else:
        e = np.exp(post_out)
        p1 = e / (1.0 + e)
    p1 = min(max(p1, PROB_CLAMP), 1.0 - PROB_CLAMP)
    return 1.0 - p1, p1


def probability_grad(p0: float, p1: float) -> float:
    """dp1/dpost (equal to -dp0/dpost)."""
    return p1 * p0
