"""Hybrid model: feature head -> QNL-Net circuit -> 1x1 linear layer -> class probabilities."""

from __future__ import annotations

import numpy as np

from .circuit import EncoderConfig, QnlNetParams, check_ansatz, forward as circuit_forward
from .classical_nn import CnnHead, FcLayer, PcaHead, fc_forward, to_probabilities
from .errors import ShapeError
from .loss_optim import ForwardRecord, backprop_chain, nll_loss


class HybridModel:
    """Holds every trainable array and exposes them as one flat vector.

    Parameter order: head arrays, ``quantum.angles``, ``quantum.scales``
    (trainable encoder only), ``post.weight``, ``post.bias``.
    """

    def __init__(self, head, encoder: EncoderConfig, ansatz: int, qparams: QnlNetParams,
                 post: FcLayer, readout: int = 0):
        self.head = head
        self.encoder = encoder
        self.ansatz = check_ansatz(ansatz)
        self.qparams = qparams
        self.post = post
        self.readout = readout
        qparams.check(encoder)

    @classmethod
    def build(cls, head, encoder: EncoderConfig, ansatz: int, reps_ansatz: int, rng, readout: int = 0):
        qparams = QnlNetParams.initial(reps_ansatz, encoder, rng)
        post = FcLayer.init(1, 1, rng)
        return cls(head, encoder, ansatz, qparams, post, readout)

    @property
    def head_kind(self) -> str:
        return "cnn" if isinstance(self.head, CnnHead) else "pca"

    def named_parameters(self):
        named = dict(self.head.parameters())
        named["quantum.angles"] = self.qparams.angles
        if self.qparams.scales is not None:
            named["quantum.scales"] = self.qparams.scales
        named["post.weight"] = self.post.weight
        named["post.bias"] = self.post.bias
        return named

    def n_params(self) -> int:
        return sum(a.size for a in self.named_parameters().values())

    def param_vector(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for a in self.named_parameters().values()])

    def set_param_vector(self, vec) -> None:
        vec = np.asarray(vec, dtype=float)
        named = self.named_parameters()
        total = sum(a.size for a in named.values())
        if vec.shape != (total,):
            raise ShapeError(f"parameter vector must have length {total}, got {vec.shape}")
        pos = 0
        for arr in named.values():
            arr[...] = vec[pos:pos + arr.size].reshape(arr.shape)
            pos += arr.size

    def flatten(self, grads: dict) -> np.ndarray:
        named = self.named_parameters()
        missing = set(named) - set(grads)
        if missing:
            raise ShapeError(f"gradient missing for {sorted(missing)}")
        return np.concatenate([np.asarray(grads[k]).reshape(-1) for k in named])

    def forward(self, image, training=False, rng=None) -> ForwardRecord:
        features, cache = self.head.forward(image, training=training, rng=rng)
        q = circuit_forward(features, self.encoder, self.ansatz, self.qparams, self.readout)
        post = float(fc_forward(np.array([q]), self.post)[0])
        p0, p1 = to_probabilities(post)
        return ForwardRecord(features=features, head_cache=cache, q=q, post=post, p0=p0, p1=p1)

    def predict_proba(self, image):
        rec = self.forward(image, training=False)
        return rec.p0, rec.p1

    def loss(self, image, label, training=False, rng=None) -> float:
        rec = self.forward(image, training=training, rng=rng)
        return nll_loss(rec.p0, rec.p1, label)

    def gradient(self, image, label, training=False, rng=None):
        """``(loss, flat gradient)`` for one sample."""
        rec = self.forward(image, training=training, rng=rng)
        return nll_loss(rec.p0, rec.p1, label), backprop_chain(rec, self, label)


def classical_param_count(model: HybridModel) -> int:
    """Head parameters plus the two post-layer parameters."""
    return sum(a.size for a in model.head.parameters().values()) + model.post.weight.size + model.post.bias.size


def build_pca_model(pca, encoder, ansatz, reps_ansatz, rng, readout=0) -> HybridModel:
    return HybridModel.build(PcaHead(pca, rng), encoder, ansatz, reps_ansatz, rng, readout)


def build_cnn_model(input_shape, encoder, ansatz, reps_ansatz, rng, readout=0) -> HybridModel:
    return HybridModel.build(CnnHead(input_shape, rng), encoder, ansatz, reps_ansatz, rng, readout)
