"""
The convolutional feature head
==============================

Walks one image through the CNN head and checks its backward pass.
"""

# %%
import numpy as np

from qnlnet import EncoderConfig
from qnlnet.model import build_cnn_model, classical_param_count

rng = np.random.default_rng(2)
model = build_cnn_model((28, 28, 1), EncoderConfig(reps=2), 0, 1, rng)
print("classical parameters:", classical_param_count(model))

# %%
image = rng.normal(size=(28, 28, 1))
features, cache = model.head.forward(image, training=False)
for shape in model.head.shapes(cache):
    print(shape)
print("features:", features.shape)

# %%
# Loss gradient with respect to one convolution weight, analytic versus
# central difference.
loss, grad = model.gradient(image, 1)
vec = model.param_vector()
i, eps = 3, 1e-6
up, down = vec.copy(), vec.copy()
up[i] += eps
down[i] -= eps
model.set_param_vector(up)
lp = model.loss(image, 1)
model.set_param_vector(down)
lm = model.loss(image, 1)
model.set_param_vector(vec)
print(grad[i], (lp - lm) / (2 * eps))
