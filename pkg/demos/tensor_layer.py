# Bilinear tensor layer
#
# A tensor layer sees its input x together with a small tanh hidden code h
# and mixes every pair of entries of c = [x; h] through one matrix slice per
# output unit:  y_k = tanh(c' T_k c + W_k c + b_k).

import numpy as np

from hnnso import BilinearTensorLayer, Rng, bilinear_backward, bilinear_forward
from hnnso.optim import sse_loss

rng = Rng(0)
n_in, n_hidden, n_out = 3, 2, 2
c = n_in + n_hidden
layer = BilinearTensorLayer(
    w_h=rng.uniform_range(-0.5, 0.5, (n_hidden, n_in)),
    b_h=np.zeros(n_hidden),
    t=rng.uniform_range(-0.5, 0.5, (n_out, c, c)),
    w=rng.uniform_range(-0.5, 0.5, (n_out, c)),
    b=np.zeros(n_out),
)

# One example, then a batch: the forward pass accepts either.

x = np.array([0.2, -0.4, 0.7])
y, cache = bilinear_forward(layer, x)
print("single output", y)

batch = rng.uniform_range(-1, 1, (5, n_in))
y, cache = bilinear_forward(layer, batch)
print("batch outputs\n", y)

# Only the symmetric part of each slice affects the output: c'Tc = c'((T+T')/2)c.

sym = BilinearTensorLayer(layer.w_h, layer.b_h, 0.5 * (layer.t + layer.t.transpose(0, 2, 1)), layer.w, layer.b)
print("max change after symmetrising", np.max(np.abs(bilinear_forward(sym, batch)[0] - y)))

# Backward pass against a target: gradients for every parameter and the input.

target = np.zeros_like(y)
loss, dy = sse_loss(y, target)
grads, dx = bilinear_backward(layer, cache, dy)
print("loss", loss)
for name, g in grads.items():
    print(name, g.shape)
print("d loss / d x", dx.shape)
