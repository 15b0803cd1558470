"""A small dense ReLU network with a hand-written backward pass.

All decoders in this package share one shape: two hidden layers of 32 units
with ReLU, then a linear output head.  Activations on the outputs (sigmoid,
softplus, normalization) belong to the callers, which keeps this class a
plain differentiable function of its inputs and parameters.
"""

from __future__ import annotations

import numpy as np

HIDDEN_WIDTH = 32
HIDDEN_LAYERS = 2


class Mlp:
    """y = W3 relu(W2 relu(W1 x + b1) + b2) + b3, batched over rows of x.

    Parameters live in ``params`` as [W1, b1, W2, b2, W3, b3] with W of shape
    (fan_in, fan_out); optimizer steps mutate these arrays in place.
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        sizes = [in_dim] + [HIDDEN_WIDTH] * HIDDEN_LAYERS + [out_dim]
        self.params: list[np.ndarray] = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            # He scaling in front of ReLU; a smaller final layer keeps the
            # heads near their activation midpoints at start.
            scale = np.sqrt(1.0 / a) * 0.1 if last else np.sqrt(2.0 / a)
            self.params.append(rng.normal(0.0, scale, size=(a, b)))
            self.params.append(np.zeros(b))
        self.in_dim = in_dim
        self.out_dim = out_dim

    @classmethod
    def from_params(cls, params: list[np.ndarray]) -> "Mlp":
        """Rebuild a network around existing parameter arrays (checkpoints)."""
        if len(params) != 2 * (HIDDEN_LAYERS + 1):
            raise ValueError(f"expected {2 * (HIDDEN_LAYERS + 1)} parameter "
                             f"arrays, got {len(params)}")
        m = object.__new__(cls)
        m.params = [np.ascontiguousarray(p, dtype=np.float64) for p in params]
        m.in_dim = m.params[0].shape[0]
        m.out_dim = m.params[-1].shape[0]
        return m

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (y, cache); cache holds each layer's input for backward."""
        x = np.asarray(x, dtype=np.float64)
        cache = [x]
        h = x
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            w, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ w + b
            if i < n_layers - 1:
                h = np.maximum(h, 0.0)
            cache.append(h)
        return h, cache

    def backward(self, cache: list[np.ndarray],
                 g_y: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Grads of sum(g_y * y) w.r.t. the input rows and every parameter."""
        n_layers = len(self.params) // 2
        grads: list[np.ndarray] = [None] * len(self.params)
        g = np.asarray(g_y, dtype=np.float64)
        for i in reversed(range(n_layers)):
            w = self.params[2 * i]
            h_in = cache[i]
            if i < n_layers - 1:
                g = g * (cache[i + 1] > 0.0)  # ReLU gate of this layer's output
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ w.T
        return g, grads
