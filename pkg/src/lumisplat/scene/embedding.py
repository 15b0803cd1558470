"""Cosine frequency embedding of view quantities.

gamma(t) = [cos(2^0 pi t), cos(2^1 pi t), ..., cos(2^(D-1) pi t)] applied to
each component of the input, blocks concatenated in component order.  The
doubling frequencies let a small MLP resolve sharp angular variation that a
raw scalar input cannot express.
"""

from __future__ import annotations

import numpy as np


def cosine_embed(x, n_freq: int) -> np.ndarray:
    """Embed (..., m) inputs into (..., m * n_freq) cosine features.

    Scalars are treated as one-component vectors.  n_freq = 0 yields an
    empty trailing axis.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    freqs = np.pi * (2.0 ** np.arange(n_freq))
    out = np.cos(x[..., None] * freqs)
    return out.reshape(x.shape[:-1] + (x.shape[-1] * n_freq,))


def cosine_embed_vjp(x, n_freq: int, g: np.ndarray) -> np.ndarray:
    """Pull grads on the embedding back to the input components.

    d/dt cos(2^j pi t) = -(2^j pi) sin(2^j pi t).
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    g = np.asarray(g, dtype=np.float64)
    freqs = np.pi * (2.0 ** np.arange(n_freq))
    gb = g.reshape(x.shape + (n_freq,))
    return np.sum(gb * (-freqs * np.sin(x[..., None] * freqs)), axis=-1)
