"""Small denoiser network with analytic gradients.

A two-hidden-layer tanh MLP mapping (point, noise level) to a denoised
point.  The noise level enters through sine/cosine features at geometric
frequencies, so conditioning depends on sigma_t rather than on raw time.
Gradients are computed by hand-rolled backprop; no autodiff framework.
"""

from __future__ import annotations

import numpy as np

from . import rng

__all__ = ["DenoiserNet"]

HIDDEN = 128
N_FREQ = 8


def _time_features(sigmas):
    """(B, 2*N_FREQ) sine/cosine features of the noise level."""
    freqs = np.pi * 2.0 ** np.arange(N_FREQ)
    phases = np.asarray(sigmas, dtype=np.float64)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(phases), np.cos(phases)], axis=1)


class DenoiserNet:
    """MLP denoiser h(x, sigma) with a flat float64 parameter vector."""

    def __init__(self, dim: int, params: np.ndarray | None = None):
        self.dim = int(dim)
        self.n_in = self.dim + 2 * N_FREQ
        self._shapes = [
            (self.n_in, HIDDEN),
            (HIDDEN,),
            (HIDDEN, HIDDEN),
            (HIDDEN,),
            (HIDDEN, self.dim),
            (self.dim,),
        ]
        self.n_params = sum(int(np.prod(s)) for s in self._shapes)
        if params is None:
            params = np.zeros(self.n_params)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        self.params = params

    @classmethod
    def initialized(cls, dim: int, seed: int) -> "DenoiserNet":
        """Fresh network with 1/sqrt(fan_in) Gaussian weights, zero biases."""
        net = cls(dim)
        g = rng.substream(seed, 0)
        chunks = []
        for shape in net._shapes:
            if len(shape) == 2:
                chunks.append(g.standard_normal(shape).ravel() / np.sqrt(shape[0]))
            else:
                chunks.append(np.zeros(shape))
        net.params = np.concatenate(chunks)
        return net

    def _views(self, flat):
        out, pos = [], 0
        for shape in self._shapes:
            size = int(np.prod(shape))
            out.append(flat[pos : pos + size].reshape(shape))
            pos += size
        return out

    def forward(self, x, sigmas, _cache=None):
        """Evaluate h(x, sigma) for a batch; x is (B, d), sigmas (B,)."""
        w1, b1, w2, b2, w3, b3 = self._views(self.params)
        inp = np.concatenate([np.atleast_2d(x), _time_features(sigmas)], axis=1)
        a1 = np.tanh(inp @ w1 + b1)
        a2 = np.tanh(a1 @ w2 + b2)
        out = a2 @ w3 + b3
        if _cache is not None:
            _cache.update(inp=inp, a1=a1, a2=a2)
        return out

    def backward(self, cache, dout):
        """Parameter gradient given d(loss)/d(output); uses a forward cache."""
        w1, b1, w2, b2, w3, b3 = self._views(self.params)
        inp, a1, a2 = cache["inp"], cache["a1"], cache["a2"]
        g3w = a2.T @ dout
        g3b = dout.sum(axis=0)
        da2 = (dout @ w3.T) * (1.0 - a2 * a2)
        g2w = a1.T @ da2
        g2b = da2.sum(axis=0)
        da1 = (da2 @ w2.T) * (1.0 - a1 * a1)
        g1w = inp.T @ da1
        g1b = da1.sum(axis=0)
        return np.concatenate([g.ravel() for g in (g1w, g1b, g2w, g2b, g3w, g3b)])

    def copy(self) -> "DenoiserNet":
        return DenoiserNet(self.dim, self.params.copy())
