"""Pure-numpy fallback for the hot kernels in :mod:`scorelab._core`.

Semantically identical to the compiled extension; selected automatically
when the extension is unavailable (see :mod:`scorelab._backend`).
"""

import numpy as np

_CHUNK = 4096  # query rows per pass; bounds the (chunk, n) temporaries


def mixture_score(points, queries, signal, var, out):
    """Score of the isotropic Gaussian mixture sum_i N(x; signal*p_i, var*I).

    For each query x:  w = softmax_i(-||x - signal*p_i||^2 / (2 var)),
    score = (signal * sum_i w_i p_i - x) / var.  Weights are formed in log
    space with max subtraction so far-away queries stay finite.

    Parameters are float64 C-contiguous arrays: points (n, d),
    queries (B, d), out (B, d).  Returns ``out``.
    """
    scaled = signal * points  # (n, d)
    for lo in range(0, queries.shape[0], _CHUNK):
        q = queries[lo : lo + _CHUNK]
        diff = q[:, None, :] - scaled[None, :, :]  # (b, n, d)
        logw = np.einsum("bnd,bnd->bn", diff, diff)
        logw *= -0.5 / var
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        w /= w.sum(axis=1, keepdims=True)
        mean = w @ points
        out[lo : lo + _CHUNK] = (signal * mean - q) / var
    return out
