"""Per-frequency demixing filters and the structured observation operator.

A demixing stack ``W`` is an array of shape ``(B, M, M)`` holding one matrix
per one-sided frequency bin.  The observation (mixture spectrogram) has shape
``(M, T, B)``.  The linear map ``W -> W x`` is never assembled as a matrix;
every product runs bin by bin.
"""

import numpy as np

__all__ = [
    "SINGULAR_PENALTY",
    "identity_stack",
    "vectorize",
    "devectorize",
    "apply_demix",
    "adjoint_correlate",
    "logdet_penalty",
    "prox_logdet",
    "operator_norm",
]

#: Value reported by :func:`logdet_penalty` for singular matrices.
SINGULAR_PENALTY = 1e300


def identity_stack(n_bins, n_channels, dtype=complex):
    return np.tile(np.eye(n_channels, dtype=dtype), (n_bins, 1, 1))


def vectorize(W):
    """Stack all matrices row by row into a single vector."""
    return np.ascontiguousarray(W).reshape(-1)


def devectorize(w, n_channels):
    """Inverse of :func:`vectorize`."""
    return np.asarray(w).reshape(-1, n_channels, n_channels)


def _check(W, obs):
    B, M, M2 = W.shape
    if M != M2:
        raise ValueError(f"demixing matrices must be square, got {M}x{M2}")
    if obs.ndim != 3 or obs.shape[0] != M or obs.shape[2] != B:
        raise ValueError(
            f"observation of shape {obs.shape} does not match {B} bins of {M}x{M} filters"
        )


def apply_demix(W, obs):
    """Filter every bin: ``out[n, t, f] = sum_m W[f, n, m] * obs[m, t, f]``.

    Parameters
    ----------
    W : np.ndarray, shape=(B, M, M)
    obs : np.ndarray, shape=(M, T, B)

    Returns
    -------
    np.ndarray, shape=(M, T, B)
    """
    W = np.asarray(W)
    obs = np.asarray(obs)
    _check(W, obs)
    return (W @ obs.transpose(2, 0, 1)).transpose(1, 2, 0)


def adjoint_correlate(obs, y):
    """Adjoint of :func:`apply_demix` with respect to ``W``.

    ``out[f, n, m] = sum_t conj(obs[m, t, f]) * y[n, t, f]``
    """
    obs = np.asarray(obs)
    y = np.asarray(y)
    if obs.shape != y.shape:
        raise ValueError(f"shape mismatch: observation {obs.shape}, dual {y.shape}")
    xf = obs.transpose(2, 0, 1)
    yf = y.transpose(2, 0, 1)
    return yf @ np.conj(xf).transpose(0, 2, 1)


def logdet_penalty(W, weights=None):
    """Negative sum of log singular values over all bins.

    ``weights`` scales each bin's contribution (bin multiplicities for a
    one-sided stack).  Singular matrices give :data:`SINGULAR_PENALTY`.
    """
    W = np.asarray(W)
    s = np.linalg.svd(W, compute_uv=False)
    if not np.all(s > 0):
        return SINGULAR_PENALTY
    per_bin = -np.log(s).sum(axis=-1)
    if weights is not None:
        per_bin = per_bin * weights
    return float(per_bin.sum())


def prox_logdet(W, mu):
    """Proximity operator of ``mu * logdet_penalty`` applied bin by bin.

    Each singular value ``s`` is mapped to ``(s + sqrt(s**2 + 4*mu)) / 2``,
    keeping the singular vectors.  The result is always nonsingular.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    W = np.asarray(W)
    if not np.all(np.isfinite(W)):
        raise np.linalg.LinAlgError("non-finite demixing matrix")
    U, s, Vh = np.linalg.svd(W)
    s = 0.5 * (s + np.sqrt(s * s + 4.0 * mu))
    return (U * s[..., None, :]) @ Vh


def operator_norm(obs):
    """Spectral norm of the observation operator.

    Equals the largest singular value over the per-bin ``T x M`` blocks.
    """
    obs = np.asarray(obs)
    blocks = obs.transpose(2, 1, 0)  # (B, T, M)
    return float(np.linalg.svd(blocks, compute_uv=False).max(initial=0.0))
