"""Source models: sparsity penalties on the separated spectrogram and their
proximity operators.

Spectrograms have shape ``(M, T, B)``.  ``weights`` arguments, when given,
are per-bin multiplicities of length ``B`` (see
:func:`consistent_bss.stft.bin_weights`); they make the penalties equal to
their value on the full two-sided grid.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PenaltyModel",
    "KINDS",
    "prox_l1",
    "prox_l21",
    "group_norms",
    "penalty_value",
    "prox_penalty",
]

KINDS = ("laplace_ica", "laplace_iva")

#: Default threshold scale per model kind.
DEFAULT_LAMBDA = {"laplace_ica": 0.1, "laplace_iva": 1.0}


def _shrink_factor(magnitude, threshold):
    # max(.,tiny) keeps 0/0 out; those entries clip to zero anyway
    factor = threshold / np.maximum(magnitude, np.finfo(float).tiny)
    np.subtract(1.0, factor, out=factor)
    return np.maximum(factor, 0.0, out=factor)


def prox_l1(z, threshold):
    """Complex soft thresholding ``(1 - threshold/|z|)_+ z``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z)
    return _shrink_factor(np.abs(z), threshold) * z


def group_norms(z, weights=None):
    """Norm of each (channel, frame) group across frequency, shape ``(M, T)``."""
    p = np.abs(z) ** 2
    if weights is not None:
        p = p * weights
    return np.sqrt(p.sum(axis=-1))


def prox_l21(z, threshold, weights=None):
    """Group soft thresholding across the last (frequency) axis.

    Every (channel, frame) row is scaled by ``(1 - threshold/zeta)_+`` where
    ``zeta`` is the row's (optionally bin-weighted) Euclidean norm.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z)
    zeta = group_norms(z, weights)
    return _shrink_factor(zeta, threshold)[..., None] * z


@dataclass(frozen=True)
class PenaltyModel:
    """Laplace ICA (l1) or Laplace IVA (l2,1) source model with scale ``lam``.

    Any object with the same ``value`` and ``prox`` methods can be handed to
    the solver in place of this class.
    """

    kind: str = "laplace_ica"
    lam: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if not self.lam > 0:
            raise ValueError("lam must be positive")

    @classmethod
    def default(cls, kind):
        return cls(kind, DEFAULT_LAMBDA[kind])

    def value(self, z, weights=None):
        """Penalty of the spectrogram ``z``."""
        z = np.asarray(z)
        if self.kind == "laplace_ica":
            a = np.abs(z)
            if weights is not None:
                a = a * weights
            return float(self.lam * a.sum())
        return float(self.lam * group_norms(z, weights).sum())

    def prox(self, z, mu2, weights=None):
        """Proximity operator of ``value / mu2``."""
        if not mu2 > 0:
            raise ValueError("mu2 must be positive")
        t = self.lam / mu2
        if self.kind == "laplace_ica":
            return prox_l1(z, t)
        return prox_l21(z, t, weights)


def penalty_value(model, z, weights=None):
    return model.value(z, weights)


def prox_penalty(model, z, mu2, weights=None):
    """``prox`` of ``model.value / mu2`` at ``z``."""
    return model.prox(z, mu2, weights)
