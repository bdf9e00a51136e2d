"""Circular STFT, tight window design and the consistency projection.

Conventions
-----------
Time signals are arrays of shape ``(..., L)``; spectrograms are complex arrays
of shape ``(..., T, B)`` with ``T = L // hop`` frames and ``B = F // 2 + 1``
one-sided bins.  Framing is circular: frame ``t`` covers the samples
``(t * hop + n) mod L`` for ``n = 0, ..., F - 1``, and the DFT phase is taken
relative to the start of each frame.

One-sided arrays stand for the full Hermitian grid of ``T x F`` coefficients.
All inner products and norms therefore weight interior bins by 2 (see
:func:`bin_weights`); under that inner product :func:`istft` is the adjoint of
:func:`stft` for a tight window and :func:`project_consistent` is an
orthogonal projection.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

__all__ = [
    "ConfigurationError",
    "DegenerateWindowError",
    "WindowPair",
    "design_tight_window",
    "dual_window",
    "bin_weights",
    "inner",
    "norm",
    "stft",
    "istft",
    "project_consistent",
    "consistency_residual",
    "padded_length",
]

_SHAPES = {"hann": "hann", "rectangular": "boxcar"}


class ConfigurationError(ValueError):
    """Raised for incompatible transform parameters."""


class DegenerateWindowError(ValueError):
    """Raised when a window cannot be made perfectly reconstructing."""


@dataclass(frozen=True, eq=False)
class WindowPair:
    """Analysis/synthesis windows of length ``fft_size`` with hop ``hop``.

    The pair is perfectly reconstructing when
    ``fft_size * sum_t synthesis[n - t*hop] * analysis[n - t*hop] == 1``
    for every sample ``n``.
    """

    analysis: np.ndarray
    synthesis: np.ndarray
    hop: int

    def __post_init__(self):
        F = len(self.analysis)
        if len(self.synthesis) != F:
            raise ConfigurationError("analysis and synthesis windows differ in length")
        if self.hop <= 0 or F % self.hop != 0:
            raise ConfigurationError(
                f"fft_size ({F}) must be a positive multiple of hop ({self.hop})"
            )

    @property
    def fft_size(self) -> int:
        return len(self.analysis)

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def overlap(self) -> int:
        """Number of frames covering each sample."""
        return self.fft_size // self.hop

    @property
    def is_tight(self) -> bool:
        return np.array_equal(self.analysis, self.synthesis)

    def swapped(self) -> "WindowPair":
        """Pair with the roles of the two windows exchanged."""
        return WindowPair(self.synthesis, self.analysis, self.hop)

    def reconstruction_gain(self) -> np.ndarray:
        """``F * sum_t synthesis * analysis`` periodized over one hop."""
        prod = (self.analysis * self.synthesis).reshape(self.overlap, self.hop)
        return self.fft_size * prod.sum(axis=0)


def _periodized_energy(window, hop):
    F = len(window)
    return (np.asarray(window) ** 2).reshape(F // hop, hop).sum(axis=0)


def design_tight_window(shape: str, fft_size: int, hop: int) -> WindowPair:
    """Build a tight (self-dual) window pair.

    The base window is divided pointwise by the square root of ``fft_size``
    times the periodized sum of its squared ``hop``-shifts.  The extra factor
    ``fft_size`` accounts for the unnormalized DFT so that the frame operator
    is a Parseval frame.

    Parameters
    ----------
    shape : {'hann', 'rectangular'}
        Base window.  ``'hann'`` is the periodic Hann window.
    fft_size : int
        Window and DFT length ``F``.
    hop : int
        Frame shift; must divide ``fft_size``.

    Returns
    -------
    WindowPair
        Pair with ``analysis`` identical to ``synthesis``.
    """
    if shape not in _SHAPES:
        raise ConfigurationError(f"unknown window shape {shape!r}")
    if hop <= 0 or fft_size <= 0 or fft_size % hop != 0:
        raise ConfigurationError(
            f"fft_size ({fft_size}) must be a positive multiple of hop ({hop})"
        )
    base = get_window(_SHAPES[shape], fft_size, fftbins=True).astype(float)
    energy = _periodized_energy(base, hop)
    if np.any(energy <= 0):
        raise DegenerateWindowError(
            f"{shape} window with hop {hop} leaves samples uncovered"
        )
    norm_ = np.sqrt(fft_size * np.tile(energy, fft_size // hop))
    tight = base / norm_
    return WindowPair(tight, tight.copy(), hop)


def dual_window(analysis, hop: int) -> WindowPair:
    """Pair an arbitrary analysis window with its canonical dual."""
    analysis = np.asarray(analysis, dtype=float)
    F = len(analysis)
    if hop <= 0 or F % hop != 0:
        raise ConfigurationError(f"fft_size ({F}) must be a positive multiple of hop ({hop})")
    energy = _periodized_energy(analysis, hop)
    if np.any(energy <= 0):
        raise DegenerateWindowError("analysis window leaves samples uncovered")
    synthesis = analysis / (F * np.tile(energy, F // hop))
    return WindowPair(analysis, synthesis, hop)


def bin_weights(fft_size: int) -> np.ndarray:
    """Multiplicity of each one-sided bin in the full Hermitian grid."""
    c = np.full(fft_size // 2 + 1, 2.0)
    c[0] = 1.0
    if fft_size % 2 == 0:
        c[-1] = 1.0
    return c


def inner(a, b, fft_size: int) -> float:
    """Real inner product of one-sided spectrograms on the full grid."""
    c = bin_weights(fft_size)
    return float(np.real(np.sum(c * a * np.conj(b))))


def norm(spec, fft_size: int) -> float:
    c = bin_weights(fft_size)
    return float(np.sqrt(np.sum(c * np.abs(spec) ** 2)))


def padded_length(length: int, win: WindowPair) -> int:
    """Smallest valid signal length ``>= length`` for ``win``."""
    a = win.hop
    return max(-(-length // a) * a, win.fft_size)


def _check_length(L, win):
    if L % win.hop != 0:
        raise ConfigurationError(
            f"signal length {L} is not a multiple of hop {win.hop}; pad it first"
        )
    if L < win.fft_size:
        raise ConfigurationError(
            f"signal length {L} is shorter than fft_size {win.fft_size}"
        )


def stft(signal, win: WindowPair) -> np.ndarray:
    """Circular short-time Fourier transform.

    Parameters
    ----------
    signal : np.ndarray, shape=(..., L)
        Real signal(s); ``L`` must be a multiple of ``win.hop`` and at least
        ``win.fft_size``.
    win : WindowPair

    Returns
    -------
    np.ndarray, shape=(..., L // hop, fft_size // 2 + 1)
    """
    x = np.asarray(signal, dtype=float)
    L = x.shape[-1]
    _check_length(L, win)
    F, a = win.fft_size, win.hop
    wrapped = np.concatenate([x, x[..., :F - a]], axis=-1)
    frames = sliding_window_view(wrapped, F, axis=-1)[..., ::a, :]
    return np.fft.rfft(frames * win.analysis, axis=-1)


def istft(spec, win: WindowPair, length: int = None) -> np.ndarray:
    """Inverse of :func:`stft` by windowed circular overlap-add.

    Imaginary parts of the DC and Nyquist bins are ignored, which is what
    makes them part of the null space of the synthesis operator.

    Parameters
    ----------
    spec : np.ndarray, shape=(..., T, B)
    win : WindowPair
    length : int, optional
        Expected signal length; checked against ``T * hop``.
    """
    X = np.asarray(spec)
    F, a, R = win.fft_size, win.hop, win.overlap
    T, B = X.shape[-2:]
    if B != win.n_bins:
        raise ConfigurationError(f"spectrogram has {B} bins, window expects {win.n_bins}")
    if length is not None and length != T * a:
        raise ConfigurationError(f"{T} frames of hop {a} cannot give length {length}")
    _check_length(T * a, win)
    frames = F * np.fft.irfft(X, n=F, axis=-1) * win.synthesis
    # frame t, segment r lands in block (t + r) mod T
    segs = frames.reshape(frames.shape[:-1] + (R, a))
    out = segs[..., 0, :].copy()
    for r in range(1, R):
        out[..., r:, :] += segs[..., :T - r, r, :]
        out[..., :r, :] += segs[..., T - r:, r, :]
    return out.reshape(out.shape[:-2] + (T * a,))


def project_consistent(spec, win: WindowPair, adjoint: bool = False) -> np.ndarray:
    """Map a spectrogram onto the image of the STFT.

    Computes ``stft(istft(spec))``.  With ``adjoint=True`` the windows swap
    roles (synthesis window for analysis and vice versa), giving the adjoint
    projection; the two coincide for tight pairs.
    """
    if adjoint:
        win = win.swapped()
    return stft(istft(spec, win), win)


def consistency_residual(spec, win: WindowPair, eps: float = 1e-300) -> float:
    """Relative energy of the part of ``spec`` removed by the projection."""
    spec = np.asarray(spec)
    F = win.fft_size
    diff = spec - project_consistent(spec, win)
    return norm(diff, F) / max(norm(spec, F), eps)
