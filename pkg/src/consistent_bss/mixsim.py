"""Seeded synthetic mixtures and spectrogram perturbations.

All randomness comes from :func:`substream`, which derives an independent
generator from a base seed and a stream name so that, for example, the RIRs
and the mixing matrix of one run do not share random numbers.
"""

import zlib
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .stft import WindowPair, norm, project_consistent

__all__ = [
    "substream",
    "speech_like",
    "random_mixing_matrix",
    "mix_instantaneous",
    "synth_rir",
    "rir_grid",
    "rt60_to_decay",
    "mix_convolutive",
    "PermutationPlan",
    "scramble_permutation",
    "dropout",
    "make_exclusive",
    "permutation_leakage",
]


def substream(seed, name):
    """Generator for the named sub-stream of ``seed``."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def _resonator(freq, bandwidth, fs):
    r = np.exp(-np.pi * bandwidth / fs)
    theta = 2 * np.pi * freq / fs
    a = [1.0, -2 * r * np.cos(theta), r * r]
    return [1.0 - r], a


def speech_like(seed, duration=3.0, fs=16000, f0_range=(100.0, 180.0)):
    """Synthetic speech-like signal with unit RMS.

    A sequence of syllables separated by pauses.  Voiced syllables are gliding
    glottal pulse trains through three formant resonators; some syllables get
    a fricative noise burst.  The result is sparse in time and frequency,
    which is what the Laplace source models expect.
    """
    rng = substream(seed, "speech")
    n = int(round(duration * fs))
    out = np.zeros(n)
    pos = int(rng.uniform(0.0, 0.15) * fs)
    while pos < n:
        length = int(rng.uniform(0.12, 0.35) * fs)
        seg_n = min(length, n - pos)
        t = np.arange(seg_n) / fs
        f_start, f_end = rng.uniform(*f0_range, size=2)
        f0 = f_start + (f_end - f_start) * t / max(t[-1], 1e-9) if seg_n > 1 else np.full(1, f_start)
        phase = np.cumsum(f0) / fs
        # Rosenberg-like pulse via a rectified, sharpened sawtooth
        saw = phase - np.floor(phase)
        pulses = np.maximum(0.0, np.sin(np.pi * saw)) ** 3
        pulses -= pulses.mean()
        seg = np.zeros(seg_n)
        formants = (rng.uniform(300, 900), rng.uniform(900, 2300), rng.uniform(2300, 3400))
        for k, fk in enumerate(formants):
            b, a = _resonator(fk, 80.0 + 40.0 * k, fs)
            seg += lfilter(b, a, pulses) / (k + 1)
        if rng.random() < 0.35:
            noise = rng.standard_normal(seg_n)
            b, a = _resonator(rng.uniform(3500, 6000), 1500.0, fs)
            burst = lfilter(b, a, noise)
            seg += 0.3 * burst * np.exp(-t / 0.05) * np.std(seg) / max(np.std(burst), 1e-12)
        env = np.sin(np.pi * np.arange(seg_n) / seg_n) ** 0.5
        out[pos:pos + seg_n] += seg * env * rng.uniform(0.5, 1.0)
        pos += length + int(rng.uniform(0.03, 0.2) * fs)
    return out / np.sqrt(np.mean(out ** 2))


def random_mixing_matrix(seed, n, max_cond=10.0):
    """Gaussian ``n x n`` matrix redrawn until its condition number is at
    most ``max_cond``."""
    rng = substream(seed, "mixing-matrix")
    while True:
        A = rng.standard_normal((n, n))
        if np.linalg.cond(A) <= max_cond:
            return A


def mix_instantaneous(sources, A):
    """``x = A @ s`` for sources of shape ``(N, L)``."""
    A = np.asarray(A)
    s = np.asarray(sources)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[1] != s.shape[0]:
        raise ValueError(f"mixing matrix {A.shape} does not fit {s.shape[0]} sources")
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise ValueError("mixing matrix is singular")
    return A @ s


def rt60_to_decay(rt60, fs):
    """Amplitude decay constant (samples) giving a 60 dB drop after ``rt60`` s."""
    return rt60 * fs / np.log(1e3)


def synth_rir(seed, taps, decay):
    """Exponentially decaying Gaussian noise with unit energy.

    ``r[k] = g[k] * exp(-k / decay)`` with ``r[0] > 0``.
    """
    if taps < 1 or not decay > 0:
        raise ValueError("need taps >= 1 and decay > 0")
    g = np.random.default_rng(seed).standard_normal(taps)
    r = g * np.exp(-np.arange(taps) / decay)
    r[0] = abs(r[0]) if r[0] != 0 else 1.0
    return r / np.linalg.norm(r)


def rir_grid(seed, n, taps=2048, decay=None, fs=16000):
    """``(n, n, taps)`` grid of independent synthetic RIRs.

    ``decay`` defaults to a 130 ms reverberation time at ``fs``.
    """
    if decay is None:
        decay = rt60_to_decay(0.13, fs)
    rng = substream(seed, "rir")
    seeds = rng.integers(0, 2**63, size=(n, n))
    return np.array([[synth_rir(int(seeds[i, j]), taps, decay) for j in range(n)]
                     for i in range(n)])


def mix_convolutive(sources, rirs):
    """``x_m = sum_n rirs[m, n] * s_n`` (linear convolution, truncated)."""
    s = np.asarray(sources, dtype=float)
    rirs = np.asarray(rirs, dtype=float)
    if rirs.ndim != 3 or rirs.shape[1] != s.shape[0]:
        raise ValueError(f"RIR grid {rirs.shape} does not fit {s.shape[0]} sources")
    L = s.shape[-1]
    x = np.zeros((rirs.shape[0], L))
    for m in range(rirs.shape[0]):
        for n in range(s.shape[0]):
            x[m] += fftconvolve(s[n], rirs[m, n])[:L]
    return x


@dataclass(frozen=True, eq=False)
class PermutationPlan:
    """Per-bin channel permutations; ``perms[f]`` lists the input channel
    that lands in each output channel at bin ``f``."""

    perms: np.ndarray  # (B, M) ints

    def __post_init__(self):
        p = np.asarray(self.perms)
        if p.ndim != 2 or not np.all(np.sort(p, axis=1) == np.arange(p.shape[1])):
            raise ValueError("every row must be a permutation of 0..M-1")

    @classmethod
    def identity(cls, n_bins, n_channels):
        return cls(np.tile(np.arange(n_channels), (n_bins, 1)))

    @classmethod
    def reversal(cls, n_bins, n_channels):
        return cls(np.tile(np.arange(n_channels)[::-1], (n_bins, 1)))

    @classmethod
    def random(cls, seed, n_bins, n_channels):
        rng = substream(seed, "permutation")
        return cls(np.array([rng.permutation(n_channels) for _ in range(n_bins)]))

    def inverse(self):
        return PermutationPlan(np.argsort(self.perms, axis=1))


def scramble_permutation(specs, plan):
    """Permute channels independently in every bin.

    ``out[i, :, f] = specs[plan.perms[f, i], :, f]``
    """
    specs = np.asarray(specs)
    M, T, B = specs.shape
    if plan.perms.shape != (B, M):
        raise ValueError(f"plan of shape {plan.perms.shape} does not fit {B} bins x {M} channels")
    bins = np.arange(B)
    return specs[plan.perms.T, :, bins[None, :]].transpose(0, 2, 1)


def dropout(spec, rate, seed):
    """Zero each coefficient independently with probability ``rate``."""
    if not 0 <= rate <= 1:
        raise ValueError("rate must lie in [0, 1]")
    spec = np.asarray(spec)
    keep = substream(seed, "dropout").random(spec.shape) >= rate
    return spec * keep


def make_exclusive(specs):
    """Keep each time-frequency coefficient only in the channel where it is
    largest, so every bin holds exactly one source."""
    specs = np.asarray(specs)
    winner = np.argmax(np.abs(specs), axis=0)
    mask = winner[None] == np.arange(specs.shape[0])[:, None, None]
    return specs * mask


def permutation_leakage(specs, plan, win: WindowPair):
    """Cross-channel leakage caused by projecting scrambled spectrograms.

    ``specs`` holds one source per channel.  The sources are scrambled with
    ``plan``, projected onto the consistent subspace, and unscrambled with the
    inverse plan.  Without the projection this round trip is exact; with it,
    energy of source ``j`` ends up in channels ``i != j``.  Source
    contributions are tracked separately (the projection is linear).

    Returns
    -------
    leakage : float
        Energy of source ``j`` found in channels ``i != j``, summed over
        ``j`` and divided by the total energy after projection.
    projected : np.ndarray, shape=(M, T, B)
        Projection of the scrambled spectrograms (the unaligned view).
    """
    specs = np.asarray(specs)
    M = specs.shape[0]
    F = win.fft_size
    inv = plan.inverse()
    wrong = total = 0.0
    for j in range(M):
        only_j = np.zeros_like(specs)
        only_j[j] = specs[j]
        back = scramble_permutation(project_consistent(scramble_permutation(only_j, plan), win), inv)
        e = np.array([norm(back[i], F) ** 2 for i in range(M)])
        total += e.sum()
        wrong += e.sum() - e[j]
    leakage = wrong / total if total > 0 else 0.0
    return float(leakage), project_consistent(scramble_permutation(specs, plan), win)
