"""WAV, image and run-manifest I/O."""

import datetime
import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
from PIL import Image
from scipy.io import wavfile

from . import __version__

__all__ = [
    "UnsupportedAudioError",
    "read_wav",
    "write_wav",
    "fixture_path",
    "spectrogram_image",
    "save_spectrogram_image",
    "file_sha256",
    "array_sha256",
    "RunManifest",
]

FIXTURES = ("speech_a.wav", "speech_b.wav")


class UnsupportedAudioError(ValueError):
    pass


def read_wav(path):
    """Read a PCM16 or float32 WAV file.

    Returns
    -------
    data : np.ndarray, shape=(channels, samples), float64
        PCM16 samples are divided by 32768.
    sample_rate : int
    """
    try:
        fs, data = wavfile.read(path)
    except ValueError as exc:
        raise UnsupportedAudioError(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        data = data.astype(np.float64)
    else:
        raise UnsupportedAudioError(f"{path}: unsupported sample format {data.dtype}")
    if data.ndim == 1:
        data = data[:, None]
    if not np.all(np.isfinite(data)):
        raise UnsupportedAudioError(f"{path}: non-finite samples")
    return np.ascontiguousarray(data.T), int(fs)


def write_wav(path, data, sample_rate):
    """Write ``(channels, samples)`` data as a float32 WAV file."""
    data = np.atleast_2d(np.asarray(data))
    wavfile.write(path, int(sample_rate), np.ascontiguousarray(data.T.astype(np.float32)))


def fixture_path(name):
    """Path of a bundled speech-like fixture (``speech_a.wav``, ``speech_b.wav``)."""
    return resources.files("consistent_bss") / "data" / name


def spectrogram_image(spec, range_db=100.0):
    """8-bit grayscale magnitude image of a ``(T, B)`` spectrogram.

    The top ``range_db`` decibels map linearly onto 0..255 and frequency
    increases upward.
    """
    mag = np.abs(np.asarray(spec))
    peak = mag.max()
    if peak == 0:
        return np.zeros(mag.T.shape, dtype=np.uint8)
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(mag / peak)
    db = np.clip(db, -range_db, 0.0)
    pix = np.round((db + range_db) * (255.0 / range_db)).astype(np.uint8)
    return pix.T[::-1]


def save_spectrogram_image(path, spec, range_db=100.0):
    Image.fromarray(spectrogram_image(spec, range_db)).save(path)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def array_sha256(arr):
    a = np.ascontiguousarray(arr)
    return hashlib.sha256(a.dtype.str.encode() + str(a.shape).encode() + a.tobytes()).hexdigest()


@dataclass
class RunManifest:
    """Everything needed to rerun a command."""

    command: str
    flags: dict
    seed: int = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: str = __version__
    numpy_version: str = np.__version__
    python_version: str = platform.python_version()
    timestamp: str = field(
        default_factory=lambda: datetime.datetime.now(datetime.timezone.utc).isoformat()
    )

    @classmethod
    def for_files(cls, command, flags, paths, seed=None):
        return cls(command, flags, seed, {str(p): file_sha256(p) for p in paths})

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
