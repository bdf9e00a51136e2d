"""Determined blind source separation with spectrogram consistency."""

__version__ = "0.1.0"
