"""Byte entropy and the stable-high-entropy encryption heuristic."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signatures import scan_signatures

__all__ = ["EncryptionVerdict", "shannon_entropy", "window_entropies", "classify_encryption",
           "WINDOW_SIZE", "MEAN_THRESHOLD", "STDDEV_THRESHOLD"]

WINDOW_SIZE = 4096
MEAN_THRESHOLD = 7.5
STDDEV_THRESHOLD = 0.3


@dataclass(frozen=True)
class EncryptionVerdict:
    encrypted: bool
    mean_entropy: float
    entropy_stddev: float
    windows_sampled: int


def shannon_entropy(window: bytes) -> float:
    """Shannon entropy of ``window`` in bits per byte."""
    if len(window) == 0:
        raise ValueError("entropy of an empty window is undefined")
    counts = np.bincount(np.frombuffer(bytes(window), dtype=np.uint8), minlength=256)
    p = counts[counts > 0] / len(window)
    h = float(-(p * np.log2(p)).sum())
    # clamp float noise at the two ends; 0.0 first so -0.0 never escapes
    return min(max(0.0, h), 8.0)


def window_entropies(blob: bytes, window: int = WINDOW_SIZE) -> np.ndarray:
    """Entropy of each non-overlapping full window; a short blob is one window."""
    blob = bytes(blob)
    if len(blob) <= window:
        return np.array([shannon_entropy(blob)])
    n = len(blob) // window
    return np.array([shannon_entropy(blob[i * window:(i + 1) * window]) for i in range(n)])


def classify_encryption(blob: bytes, window: int = WINDOW_SIZE) -> EncryptionVerdict:
    """Flag a blob as encrypted when its entropy is uniformly high and no known signature appears.

    Compressed data is just as high-entropy as ciphertext, so a recognised
    signature anywhere in the blob overrides the entropy reading.
    """
    ent = window_entropies(blob, window)
    mean = float(ent.mean())
    std = float(ent.std())
    encrypted = (not scan_signatures(blob)) and mean > MEAN_THRESHOLD and std < STDDEV_THRESHOLD
    return EncryptionVerdict(encrypted, mean, std, len(ent))
