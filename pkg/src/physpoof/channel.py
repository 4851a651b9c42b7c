"""AWGN, tapped-delay-line multipath and Rayleigh flat-fading channels.

Noise convention: ``N0`` is the total complex noise variance per sample, i.e.
each real dimension has variance ``N0 / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .waveform import ComplexFrame, TransmissionParams


class ChannelKind(str, Enum):
    AWGN = "awgn"
    MULTIPATH = "multipath"
    RAYLEIGH = "rayleigh"


# Tx-adversary taps of the fading experiments.
DEFAULT_AMPLITUDES = (1.0, 0.8, 0.6)
DEFAULT_DELAYS_S = (0.0, 2e-6, 4e-6)


@dataclass(frozen=True)
class ChannelSpec:
    kind: ChannelKind = ChannelKind.AWGN
    amplitudes: Sequence[float] = DEFAULT_AMPLITUDES
    delays_s: Sequence[float] = DEFAULT_DELAYS_S

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if len(self.amplitudes) != len(self.delays_s):
            raise ValueError("amplitudes and delays differ in length")
        d = np.asarray(self.delays_s, dtype=float)
        if np.any(d < 0) or np.any(np.diff(d) < 0):
            raise ValueError("delays must be non-negative and sorted")


@dataclass(frozen=True)
class LinkBudget:
    E_s: float
    snr: float
    Q: float
    eb_n0: float


def _samples(frame):
    return frame.samples if isinstance(frame, ComplexFrame) else np.asarray(frame, dtype=complex)


def _like(frame, samples):
    return ComplexFrame(samples, frame.T_s) if isinstance(frame, ComplexFrame) else samples


def complex_noise(shape, N0: float, rng: np.random.Generator) -> np.ndarray:
    scale = np.sqrt(N0 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_awgn(frame, N0, rng: np.random.Generator):
    """Add circular complex Gaussian noise of variance ``N0`` (per-row ``N0`` allowed
    for 2-D batches)."""
    s = _samples(frame)
    N0 = np.asarray(N0, dtype=float)
    if np.any(N0 < 0):
        raise ValueError("N0 must be non-negative")
    if N0.ndim == 1:
        N0 = N0[:, None]
    return _like(frame, s + np.sqrt(N0) * complex_noise(s.shape, 1.0, rng))


def tap_vector(amplitudes, delays_s, T_s: float) -> np.ndarray:
    """Integer-tap impulse response; every delay must be a multiple of ``T_s``."""
    delays = np.asarray(delays_s, dtype=float) / T_s
    idx = np.round(delays).astype(int)
    if not np.allclose(idx, delays, rtol=0, atol=1e-6):
        raise ValueError(f"delays {list(delays_s)} are not multiples of T_s={T_s}")
    h = np.zeros(idx.max() + 1, dtype=complex)
    np.add.at(h, idx, np.asarray(amplitudes, dtype=complex))
    return h


def apply_multipath(frame, amplitudes=DEFAULT_AMPLITUDES, delays_s=DEFAULT_DELAYS_S,
                    T_s: Optional[float] = None):
    """Linear convolution with the tap vector, truncated to the input length."""
    if T_s is None:
        T_s = frame.T_s
    s = _samples(frame)
    h = tap_vector(amplitudes, delays_s, T_s)
    n1 = s.shape[-1]
    out = np.zeros_like(s)
    for d in np.flatnonzero(h):
        if d < n1:
            out[..., d:] += h[d] * s[..., :n1 - d]
    return _like(frame, out)


def apply_rayleigh_flat(frame, rng: np.random.Generator):
    """Multiply by one gain ``h ~ CN(0, 1)`` (one per row for 2-D batches);
    returns ``(faded, gain)``."""
    s = _samples(frame)
    lead = s.shape[:-1]
    h = complex_noise(lead, 1.0, rng)
    faded = s * (h[..., None] if lead else h)
    return _like(frame, faded), h


def signal_power(frame) -> np.ndarray:
    """``E_s = ||s||^2 / n1`` per frame (per row for batches)."""
    s = _samples(frame)
    return np.mean(np.abs(s) ** 2, axis=-1)


def link_budget(params: TransmissionParams, frame, N0: float) -> LinkBudget:
    if N0 <= 0:
        raise ValueError("N0 must be positive")
    E_s = float(signal_power(frame))
    Q = params.n_active * params.modulation.bits_per_symbol / params.N
    snr = E_s / N0
    return LinkBudget(E_s=E_s, snr=snr, Q=Q, eb_n0=snr / Q)


def db2lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def n0_for_snr(E_s, snr_db) -> np.ndarray:
    return np.asarray(E_s, dtype=float) / db2lin(snr_db)


def apply_channel(samples: np.ndarray, spec: ChannelSpec, T_s: float, rng: np.random.Generator):
    """Deterministic part of a channel (no noise); returns ``(samples, gain)`` with
    ``gain`` set only for flat fading."""
    if spec.kind is ChannelKind.AWGN:
        return samples, None
    if spec.kind is ChannelKind.MULTIPATH:
        return apply_multipath(samples, spec.amplitudes, spec.delays_s, T_s), None
    return apply_rayleigh_flat(samples, rng)
