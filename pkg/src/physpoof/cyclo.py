"""Cyclic autocorrelation estimation and the interleaved NC-OFDM ambiguity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from . import channel
from .waveform import PatternKind, TransmissionParams, make_pattern, random_symbols, synthesize_record

# (case, T_u, q); every case shares T_o = 384 us so the CP lengths differ.
TABLE1_CASES = {1: (320e-6, 5), 2: (256e-6, 4), 3: (192e-6, 3)}
TABLE1_T_O = 384e-6
TABLE1_N = 64
TABLE1_T_S = 1e-6


@dataclass
class CafGrid:
    alpha: float
    lags: np.ndarray
    values: np.ndarray
    T_s: float
    M: int

    @property
    def tau(self) -> np.ndarray:
        return self.lags * self.T_s

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


def estimate_caf(samples, alpha: float, lag_range, T_s: float) -> CafGrid:
    """``R(alpha, l T_s) = (1/M) sum_n r[n] conj(r[n - l]) exp(-j 2 pi alpha n T_s)``.

    Samples outside the record are taken as zero. ``lag_range`` is either an
    iterable of integer lags or a ``(lo, hi)`` pair (inclusive).
    """
    r = np.asarray(samples, dtype=complex).ravel()
    M = r.size
    if M == 0:
        raise ValueError("empty record")
    if isinstance(lag_range, tuple) and len(lag_range) == 2:
        lags = np.arange(lag_range[0], lag_range[1] + 1)
    else:
        lags = np.asarray(list(lag_range), dtype=int)
    if np.max(np.abs(lags)) >= M:
        raise ValueError("record shorter than the largest lag")

    n = np.arange(M)
    rot = r * np.exp(-2j * np.pi * alpha * n * T_s) if alpha else r
    vals = np.empty(lags.size, dtype=complex)
    for i, lag in enumerate(lags):
        if lag >= 0:
            vals[i] = np.dot(rot[lag:], np.conj(r[:M - lag]))
        else:
            vals[i] = np.dot(rot[:M + lag], np.conj(r[-lag:]))
    return CafGrid(alpha, lags, vals / M, T_s, M)


def caf_peaks(grid: CafGrid, threshold_frac: float = 0.3) -> np.ndarray:
    """Lags of strict 3-bin local maxima of ``|R|`` above ``threshold_frac * max``."""
    mag = grid.magnitude
    top = mag.max()
    if top == 0:
        raise ValueError("CAF is identically zero")
    padded = np.concatenate([[-np.inf], mag, [-np.inf]])
    is_peak = (padded[1:-1] > padded[:-2]) & (padded[1:-1] > padded[2:])
    keep = is_peak & (mag >= threshold_frac * top)
    return np.sort(grid.lags[keep])


def peak_spacing(peak_lags) -> float:
    """Fundamental spacing (in lag bins) of a peak set: the median gap."""
    peaks = np.sort(np.asarray(peak_lags))
    if peaks.size < 2:
        raise ValueError("need at least two peaks")
    return float(np.median(np.diff(peaks)))


def ambiguity_set(peak_lags, candidate_params: Iterable[Tuple[int, float]], T_s: float,
                  tol_bins: float = 1.0) -> List[Tuple[int, float]]:
    """Candidates ``(q, T_u)`` whose ``T_u / q`` matches the peak spacing."""
    if len(peak_lags) == 0:
        raise ValueError("no peaks")
    spacing = peak_spacing(peak_lags) * T_s
    return [(q, T_u) for q, T_u in candidate_params if abs(T_u / q - spacing) <= tol_bins * T_s]


def table1_candidates() -> List[Tuple[int, float]]:
    return [(q, T_u) for T_u, q in TABLE1_CASES.values()]


def interleaved_record(T_u: float, q: int, M: int, snr_db: float, rng: np.random.Generator,
                       N: int = TABLE1_N, T_o: float = TABLE1_T_O, T_s: float = TABLE1_T_S,
                       modulation="bpsk") -> np.ndarray:
    """Noisy multi-symbol record of interleaved NC-OFDM, ``M`` samples long.

    Fresh random symbols for every OFDM symbol; noise scaled to ``snr_db`` using
    the measured record power.
    """
    pattern = make_pattern(PatternKind.INTERLEAVED, N, q=q)
    params = TransmissionParams(pattern, delta_f=1.0 / T_u, modulation=modulation, T_cp=T_o - T_u)
    per_symbol = int(round(T_o / T_s))
    n_sym = -(-M // per_symbol)
    syms = [random_symbols(pattern.n_active, modulation, rng)[1] for _ in range(n_sym)]
    clean = synthesize_record([params] * n_sym, syms, T_s)[:M]
    N0 = channel.signal_power(clean) / channel.db2lin(snr_db)
    return channel.apply_awgn(clean, N0, rng)


def table1_case_caf(case: int, snr_db: float = 5.0, M: int = 100_000, max_lag: int = 400,
                    seed: int = 0) -> CafGrid:
    T_u, q = TABLE1_CASES[case]
    rng = np.random.default_rng([seed, case])
    r = interleaved_record(T_u, q, M, snr_db, rng)
    return estimate_caf(r, 0.0, (-max_lag, max_lag), TABLE1_T_S)
