"""NC-OFDM/OFDM baseband symbol generation.

Subcarrier ``n`` (0-based) sits at ``f_n = n * delta_f``. A single frame is one
CP-free symbol sampled at ``T_s``; with the default ``T_s = T_u / n1`` the
``n1``-point DFT bin ``n`` holds exactly the (scaled) symbol of subcarrier ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np


class PatternKind(str, Enum):
    OFDM = "ofdm"
    INTERLEAVED = "interleaved"
    PATTERN1 = "pattern1"
    PATTERN2 = "pattern2"
    RANDOM = "random"


class Modulation(str, Enum):
    BPSK = "bpsk"
    QAM16 = "qam16"

    @property
    def bits_per_symbol(self) -> int:
        return 1 if self is Modulation.BPSK else 4

    @property
    def is_complex(self) -> bool:
        return self is Modulation.QAM16


# Ranges used when pattern parameters are drawn at random.
PATTERN1_Q_RANGE = (1, 6)
PATTERN1_C_RANGE = (4, 43)
PATTERN2_Q_RANGE = (1, 8)
PATTERN2_C_RANGE = (3, 15)


@dataclass(frozen=True)
class SubcarrierPattern:
    """Binary occupancy vector plus the parameters that produced it."""

    u: np.ndarray
    kind: PatternKind
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.uint8)
        if u.ndim != 1 or u.size == 0:
            raise ValueError("occupancy vector must be 1-D and non-empty")
        if np.any(u > 1):
            raise ValueError("occupancy vector must be binary")
        if u.sum() == 0:
            raise ValueError("pattern has no active subcarrier")
        object.__setattr__(self, "u", u)

    @property
    def N(self) -> int:
        return int(self.u.size)

    @property
    def n_active(self) -> int:
        return int(self.u.sum())

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.u)


def _interleaved(N: int, start: int, step: int) -> np.ndarray:
    u = np.zeros(N, dtype=np.uint8)
    u[start::step] = 1
    return u


def _spread(u: np.ndarray, lo: int, hi: int, step: int, anchor: int) -> None:
    """Activate indices in ``[lo, hi)`` that are ``anchor + k*step`` for integer k."""
    if lo >= hi:
        return
    first = lo + ((anchor - lo) % step)
    u[first:hi:step] = 1


def pattern1(N: int, q: int, c: int, offset: int) -> np.ndarray:
    """Contiguous block of ``c`` active subcarriers at ``offset``; outside the
    block every ``(q+1)``-th subcarrier is active, aligned to the block edges."""
    if c < 1 or offset < 0 or offset + c > N:
        raise ValueError(f"block c={c} at offset={offset} overflows N={N}")
    if q < 1:
        raise ValueError("q must be >= 1")
    u = np.zeros(N, dtype=np.uint8)
    u[offset:offset + c] = 1
    step = q + 1
    _spread(u, 0, offset, step, offset)
    _spread(u, offset + c, N, step, offset + c - 1)
    return u


def pattern2(N: int, c: int, qs: Sequence[int], offsets: Sequence[int]) -> np.ndarray:
    """Two blocks of ``c`` active subcarriers; the three gaps around them are
    interleaved with ``qs[0]``, ``qs[1]``, ``qs[2]`` inactive subcarriers between
    consecutive actives."""
    o1, o2 = offsets
    if c < 1 or min(qs) < 1:
        raise ValueError("c and q values must be >= 1")
    if o1 < 0 or o1 + c >= o2 or o2 + c > N:
        raise ValueError(f"blocks of c={c} at {offsets} overlap or overflow N={N}")
    u = np.zeros(N, dtype=np.uint8)
    u[o1:o1 + c] = 1
    u[o2:o2 + c] = 1
    _spread(u, 0, o1, qs[0] + 1, o1)
    _spread(u, o1 + c, o2, qs[1] + 1, o1 + c - 1)
    _spread(u, o2 + c, N, qs[2] + 1, o2 + c - 1)
    return u


def make_pattern(kind, N: int, rng_seed=None, **params) -> SubcarrierPattern:
    """Build an occupancy pattern.

    Parameters not given explicitly are drawn from ``rng_seed`` (an int seed or a
    ``numpy.random.Generator``) within their allowed ranges. ``prob`` for random
    patterns defaults to 0.5; an all-zero draw is redrawn.
    """
    kind = PatternKind(kind)
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)

    if kind is PatternKind.OFDM:
        return SubcarrierPattern(np.ones(N, dtype=np.uint8), kind)

    if kind is PatternKind.INTERLEAVED:
        q = int(params["q"])
        start = int(params.get("start", 0))
        if q < 1 or not 0 <= start < N:
            raise ValueError("invalid interleaving")
        return SubcarrierPattern(_interleaved(N, start, q), kind, {"q": q, "start": start})

    if kind is PatternKind.RANDOM:
        prob = float(params.get("prob", 0.5))
        if not 0.0 < prob <= 1.0:
            raise ValueError("prob must be in (0, 1]")
        while True:
            u = (rng.random(N) < prob).astype(np.uint8)
            if u.any():
                return SubcarrierPattern(u, kind, {"prob": prob})

    if kind is PatternKind.PATTERN1:
        q = int(params["q"]) if "q" in params else int(rng.integers(PATTERN1_Q_RANGE[0], PATTERN1_Q_RANGE[1] + 1))
        if "c" in params:
            c = int(params["c"])
        else:
            c = int(rng.integers(PATTERN1_C_RANGE[0], min(PATTERN1_C_RANGE[1], N - 1) + 1))
        offset = int(params["offset"]) if "offset" in params else int(rng.integers(0, N - c + 1))
        return SubcarrierPattern(pattern1(N, q, c, offset), kind, {"q": q, "c": c, "offset": offset})

    # Pattern 2
    qs = params.get("qs")
    if qs is None:
        qs = [int(v) for v in rng.integers(PATTERN2_Q_RANGE[0], PATTERN2_Q_RANGE[1] + 1, size=3)]
    if "c" in params:
        c = int(params["c"])
    else:
        c = int(rng.integers(PATTERN2_C_RANGE[0], min(PATTERN2_C_RANGE[1], (N - 1) // 2) + 1))
    offsets = params.get("offsets")
    if offsets is None:
        # first block start, then a gap of at least one subcarrier before the second
        o1 = int(rng.integers(0, N - 2 * c))
        o2 = int(rng.integers(o1 + c + 1, N - c + 1))
        offsets = (o1, o2)
    return SubcarrierPattern(pattern2(N, c, list(qs), tuple(offsets)), kind,
                             {"c": c, "qs": list(qs), "offsets": list(offsets)})


# --- modulation -------------------------------------------------------------

_GRAY2 = np.array([-3, -1, 3, 1])  # 2 Gray-coded bits -> PAM-4 level (00,01,10,11)
QAM16_SCALE = 1.0 / np.sqrt(10.0)


def qam16_constellation() -> np.ndarray:
    """Constellation indexed by the 4-bit word ``b0 b1 b2 b3`` (b0 = MSB);
    b0 b1 pick the in-phase level, b2 b3 the quadrature level."""
    words = np.arange(16)
    i_idx = words >> 2
    q_idx = words & 3
    return (_GRAY2[i_idx] + 1j * _GRAY2[q_idx]) * QAM16_SCALE


def modulate(bits, modulation) -> np.ndarray:
    """Map bits to unit-average-energy symbols (BPSK: 0 -> -1, 1 -> +1)."""
    modulation = Modulation(modulation)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    b = modulation.bits_per_symbol
    if bits.size % b:
        raise ValueError(f"{bits.size} bits is not a multiple of {b}")
    if modulation is Modulation.BPSK:
        return (2.0 * bits - 1.0).astype(complex)
    words = bits.reshape(-1, 4) @ np.array([8, 4, 2, 1])
    return qam16_constellation()[words]


def demodulate(symbols, modulation) -> np.ndarray:
    """Minimum-distance hard decisions back to bits."""
    modulation = Modulation(modulation)
    symbols = np.asarray(symbols).ravel()
    if modulation is Modulation.BPSK:
        return (symbols.real > 0).astype(np.uint8)
    const = qam16_constellation()
    words = np.argmin(np.abs(symbols[:, None] - const[None, :]), axis=1)
    return ((words[:, None] >> np.array([3, 2, 1, 0])) & 1).astype(np.uint8).ravel()


# --- synthesis --------------------------------------------------------------

@dataclass
class TransmissionParams:
    """Everything that defines one NC-OFDM symbol.

    ``T_u`` is fixed by ``delta_f``; ``T_cp`` defaults to zero.
    """

    pattern: SubcarrierPattern
    delta_f: float
    modulation: Modulation = Modulation.BPSK
    p: Optional[np.ndarray] = None
    T_cp: float = 0.0

    def __post_init__(self):
        self.modulation = Modulation(self.modulation)
        if self.delta_f <= 0:
            raise ValueError("delta_f must be positive")
        if self.T_cp < 0:
            raise ValueError("T_cp must be non-negative")
        if self.p is None:
            self.p = np.ones(self.N)
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (self.N,):
            raise ValueError("power factors must have one entry per subcarrier")
        if np.any(self.p < 1.0) or np.any(self.p > 2.0):
            raise ValueError("power factors must lie in [1, 2]")

    @property
    def N(self) -> int:
        return self.pattern.N

    @property
    def u(self) -> np.ndarray:
        return self.pattern.u

    @property
    def n_active(self) -> int:
        return self.pattern.n_active

    @property
    def T_u(self) -> float:
        return 1.0 / self.delta_f

    @property
    def T_o(self) -> float:
        return self.T_u + self.T_cp


def draw_powers(N: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(1.0, 2.0, size=N)


@dataclass
class ComplexFrame:
    samples: np.ndarray
    T_s: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("frame needs at least one sample")

    @property
    def n1(self) -> int:
        return int(self.samples.size)


def synthesize(params: TransmissionParams, symbols, n1: int, T_s: Optional[float] = None,
               t0: float = 0.0) -> ComplexFrame:
    """Sample ``s(t0 + k T_s) = sum_n u(n) p(n) s_n exp(j 2 pi n delta_f (t0 + k T_s))``.

    Args:
        params: transmission parameters.
        symbols: one symbol per active subcarrier, in increasing subcarrier order.
        n1: number of complex samples.
        T_s: sampling interval; defaults to ``T_u / n1``.
        t0: time of the first sample relative to the symbol start.
    """
    symbols = np.asarray(symbols, dtype=complex).ravel()
    active = params.pattern.active
    if symbols.size != active.size:
        raise ValueError(f"expected {active.size} symbols, got {symbols.size}")
    if T_s is None:
        T_s = params.T_u / n1
    if 1.0 / T_s < params.N * params.delta_f * (1 - 1e-12):
        raise ValueError("sampling rate below the occupied bandwidth")
    t = t0 + np.arange(n1) * T_s
    phase = np.exp(2j * np.pi * params.delta_f * np.outer(t, active))
    return ComplexFrame(phase @ (params.p[active] * symbols), T_s)


def synthesize_record(params_per_symbol: Sequence[TransmissionParams], symbols_per_symbol,
                      T_s: float) -> np.ndarray:
    """Concatenate several symbols of duration ``T_o`` each, sampled at ``T_s``.

    Within a symbol the waveform is evaluated over ``[0, T_o)`` so the first
    ``T_cp`` seconds repeat the last part of the useful period.
    """
    parts = []
    for params, syms in zip(params_per_symbol, symbols_per_symbol):
        n_samples = int(round(params.T_o / T_s))
        if not np.isclose(n_samples * T_s, params.T_o, rtol=1e-9, atol=0):
            raise ValueError("symbol duration is not a multiple of T_s")
        parts.append(synthesize(params, syms, n_samples, T_s).samples)
    return np.concatenate(parts)


def random_symbols(n_symbols: int, modulation, rng: np.random.Generator):
    """Draw bits uniformly and map them; returns ``(bits, symbols)``."""
    modulation = Modulation(modulation)
    bits = rng.integers(0, 2, size=n_symbols * modulation.bits_per_symbol, dtype=np.uint8)
    return bits, modulate(bits, modulation)


def vectorize(frame) -> np.ndarray:
    """``[Re s_0..Re s_{n1-1}, Im s_0..Im s_{n1-1}]``; accepts a frame, a complex
    vector, or a 2-D batch of complex rows."""
    samples = frame.samples if isinstance(frame, ComplexFrame) else np.asarray(frame)
    return np.concatenate([samples.real, samples.imag], axis=-1)


def devectorize(x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] % 2:
        raise ValueError("vector length must be even")
    n1 = x.shape[-1] // 2
    return x[..., :n1] + 1j * x[..., n1:]


def subcarrier_spectrum(x, n_bins: Optional[int] = None) -> np.ndarray:
    """Normalized DFT of vectorized frames: bin ``n`` equals ``p(n) s_n`` when the
    frame was sampled at ``T_s = T_u / n1``."""
    samples = devectorize(x)
    spec = np.fft.fft(samples, axis=-1) / samples.shape[-1]
    return spec if n_bins is None else spec[..., :n_bins]
