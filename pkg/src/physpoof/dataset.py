"""Datasets of vectorized noisy frames: generation, persistence and splitting.

On-disk layout of a dataset directory::

    manifest.json   generation config, sizes, label schema
    data.f32le      rows x 2*n1 little-endian float32
    labels.f32le    occupancy labels: rows x (N + 2) = [u..., N, delta_f_khz]
    labels.u8       class-index labels (one byte per row)

Every row is generated from its own ``numpy`` generator seeded with
``(seed, row)`` so any split of the work across processes reproduces the
serial result bit for bit.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import channel as ch
from .waveform import (
    Modulation,
    PatternKind,
    SubcarrierPattern,
    TransmissionParams,
    draw_powers,
    make_pattern,
    random_symbols,
    synthesize,
    vectorize,
)

SCHEMA_VERSION = 1
LABEL_SCHEMAS = ("none", "occupancy", "class")
POWER_MODES = ("random", "fixed", "unit")
DESK_SIZES = {"train": 50_000, "test": 10_000}
PAPER_SIZES = {"train": 2_000_000, "test": 250_000}


class SchemaError(ValueError):
    """Manifest is missing, malformed, or from another schema version."""


@dataclass
class DatasetConfig:
    """What to generate.

    ``pattern`` is a :class:`PatternKind` value or ``"choice"``, in which case
    ``pattern_params["patterns"]`` lists the active-index sets to pick from
    uniformly. ``delta_f`` is a grid drawn uniformly per row. ``snr_db=None``
    gives noiseless rows. ``noise_fraction`` of the rows carry noise only (their
    noise level is set as if the drawn signal had been present).
    """

    N: int = 16
    n1: int = 32
    delta_f: Sequence[float] = (15e3,)
    T_s: Optional[float] = None
    pattern: str = "random"
    pattern_params: dict = field(default_factory=dict)
    modulation: str = "bpsk"
    power: str = "random"
    power_seed: int = 0
    snr_db: Optional[float] = None
    channel: str = "awgn"
    noise_fraction: float = 0.0
    label_schema: str = "occupancy"

    def __post_init__(self):
        self.delta_f = [float(v) for v in np.atleast_1d(self.delta_f)]
        if self.N < 1 or self.n1 < 1:
            raise ValueError("N and n1 must be positive")
        if self.pattern != "choice":
            PatternKind(self.pattern)
        elif not self.pattern_params.get("patterns"):
            raise ValueError("choice pattern needs pattern_params['patterns']")
        Modulation(self.modulation)
        ch.ChannelKind(self.channel)
        if self.power not in POWER_MODES:
            raise ValueError(f"power must be one of {POWER_MODES}")
        if self.label_schema not in LABEL_SCHEMAS:
            raise ValueError(f"label schema must be one of {LABEL_SCHEMAS}")
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ValueError("noise_fraction must be in [0, 1]")
        if self.noise_fraction > 0 and self.snr_db is None:
            raise ValueError("noise-only rows need an SNR")
        if 1.0 / self.sampling_interval < self.N * max(self.delta_f) * (1 - 1e-12):
            raise ValueError("sampling rate below Nyquist for the largest delta_f")

    @property
    def sampling_interval(self) -> float:
        if self.T_s is not None:
            return float(self.T_s)
        if len(self.delta_f) == 1:
            return 1.0 / (self.delta_f[0] * self.n1)
        return 1.0 / (self.N * max(self.delta_f))

    @property
    def label_width(self) -> int:
        return self.N + 2

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown dataset config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Dataset:
    X: np.ndarray
    labels: Optional[np.ndarray]
    config: DatasetConfig
    seed: int
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def occupancy(self) -> np.ndarray:
        self._need("occupancy")
        return self.labels[:, :self.config.N].astype(np.uint8)

    @property
    def n_subcarriers(self) -> np.ndarray:
        self._need("occupancy")
        return self.labels[:, self.config.N]

    @property
    def delta_f_khz(self) -> np.ndarray:
        self._need("occupancy")
        return self.labels[:, self.config.N + 1]

    def _need(self, schema):
        if self.config.label_schema != schema:
            raise ValueError(f"dataset labels are {self.config.label_schema!r}, not {schema!r}")

    def subset(self, idx) -> "Dataset":
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.X[idx], labels, self.config, self.seed, dict(self.extra))

    def manifest(self) -> dict:
        cfg = asdict(self.config)
        return {"schema_version": SCHEMA_VERSION, "rows": len(self), "d": int(self.X.shape[1]),
                "seed": self.seed, "config": cfg, "T_s": self.config.sampling_interval,
                "label_schema": self.config.label_schema, **self.extra}


def _pattern_for_row(cfg: DatasetConfig, rng: np.random.Generator) -> SubcarrierPattern:
    if cfg.pattern == "choice":
        sets = cfg.pattern_params["patterns"]
        k = int(rng.integers(len(sets)))
        u = np.zeros(cfg.N, dtype=np.uint8)
        u[list(sets[k])] = 1
        return SubcarrierPattern(u, PatternKind.RANDOM, {"choice": k})
    return make_pattern(cfg.pattern, cfg.N, rng, **cfg.pattern_params)


def row_powers(cfg: DatasetConfig, rng: np.random.Generator) -> np.ndarray:
    """Power factors of one row: fresh per row (``random``), drawn once per
    transmitter from ``power_seed`` (``fixed``), or all one (``unit``)."""
    if cfg.power == "random":
        return draw_powers(cfg.N, rng)
    if cfg.power == "fixed":
        return draw_powers(cfg.N, np.random.default_rng([cfg.power_seed, 0x5EED]))
    return np.ones(cfg.N)


def generate_row(cfg: DatasetConfig, seed: int, row: int):
    """One ``(x, occupancy_label, is_signal)`` triple."""
    rng = np.random.default_rng([seed, row])
    pattern = _pattern_for_row(cfg, rng)
    delta_f = cfg.delta_f[int(rng.integers(len(cfg.delta_f)))]
    p = row_powers(cfg, rng)
    params = TransmissionParams(pattern, delta_f, cfg.modulation, p)
    _, symbols = random_symbols(pattern.n_active, cfg.modulation, rng)
    T_s = cfg.sampling_interval
    s = synthesize(params, symbols, cfg.n1, T_s).samples
    s, gain = ch.apply_channel(s, ch.ChannelSpec(cfg.channel), T_s, rng)
    is_signal = True
    if cfg.noise_fraction > 0:
        is_signal = bool(rng.random() >= cfg.noise_fraction)
    if cfg.snr_db is not None:
        E_s = ch.signal_power(s)
        N0 = ch.n0_for_snr(E_s if E_s > 0 else 1.0, cfg.snr_db)
        if not is_signal:
            s = np.zeros_like(s)
        s = ch.apply_awgn(s, N0, rng)
    label = np.concatenate([pattern.u, [cfg.N, delta_f / 1e3]]).astype(np.float32)
    return vectorize(s).astype(np.float32), label, is_signal


def _generate_rows(args):
    cfg, seed, start, stop = args
    X = np.empty((stop - start, 2 * cfg.n1), dtype=np.float32)
    L = np.empty((stop - start, cfg.label_width), dtype=np.float32)
    S = np.empty(stop - start, dtype=np.uint8)
    for i, row in enumerate(range(start, stop)):
        X[i], L[i], S[i] = generate_row(cfg, seed, row)
    return X, L, S


def build(config: DatasetConfig, size: int, seed: int, workers: int = 1,
          out_dir=None) -> Dataset:
    """Generate ``size`` rows; optionally persist to ``out_dir``."""
    if size < 1:
        raise ValueError("size must be >= 1")
    chunks = max(1, workers * 4)
    bounds = np.linspace(0, size, chunks + 1).astype(int)
    jobs = [(config, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_generate_rows, jobs))
    else:
        parts = [_generate_rows(j) for j in jobs]
    X = np.concatenate([p[0] for p in parts])
    L = np.concatenate([p[1] for p in parts])
    S = np.concatenate([p[2] for p in parts])
    if config.label_schema == "occupancy":
        labels = L
    elif config.label_schema == "class":
        labels = S
    else:
        labels = None
    ds = Dataset(X, labels, config, seed)
    if out_dir is not None:
        save(ds, out_dir)
    return ds


def split(ds: Dataset, fractions: Sequence[float], seed: int) -> List[Dataset]:
    """Disjoint, exhaustive random partition with the given fractions."""
    fractions = np.asarray(fractions, dtype=float)
    if np.any(fractions < 0) or not np.isclose(fractions.sum(), 1.0):
        raise ValueError("fractions must be non-negative and sum to 1")
    perm = np.random.default_rng(seed).permutation(len(ds))
    cuts = np.round(np.cumsum(fractions)[:-1] * len(ds)).astype(int)
    return [ds.subset(np.sort(idx)) for idx in np.split(perm, cuts)]


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save(ds: Dataset, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "data.f32le", np.ascontiguousarray(ds.X, dtype="<f4").tobytes())
    if ds.labels is not None:
        if ds.config.label_schema == "class":
            _atomic_write(out / "labels.u8", np.ascontiguousarray(ds.labels, dtype=np.uint8).tobytes())
        else:
            _atomic_write(out / "labels.f32le", np.ascontiguousarray(ds.labels, dtype="<f4").tobytes())
    text = json.dumps(ds.manifest(), indent=2, sort_keys=True) + "\n"
    _atomic_write(out / "manifest.json", text.encode("utf-8"))
    return out


def load(in_dir) -> Dataset:
    src = Path(in_dir)
    try:
        man = json.loads((src / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read manifest in {src}: {exc}") from exc
    if man.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"schema_version {man.get('schema_version')!r} != {SCHEMA_VERSION}")
    cfg = DatasetConfig.from_dict(man["config"])
    rows, d = man["rows"], man["d"]
    X = np.fromfile(src / "data.f32le", dtype="<f4")
    if X.size != rows * d:
        raise SchemaError("data size does not match manifest")
    X = X.reshape(rows, d).astype(np.float32)
    labels = None
    if cfg.label_schema == "class":
        labels = np.fromfile(src / "labels.u8", dtype=np.uint8)
    elif cfg.label_schema == "occupancy":
        labels = np.fromfile(src / "labels.f32le", dtype="<f4").reshape(rows, cfg.label_width).astype(np.float32)
    extra = {k: v for k, v in man.items()
             if k not in ("schema_version", "rows", "d", "seed", "config", "T_s", "label_schema")}
    return Dataset(X, labels, cfg, man["seed"], extra)


# --- Example-1 (three interleaved cases) ---------------------------------------

def build_example1(size: int, snr_db: float = 5.0, n1: int = 75, seed: int = 0) -> Dataset:
    """Windows of ``n1`` samples from interleaved NC-OFDM records of the three
    reference cases (T_u = 320, 256, 192 us); labels are class indices 0, 1, 2
    (case 1, 2, 3)."""
    from .cyclo import TABLE1_CASES, TABLE1_T_O, TABLE1_T_S, interleaved_record

    per_symbol = int(round(TABLE1_T_O / TABLE1_T_S))
    X = np.empty((size, 2 * n1), dtype=np.float32)
    y = np.empty(size, dtype=np.uint8)
    for row in range(size):
        rng = np.random.default_rng([seed, row])
        case = int(rng.integers(3))
        T_u, q = TABLE1_CASES[case + 1]
        start = int(rng.integers(per_symbol))
        rec = interleaved_record(T_u, q, start + n1, snr_db, rng)
        X[row] = vectorize(rec[start:start + n1])
        y[row] = case
    cfg = DatasetConfig(N=64, n1=n1, delta_f=(1.0 / 320e-6,), T_s=TABLE1_T_S, pattern="interleaved",
                        pattern_params={"q": 5}, snr_db=snr_db, label_schema="class")
    return Dataset(X, y, cfg, seed, {"kind": "example1"})
