"""Adversary and receiver pipelines.

The adversary overhears Tx frames over the Tx-adversary (TA) link, infers the
transmission parameters, and transmits bogus bits over the adversary-Rx (AR)
link. The receiver demodulates whatever arrives on the subcarriers it believes
are active. Bit-error accounting for parameter mismatches:

* ``(N, delta_f)`` differs between sender and receiver: a decoding failure,
  every bit the receiver expects counts at error rate 0.5;
* a subcarrier the receiver decodes but the sender left empty: its bits count
  at 0.5;
* a subcarrier the sender used but the receiver ignores: not counted.

Data frames on the AR/TR links are sampled critically (``n1 = N``) with unit
power factors, so bin ``n`` of the receiver's DFT is the symbol on subcarrier
``n`` and BPSK over AWGN follows ``Q(sqrt(2 Eb/N0))`` exactly.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfc

from . import channel as ch
from . import dataset as dsm
from .metrics import LatentMap, latent_map
from .nn import Mlp, TrainConfig, hard_threshold, l2_loss, predict, softmax_cross_entropy, train
from .vae import Vae, Variant, train_variant
from .waveform import Modulation, demodulate, modulate

log = logging.getLogger(__name__)

UPPER_HIDDEN = (200, 400, 200, 50)
LOWER_HIDDEN = (350, 600, 400, 200)
EXAMPLE1_SMALL = (50,)
EXAMPLE1_LARGE = (500, 250, 50)
ETA_GRID = (1.0, 0.5, 0.2, 0.1)


class Source(str, Enum):
    SUPERVISED = "supervised"
    UNSUPERVISED = "unsupervised"
    ORACLE = "oracle"


class DegenerateClusters(RuntimeError):
    """Sensing produced a single cluster."""


class UnmappedSubcarrier(ValueError):
    """A subcarrier below the inferred count has no latent variable."""


@dataclass
class ParamEstimate:
    N: int
    delta_f: float
    u: np.ndarray
    source: Source = Source.ORACLE
    is_complex: Optional[bool] = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.uint8)
        self.source = Source(self.source)
        if self.delta_f <= 0:
            raise ValueError("delta_f must be positive")
        if self.u.shape != (self.N,):
            raise ValueError("occupancy length must equal N")


@dataclass
class ParamBatch:
    """Row-aligned estimates for many frames."""

    N: np.ndarray
    delta_f_khz: np.ndarray
    u: np.ndarray
    source: Source = Source.ORACLE

    def __len__(self):
        return len(self.N)

    def row(self, i: int) -> ParamEstimate:
        n = int(self.N[i])
        u = np.zeros(n, dtype=np.uint8)
        m = min(n, self.u.shape[1])
        u[:m] = self.u[i, :m]
        return ParamEstimate(n, float(self.delta_f_khz[i]) * 1e3, u, self.source)

    @classmethod
    def from_labels(cls, labels: np.ndarray, N: int) -> "ParamBatch":
        labels = np.asarray(labels)
        return cls(labels[:, N].astype(int), labels[:, N + 1].astype(float),
                   labels[:, :N].astype(np.uint8), Source.ORACLE)


def occupancy_error(u_hat, u) -> float:
    """Mean per-subcarrier disagreement of binary occupancy vectors."""
    return float(np.mean(np.asarray(u_hat, dtype=np.uint8) != np.asarray(u, dtype=np.uint8)))


# --- spectrum sensing -------------------------------------------------------------

@dataclass
class SensingResult:
    labels: np.ndarray          # 1 = signal, 0 = noise
    energies: np.ndarray
    cluster_energy: Tuple[float, float]  # (noise, signal) mean energy
    accuracy: Optional[float] = None

    def histograms(self, bins: int = 50):
        """Energy histograms ``(edges, noise_counts, signal_counts)`` over shared bins."""
        edges = np.histogram_bin_edges(self.energies, bins=bins)
        noise = np.histogram(self.energies[self.labels == 0], edges)[0]
        signal = np.histogram(self.energies[self.labels == 1], edges)[0]
        return edges, noise, signal

    def modes(self, bins: int = 50) -> Tuple[float, float]:
        edges, noise, signal = self.histograms(bins)
        centers = 0.5 * (edges[1:] + edges[:-1])
        return float(centers[np.argmax(noise)]), float(centers[np.argmax(signal)])


def sense_spectrum(X, truth=None, vae: Optional[Vae] = None, n_z: int = 20,
                   config: Optional[TrainConfig] = None, hidden=(200, 400, 200),
                   seed: int = 0) -> SensingResult:
    """Two-way unsupervised split of noise-only and signal-bearing rows.

    A plain VAE (trained here unless ``vae`` is given) embeds the rows; a
    two-component Gaussian mixture is fit on the latent means; the component
    with lower mean frame energy is declared noise.
    """
    from sklearn.mixture import GaussianMixture

    X = np.asarray(X, dtype=np.float32)
    if vae is None:
        vae = Vae(X.shape[1], n_z, hidden, Variant(), rng=seed, dtype=np.float32)
        train_variant(vae, X, config or TrainConfig(lr=5e-4, batch_size=100, steps=3000, seed=seed))
    Z = vae.encode_mean(X).astype(np.float64)
    gmm = GaussianMixture(2, covariance_type="full", random_state=seed, n_init=2).fit(Z)
    comp = gmm.predict(Z)
    if len(np.unique(comp)) < 2:
        raise DegenerateClusters("mixture collapsed to one cluster")
    energy = np.sum(X.astype(np.float64) ** 2, axis=1)
    means = [energy[comp == k].mean() for k in (0, 1)]
    signal_comp = int(np.argmax(means))
    labels = (comp == signal_comp).astype(np.uint8)
    acc = None if truth is None else float(np.mean(labels == np.asarray(truth, dtype=np.uint8)))
    return SensingResult(labels, energy, (float(min(means)), float(max(means))), acc)


# --- supervised inference ---------------------------------------------------------

@dataclass
class SupervisedModels:
    """Upper net regresses ``[N, delta_f_kHz]``; lower net outputs per-subcarrier
    activity probabilities."""

    upper: Mlp
    lower: Mlp
    N_grid: List[int]
    df_grid_khz: List[float]
    x_scale: float = 1.0

    @property
    def n_max(self) -> int:
        return self.lower.widths[-1]

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.upper.save(directory / "upper", {"role": "upper"})
        self.lower.save(directory / "lower", {"role": "lower"})
        meta = {"N_grid": self.N_grid, "df_grid_khz": self.df_grid_khz, "x_scale": self.x_scale}
        (directory / "supervised.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory) -> "SupervisedModels":
        directory = Path(directory)
        meta = json.loads((directory / "supervised.json").read_text())
        return cls(Mlp.load(directory / "upper"), Mlp.load(directory / "lower"),
                   meta["N_grid"], meta["df_grid_khz"], meta["x_scale"])


def train_supervised(ds: dsm.Dataset, config: Optional[TrainConfig] = None,
                     upper_hidden=UPPER_HIDDEN, lower_hidden=LOWER_HIDDEN,
                     upper_steps: Optional[int] = None):
    """Fit both parameter-estimation nets on an occupancy-labelled dataset.

    Returns ``(models, {"upper": trace, "lower": trace})``. The lower net is
    trained on the squared occupancy distance through a sigmoid head.
    """
    config = config or TrainConfig(lr=1e-4, batch_size=100, steps=2000, optimizer="adam")
    X = np.asarray(ds.X, dtype=np.float32)
    scale = float(X.std()) or 1.0
    Xs = X / scale
    N = ds.config.N
    targets = np.stack([ds.n_subcarriers, ds.delta_f_khz], axis=1).astype(np.float32)
    d = X.shape[1]
    upper = Mlp([d, *upper_hidden, 2], ["relu"] * len(upper_hidden) + ["linear"],
                rng=config.seed, dtype=np.float32)
    lower = Mlp([d, *lower_hidden, N], ["relu"] * len(lower_hidden) + ["sigmoid"],
                rng=config.seed + 1, dtype=np.float32)
    up_cfg = config if upper_steps is None else TrainConfig(**{**config.__dict__, "steps": upper_steps})
    _, up_trace = train(upper, Xs, targets, l2_loss, up_cfg)
    _, low_trace = train(lower, Xs, ds.occupancy.astype(np.float32), l2_loss, config)
    df_grid = sorted({round(v / 1e3, 9) for v in ds.config.delta_f})
    models = SupervisedModels(upper, lower, [N], df_grid, scale)
    return models, {"upper": up_trace, "lower": low_trace}


def _snap(values, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return grid[np.argmin(np.abs(np.asarray(values, dtype=float)[:, None] - grid[None, :]), axis=1)]


def supervised_batch(models: SupervisedModels, X) -> ParamBatch:
    Xs = np.atleast_2d(np.asarray(X, dtype=np.float32)) / models.x_scale
    up = predict(models.upper, Xs)
    probs = np.clip(predict(models.lower, Xs), 0.0, 1.0)
    N_hat = _snap(up[:, 0], models.N_grid).astype(int)
    df_hat = _snap(up[:, 1], models.df_grid_khz)
    return ParamBatch(N_hat, df_hat, hard_threshold(probs).astype(np.uint8), Source.SUPERVISED)


def supervised_infer(models: SupervisedModels, x):
    """``ParamEstimate`` for one frame, or a list for a batch."""
    x = np.asarray(x)
    batch = supervised_batch(models, x)
    if x.ndim == 1:
        return batch.row(0)
    return [batch.row(i) for i in range(len(batch))]


# --- unsupervised inference -------------------------------------------------------

@dataclass
class UnsupervisedModel:
    """A trained VAE plus what latent traversal says about it."""

    vae: Vae
    lmap: LatentMap
    bins: List[int]                      # subcarrier bins with at least one latent
    latents: Dict[int, List[int]]        # bin -> latents driving only that bin
    is_complex: bool
    N_hat: int
    delta_f: float
    threshold: float = 0.5

    def scores(self, X) -> np.ndarray:
        """Per-bin activity statistic: norm of the bin's latent means."""
        Z = self.vae.encode_mean(np.atleast_2d(X))
        return np.stack([np.sqrt(np.sum(Z[:, self.latents[b]] ** 2, axis=1)) for b in self.bins], axis=1)


def analyse_latents(vae: Vae, X, T_s: float, eps: float = 0.5, L: int = 200,
                    min_frac: float = 0.5) -> UnsupervisedModel:
    """Derive subcarrier count, latent assignment, modulation family and
    subcarrier spacing from latent traversal of ``vae`` on frames ``X``."""
    lmap = latent_map(vae, X, eps=eps, L=L, min_frac=min_frac)
    latents = lmap.subcarrier_latents()
    if not latents:
        raise UnmappedSubcarrier("no latent drives a single subcarrier")
    bins = sorted(latents)
    per_bin = np.median([len(latents[b]) for b in bins])
    is_complex = bool(per_bin >= 2)
    n_inf = sum(len(v) for v in latents.values())
    N_hat = int(round(n_inf / 2)) if is_complex else n_inf
    n1 = np.asarray(X).shape[1] // 2
    spacing = int(np.min(np.diff(bins))) if len(bins) > 1 else 1
    delta_f = spacing / (n1 * T_s)
    return UnsupervisedModel(vae, lmap, bins, latents, is_complex, N_hat, delta_f)


def choose_threshold(model: UnsupervisedModel, X_val, U_val, grid=None) -> float:
    """Threshold maximizing balanced occupancy accuracy on a labelled slice."""
    S = model.scores(X_val)
    U = np.asarray(U_val)[:, model.bins].astype(bool)
    grid = np.linspace(0.05, 3.0, 60) if grid is None else np.asarray(grid)
    best, best_t = -1.0, float(grid[0])
    for t in grid:
        pred = S > t
        tpr = np.mean(pred[U]) if U.any() else 1.0
        tnr = np.mean(~pred[~U]) if (~U).any() else 1.0
        bal = 0.5 * (tpr + tnr)
        if bal > best:
            best, best_t = bal, float(t)
    model.threshold = best_t
    return best_t


def unsupervised_batch(model: UnsupervisedModel, X, threshold: Optional[float] = None) -> ParamBatch:
    t = model.threshold if threshold is None else threshold
    S = model.scores(X)
    n = len(S)
    width = max(model.N_hat, max(model.bins) + 1)
    u = np.zeros((n, width), dtype=np.uint8)
    u[:, model.bins] = S > t
    return ParamBatch(np.full(n, model.N_hat), np.full(n, model.delta_f / 1e3), u, Source.UNSUPERVISED)


def unsupervised_infer(model: UnsupervisedModel, x, threshold: Optional[float] = None):
    """Occupancy from thresholded latent magnitudes; count from informative latents."""
    missing = [b for b in range(model.N_hat) if b not in model.latents]
    if missing:
        raise UnmappedSubcarrier(f"subcarriers {missing} have no latent")
    x = np.asarray(x)
    batch = unsupervised_batch(model, x, threshold)
    rows = [ParamEstimate(model.N_hat, model.delta_f, batch.u[i, :model.N_hat], Source.UNSUPERVISED,
                          model.is_complex) for i in range(len(batch))]
    return rows[0] if x.ndim == 1 else rows


def cross_validate_eta(X, X_val, U_val, T_s: float, n_z: int, variant: Variant,
                       config: TrainConfig, grid: Sequence[float] = ETA_GRID, hidden=(200, 400, 200)):
    """Train one VAE per ``eta`` and keep the one whose thresholded latents
    infer occupancy best on the labelled slice. Returns ``(eta, model, scores)``."""
    scores = {}
    best = None
    for eta in grid:
        vae = Vae(X.shape[1], n_z, hidden, variant, eta=eta, rng=config.seed, dtype=np.float32)
        train_variant(vae, X, config)
        try:
            model = analyse_latents(vae, X, T_s)
        except UnmappedSubcarrier:
            scores[eta] = 1.0
            continue
        choose_threshold(model, X_val, U_val)
        width = np.asarray(U_val).shape[1]
        u_hat = unsupervised_batch(model, X_val).u
        u_hat = np.pad(u_hat, ((0, 0), (0, max(0, width - u_hat.shape[1]))))[:, :width]
        scores[eta] = occupancy_error(u_hat, U_val)
        if best is None or scores[eta] < scores[best[0]]:
            best = (eta, model)
    if best is None:
        raise UnmappedSubcarrier("no eta produced a usable latent map")
    return best[0], best[1], scores


# --- Example 1 ----------------------------------------------------------------------

def example1_classifier(hidden=EXAMPLE1_SMALL, d: int = 150, seed: int = 0) -> Mlp:
    return Mlp([d, *hidden, 3], ["relu"] * len(hidden) + ["linear"], rng=seed, dtype=np.float32)


def example1_regressor(hidden=EXAMPLE1_SMALL, d: int = 150, seed: int = 0) -> Mlp:
    return Mlp([d, *hidden, 2], ["relu"] * len(hidden) + ["linear"], rng=seed, dtype=np.float32)


def example1_targets(classes) -> np.ndarray:
    """``[q, T_u in units of 64 us]`` per class index."""
    from .cyclo import TABLE1_CASES

    table = np.array([[q, T_u / 64e-6] for T_u, q in (TABLE1_CASES[c] for c in (1, 2, 3))],
                     dtype=np.float32)
    return table[np.asarray(classes, dtype=int)]


def train_example1(train_ds: dsm.Dataset, test_ds: dsm.Dataset, task: str = "classify",
                   hidden=EXAMPLE1_SMALL, config: Optional[TrainConfig] = None, eval_every: int = 100):
    """SGD on Example-1 windows. Returns ``(model, curve)`` where ``curve`` rows are
    ``(step, test_metric)``: accuracy for ``classify``, l2 loss for ``regress``."""
    config = config or TrainConfig(lr=5e-4, batch_size=500, steps=2000, optimizer="sgd")
    d = train_ds.X.shape[1]
    if task == "classify":
        model, loss = example1_classifier(hidden, d, config.seed), softmax_cross_entropy
        Y, Yte = train_ds.labels.astype(int), test_ds.labels.astype(int)
    elif task == "regress":
        model, loss = example1_regressor(hidden, d, config.seed), l2_loss
        Y, Yte = example1_targets(train_ds.labels), example1_targets(test_ds.labels)
    else:
        raise ValueError("task must be 'classify' or 'regress'")
    curve = []

    def evaluate(step, m):
        out = predict(m, test_ds.X)
        if task == "classify":
            curve.append((step, float(np.mean(np.argmax(out, axis=1) == Yte))))
        else:
            curve.append((step, l2_loss(out, Yte)[0]))

    def callback(step, m, _loss):
        if (step + 1) % eval_every == 0:
            evaluate(step + 1, m)

    train(model, train_ds.X, Y, loss, config, callback=callback)
    if not curve or curve[-1][0] != config.steps:
        evaluate(config.steps, model)
    return model, np.array(curve)


# --- BER evaluation -----------------------------------------------------------------

def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def bpsk_ber(eb_n0_db):
    """``Q(sqrt(2 Eb/N0))``."""
    return q_function(np.sqrt(2.0 * ch.db2lin(eb_n0_db)))


@dataclass
class SpoofReport:
    eb_n0_db: np.ndarray
    ber: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    baseline: np.ndarray
    occupancy_error: float = 0.0
    param_failure_rate: float = 0.0
    n_frames: int = 0
    extra: dict = field(default_factory=dict)

    def rows(self):
        return [dict(eb_n0_db=float(e), ber=float(b), ci_low=float(lo), ci_high=float(hi),
                     baseline=float(bl))
                for e, b, lo, hi, bl in zip(self.eb_n0_db, self.ber, self.ci_low, self.ci_high,
                                            self.baseline)]


def _ratio_ci(errors: np.ndarray, bits: np.ndarray, z: float = 1.96):
    """Ratio estimate with a frame-level (cluster) normal interval."""
    total = bits.sum()
    ber = errors.sum() / total
    F = len(bits)
    if F < 2:
        return ber, ber, ber
    resid = errors - ber * bits
    se = np.sqrt(np.var(resid, ddof=1) * F) / total
    return ber, max(0.0, ber - z * se), min(1.0, ber + z * se)


def link_ber(sender: ParamBatch, receiver: ParamBatch, modulation, eb_n0_db: float,
             rng: np.random.Generator, fading: str = "awgn"):
    """Per-frame ``(errors, bits)`` for one Eb/N0 point.

    ``sender`` fixes the subcarriers carrying data, ``receiver`` the subcarriers
    decoded. Frames are synthesized at critical sampling with unit powers,
    passed through the link and demodulated from the receiver's DFT bins.
    """
    modulation = Modulation(modulation)
    b = modulation.bits_per_symbol
    F = len(receiver)
    errors = np.zeros(F)
    bits = np.zeros(F)
    ebn0 = float(ch.db2lin(eb_n0_db))
    for i in range(F):
        N_r = int(receiver.N[i])
        u_r = receiver.u[i, :N_r].astype(bool)
        n_rx = int(u_r.sum()) * b
        bits[i] = n_rx
        if n_rx == 0:
            continue
        same = int(sender.N[i]) == N_r and np.isclose(sender.delta_f_khz[i], receiver.delta_f_khz[i])
        if not same:
            errors[i] = 0.5 * n_rx
            continue
        u_s = np.zeros(N_r, dtype=bool)
        m = min(N_r, sender.u.shape[1])
        u_s[:m] = sender.u[i, :m].astype(bool)
        tx_bits = rng.integers(0, 2, size=N_r * b, dtype=np.uint8)
        a = np.where(u_s, modulate(tx_bits, modulation), 0.0)
        s = N_r * np.fft.ifft(a)
        if fading == "rayleigh":
            s, h = ch.apply_rayleigh_flat(s, rng)
        N0 = N_r / (b * ebn0)
        r = ch.apply_awgn(s, N0, rng)
        if fading == "rayleigh":
            r = r / h
        rx_bins = np.fft.fft(r) / N_r
        decoded = demodulate(rx_bins, modulation).reshape(N_r, b)
        ref = tx_bits.reshape(N_r, b)
        both = u_r & u_s
        errors[i] = np.count_nonzero(decoded[both] != ref[both]) + 0.5 * b * np.count_nonzero(u_r & ~u_s)
    return errors, bits


def ber_curve(sender: ParamBatch, receiver: ParamBatch, modulation, eb_n0_db: Sequence[float],
              rng: np.random.Generator, fading: str = "awgn"):
    """``(ber, ci_low, ci_high)`` arrays over an Eb/N0 sweep."""
    if len(eb_n0_db) == 0:
        raise ValueError("empty Eb/N0 sweep")
    out = np.array([_ratio_ci(*link_ber(sender, receiver, modulation, e, rng, fading))
                    for e in eb_n0_db])
    return out[:, 0], out[:, 1], out[:, 2]


@dataclass
class Scenario:
    """One spoofing (or reliability) experiment.

    ``dataset`` describes the Tx population and the overheard frames
    (``snr_db`` there is the spoofing SNR, ``channel`` the TA link).
    ``ar_fading`` is the AR (or TR) link type. ``rx_snr_db`` is the Tx-Rx SNR
    used by a DNN receiver to infer the Tx parameters.
    """

    dataset: dsm.DatasetConfig
    eb_n0_db: Sequence[float] = (0.0, 2.0, 4.0, 6.0, 8.0)
    adversary: str = "oracle"
    rx_mode: str = "oracle"
    ar_fading: str = "awgn"
    rx_snr_db: float = 16.0
    n_frames: int = 2000
    seed: int = 0

    def __post_init__(self):
        Source(self.adversary)
        if self.rx_mode not in ("oracle", "dnn"):
            raise ValueError("rx_mode must be 'oracle' or 'dnn'")
        if self.ar_fading not in ("awgn", "rayleigh"):
            raise ValueError("ar_fading must be 'awgn' or 'rayleigh'")
        if len(self.eb_n0_db) == 0:
            raise ValueError("empty Eb/N0 sweep")


def _estimate(kind: str, X, models, truth: ParamBatch) -> ParamBatch:
    if kind == "oracle":
        return truth
    if models is None:
        raise ValueError(f"{kind} inference needs trained models")
    if kind == "supervised":
        return supervised_batch(models, X)
    return unsupervised_batch(models, X)


def _padded_error(est: ParamBatch, truth: ParamBatch) -> float:
    N = truth.u.shape[1]
    u = np.zeros_like(truth.u)
    m = min(N, est.u.shape[1])
    u[:, :m] = est.u[:, :m]
    return occupancy_error(u, truth.u)


def spoof_ber_eval(scenario: Scenario, adversary_models=None, rx_models=None) -> SpoofReport:
    """Monte-Carlo BER of the adversary's bogus bits at the legitimate receiver."""
    cfg = scenario.dataset
    ds = dsm.build(cfg, scenario.n_frames, scenario.seed)
    truth = ParamBatch.from_labels(ds.labels, cfg.N)
    adv = _estimate(scenario.adversary, ds.X, adversary_models, truth)
    if scenario.rx_mode == "dnn":
        rx_cfg = dsm.DatasetConfig(**{**cfg.__dict__, "snr_db": scenario.rx_snr_db, "channel": "awgn"})
        rx_view = dsm.build(rx_cfg, scenario.n_frames, scenario.seed)
        rx = _estimate("supervised", rx_view.X, rx_models, truth)
    else:
        rx = truth
    rng = np.random.default_rng([scenario.seed, 1])
    ber, lo, hi = ber_curve(adv, rx, cfg.modulation, scenario.eb_n0_db, rng, scenario.ar_fading)
    base, _, _ = ber_curve(truth, truth, cfg.modulation, scenario.eb_n0_db,
                           np.random.default_rng([scenario.seed, 2]), scenario.ar_fading)
    fail = np.mean((adv.N != truth.N) | ~np.isclose(adv.delta_f_khz, truth.delta_f_khz))
    return SpoofReport(np.asarray(scenario.eb_n0_db, dtype=float), ber, lo, hi, base,
                       _padded_error(adv, truth), float(fail), scenario.n_frames,
                       {"adversary": scenario.adversary, "rx_mode": scenario.rx_mode})


def rx_reliability_eval(scenario: Scenario, rx_models=None) -> SpoofReport:
    """Legitimate Tx->Rx BER when the receiver infers the Tx parameters itself
    from frames observed at ``scenario.rx_snr_db`` (or knows them, ``oracle``)."""
    cfg = dsm.DatasetConfig(**{**scenario.dataset.__dict__, "snr_db": scenario.rx_snr_db})
    ds = dsm.build(cfg, scenario.n_frames, scenario.seed)
    truth = ParamBatch.from_labels(ds.labels, cfg.N)
    rx = truth if scenario.rx_mode == "oracle" else _estimate("supervised", ds.X, rx_models, truth)
    rng = np.random.default_rng([scenario.seed, 1])
    ber, lo, hi = ber_curve(truth, rx, cfg.modulation, scenario.eb_n0_db, rng, scenario.ar_fading)
    base, _, _ = ber_curve(truth, truth, cfg.modulation, scenario.eb_n0_db,
                           np.random.default_rng([scenario.seed, 2]), scenario.ar_fading)
    fail = np.mean((rx.N != truth.N) | ~np.isclose(rx.delta_f_khz, truth.delta_f_khz))
    return SpoofReport(np.asarray(scenario.eb_n0_db, dtype=float), ber, lo, hi, base,
                       _padded_error(rx, truth), float(fail), scenario.n_frames,
                       {"rx_mode": scenario.rx_mode, "rx_snr_db": scenario.rx_snr_db})
