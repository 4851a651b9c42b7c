"""Disentanglement measurements for VAEs trained on NC-OFDM frames.

Encoder-side scores (Higgins, Kim) need a generative-factor sampler; the
decoder-side latent traversal only needs frames. Anything exposing
``encode_mean(X)`` and ``decode_mean(Z)`` can be measured, which is how the
synthetic oracle models in the tests plug in.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .nn import Mlp, TrainConfig, softmax_cross_entropy, train
from .waveform import Modulation, vectorize

# Traversal defaults: limit, steps, samples, thresholds.
TRAVERSAL_C = 3.0
TRAVERSAL_K = 40
TRAVERSAL_L = 500
TRAVERSAL_EPSILONS = (0.5, 1.0)
COLLAPSED_STD = 0.05


class NoInformativeLatents(RuntimeError):
    pass


def empirical_variance(w) -> float:
    """``1 / (2h(h-1)) * sum_{i,j} (w_i - w_j)^2`` (equals the unbiased variance)."""
    w = np.asarray(w, dtype=float).ravel()
    h = w.size
    if h < 2:
        raise ValueError("need at least two values")
    # sum_{i,j}(w_i - w_j)^2 = 2h sum w^2 - 2 (sum w)^2, centred for accuracy
    c = w - w.mean()
    return float((2 * h * np.sum(c * c) - 2 * np.sum(c) ** 2) / (2 * h * (h - 1)))


# --- generative factors -----------------------------------------------------------

@dataclass
class GenerativeFactorSpec:
    """Independent per-subcarrier factors of a random-occupancy dataset.

    For BPSK the factor of subcarrier ``n`` is its signed amplitude
    ``u(n) s_n p(n)``; for complex constellations the real and imaginary parts
    are separate factors (``2N`` in total, real parts first).
    """

    N: int
    n1: int
    modulation: str = "bpsk"
    prob: float = 0.5

    def __post_init__(self):
        self.modulation = Modulation(self.modulation)
        if self.n_factors < 2:
            raise ValueError("need at least two generative factors")

    @property
    def n_factors(self) -> int:
        return self.N * (2 if self.modulation.is_complex else 1)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        from .waveform import random_symbols

        u = rng.random((n, self.N)) < self.prob
        p = rng.uniform(1.0, 2.0, (n, self.N))
        _, syms = random_symbols(n * self.N, self.modulation, rng)
        a = u * p * syms.reshape(n, self.N)
        return np.concatenate([a.real, a.imag], axis=1) if self.modulation.is_complex else a.real

    def amplitudes(self, factors) -> np.ndarray:
        factors = np.asarray(factors)
        if self.modulation.is_complex:
            return factors[:, :self.N] + 1j * factors[:, self.N:]
        return factors.astype(complex)

    def render(self, factors) -> np.ndarray:
        k = np.arange(self.n1)
        basis = np.exp(2j * np.pi * np.outer(np.arange(self.N), k) / self.n1)
        return vectorize(self.amplitudes(factors) @ basis)

    def sample_fixed(self, l: int, L: int, rng: np.random.Generator, value=None):
        """``L`` factor rows sharing factor ``l`` (drawn once unless given)."""
        f = self.sample(L, rng)
        f[:, l] = self.sample(1, rng)[0, l] if value is None else value
        return f


class FactorOracleEncoder:
    """Reads the generative factors straight off the subcarrier DFT bins."""

    def __init__(self, spec: GenerativeFactorSpec):
        self.spec = spec

    def encode_mean(self, X):
        from .waveform import subcarrier_spectrum

        a = subcarrier_spectrum(X, self.spec.N)
        return np.concatenate([a.real, a.imag], axis=1) if self.spec.modulation.is_complex else a.real


# --- encoder-side metrics ---------------------------------------------------------

def _linear_classifier_accuracy(Xtr, ytr, Xte, yte, n_classes, seed):
    mu, sd = Xtr.mean(axis=0), Xtr.std(axis=0) + 1e-8
    model = Mlp([Xtr.shape[1], n_classes], ["linear"], rng=seed)
    cfg = TrainConfig(lr=0.05, batch_size=len(Xtr), steps=500, optimizer="adam", seed=seed)
    train(model, (Xtr - mu) / sd, ytr, softmax_cross_entropy, cfg)
    pred = np.argmax(model((Xte - mu) / sd), axis=1)
    return 100.0 * float(np.mean(pred == yte))


def higgins_metric(vae, factors: GenerativeFactorSpec, L: int = 64, votes_per_class: int = 50,
                   seed: int = 0) -> float:
    """Accuracy (x100) of a linear classifier predicting which factor was held
    fixed from ``mean_i |z_i - z_0|``."""
    rng = np.random.default_rng(seed)
    f = factors.n_factors

    def make(n_per_class):
        feats, labels = [], []
        for l in range(f):
            for _ in range(n_per_class):
                base = factors.sample(1, rng)
                fs = factors.sample_fixed(l, L, rng, value=base[0, l])
                z0 = vae.encode_mean(factors.render(base))
                z = vae.encode_mean(factors.render(fs))
                feats.append(np.mean(np.abs(z - z0), axis=0))
                labels.append(l)
        return np.asarray(feats), np.asarray(labels)

    Xtr, ytr = make(votes_per_class)
    Xte, yte = make(votes_per_class)
    return _linear_classifier_accuracy(Xtr, ytr, Xte, yte, f, seed)


def kim_metric(vae, factors: GenerativeFactorSpec, L: int = 64, votes_per_class: int = 50,
               n_reference: int = 5000, seed: int = 0) -> float:
    """Majority-vote accuracy (x100) of predicting the fixed factor from the
    latent with the lowest normalized variance. Latents whose standard deviation
    over a reference sample is below ``COLLAPSED_STD`` are ignored."""
    rng = np.random.default_rng(seed)
    f = factors.n_factors
    z_ref = vae.encode_mean(factors.render(factors.sample(n_reference, rng)))
    scale = z_ref.std(axis=0)
    alive = np.flatnonzero(scale >= COLLAPSED_STD)
    if alive.size == 0:
        raise NoInformativeLatents("every latent dimension is collapsed")

    def votes(n_per_class):
        out = []
        for l in range(f):
            for _ in range(n_per_class):
                z = vae.encode_mean(factors.render(factors.sample_fixed(l, L, rng)))
                zn = z[:, alive] / scale[alive]
                v = [empirical_variance(zn[:, j]) for j in range(zn.shape[1])]
                out.append((int(np.argmin(v)), l))
        return np.asarray(out)

    train_votes = votes(votes_per_class)
    counts = np.zeros((alive.size, f), dtype=int)
    np.add.at(counts, (train_votes[:, 0], train_votes[:, 1]), 1)
    classify = np.argmax(counts, axis=1)
    test_votes = votes(votes_per_class)
    return 100.0 * float(np.mean(classify[test_votes[:, 0]] == test_votes[:, 1]))


# --- decoder-side traversal ----------------------------------------------------

def _spectrum(x, n1):
    s = x[..., :n1] + 1j * x[..., n1:]
    return np.fft.fft(s, axis=-1) / n1


def traversal_hits(vae, X, C: float = TRAVERSAL_C, K: int = TRAVERSAL_K, eps: float = 0.5,
                   reference: str = "input") -> np.ndarray:
    """Boolean array ``(rows, latents, bins)``: bin ``t`` moved by more than
    ``eps`` at some traversal step of latent ``j`` for row ``i``.

    ``reference="input"`` compares against the DFT of the input frame,
    ``"reconstruction"`` against the DFT of the untouched mean reconstruction.
    """
    X = np.atleast_2d(np.asarray(X))
    n1 = X.shape[1] // 2
    Z = vae.encode_mean(X)
    n_rows, n_z = Z.shape
    if reference == "input":
        ref = _spectrum(X, n1)
    elif reference == "reconstruction":
        ref = _spectrum(vae.decode_mean(Z), n1)
    else:
        raise ValueError("reference must be 'input' or 'reconstruction'")
    grid = -C + 2.0 * C * np.arange(K + 1) / K
    hits = np.zeros((n_rows, n_z, n1), dtype=bool)
    for j in range(n_z):
        Zt = np.repeat(Z, K + 1, axis=0)
        Zt[:, j] = np.tile(grid, n_rows)
        F = np.abs(_spectrum(vae.decode_mean(Zt), n1).reshape(n_rows, K + 1, n1) - ref[:, None, :])
        hits[:, j, :] = np.any(F > eps, axis=1)
    return hits


@dataclass
class TraversalReport:
    S0: float
    I: int
    verdicts: List[str]
    latent_to_bins: Dict[int, List[int]]
    per_sample_informative: np.ndarray = field(repr=False, default=None)
    mode: str = "corrected"
    eps: float = 0.5

    @property
    def informative(self) -> List[int]:
        return [j for j, v in enumerate(self.verdicts) if v != "uninformative"]


def _verdict(k):
    return "uninformative" if k == 0 else ("disentangled" if k == 1 else "entangled")


def score_hits(hits: np.ndarray, mode: str = "corrected"):
    """Per-sample traversal scores and informative counts from a hit array.

    ``corrected``: entangled latents add 0, score is ``100 * #disentangled / I``.
    ``faithful``: the accumulated score is reset to zero whenever an entangled
    latent is met, in latent order. Samples with ``I == 0`` score 0.
    """
    k = hits.sum(axis=2)
    n_rows, n_z = k.shape
    scores = np.zeros(n_rows)
    I = np.count_nonzero(k > 0, axis=1)
    for i in range(n_rows):
        if I[i] == 0:
            continue
        if mode == "corrected":
            scores[i] = 100.0 * np.count_nonzero(k[i] == 1) / I[i]
        elif mode == "faithful":
            s2 = 0.0
            for j in range(n_z):
                if k[i, j] == 1:
                    s2 += 100.0
                elif k[i, j] > 1:
                    s2 = 0.0
            scores[i] = s2 / I[i]
        else:
            raise ValueError("mode must be 'corrected' or 'faithful'")
    return scores, I


def traversal_metric(vae, X, C: float = TRAVERSAL_C, K: int = TRAVERSAL_K, L: int = TRAVERSAL_L,
                     eps: float = 0.5, mode: str = "corrected", reference: str = "input",
                     hits: Optional[np.ndarray] = None, min_frac: float = 0.5) -> TraversalReport:
    """Latent-traversal disentanglement score ``S0`` in ``[0, 100]`` over the
    first ``L`` rows of ``X``."""
    X = np.atleast_2d(np.asarray(X))[:L]
    if hits is None:
        hits = traversal_hits(vae, X, C, K, eps, reference)
    scores, I = score_hits(hits, mode)
    if not np.any(I):
        raise NoInformativeLatents("no latent changes the reconstruction beyond eps")
    lmap = _map_from_hits(hits, min_frac)
    verdicts = [_verdict(len(lmap.bins[j])) for j in range(hits.shape[1])]
    return TraversalReport(float(scores.sum() / X.shape[0]), len(lmap.informative), verdicts,
                           {j: lmap.bins[j] for j in lmap.informative}, I, mode, eps)


@dataclass
class LatentMap:
    """Per-latent set of affected DFT bins and derived structure."""

    bins: Dict[int, List[int]]
    hit_rate: np.ndarray = field(repr=False, default=None)
    reliable: bool = True
    warning: Optional[str] = None

    @property
    def informative(self) -> List[int]:
        return [j for j, b in self.bins.items() if b]

    @property
    def n_informative(self) -> int:
        return len(self.informative)

    @property
    def covered_bins(self) -> List[int]:
        return sorted({t for j in self.informative for t in self.bins[j]})

    def is_bijective(self, subcarriers=None) -> bool:
        """Every informative latent owns exactly one bin, no bin is shared, and
        (if given) the owned bins are exactly ``subcarriers``."""
        owned = [self.bins[j] for j in self.informative]
        if any(len(b) != 1 for b in owned):
            return False
        flat = [b[0] for b in owned]
        if len(set(flat)) != len(flat):
            return False
        return subcarriers is None or sorted(flat) == sorted(subcarriers)

    def latents_per_bin(self) -> Dict[int, List[int]]:
        out: Dict[int, List[int]] = {}
        for j in self.informative:
            for t in self.bins[j]:
                out.setdefault(t, []).append(j)
        return out

    def subcarrier_latents(self) -> Dict[int, List[int]]:
        """Bin -> latents that drive *only* that bin."""
        out: Dict[int, List[int]] = {}
        for j in self.informative:
            if len(self.bins[j]) == 1:
                out.setdefault(self.bins[j][0], []).append(j)
        return out


def _map_from_hits(hits, min_frac):
    rate = hits.mean(axis=0)
    bins = {j: [int(t) for t in np.flatnonzero(rate[j] >= min_frac)] for j in range(hits.shape[1])}
    lmap = LatentMap(bins, rate)
    per_bin = lmap.latents_per_bin()
    if lmap.n_informative == 0:
        lmap.reliable, lmap.warning = False, "no informative latents"
    elif any(len(b) != 1 for j, b in bins.items() if b):
        lmap.reliable, lmap.warning = False, "some latents drive several bins"
    elif any(len(v) > 2 for v in per_bin.values()):
        lmap.reliable, lmap.warning = False, "some bins are driven by more than two latents"
    return lmap


def latent_map(vae, X, C: float = TRAVERSAL_C, K: int = TRAVERSAL_K, eps: float = 0.5,
               L: int = 200, reference: str = "reconstruction", min_frac: float = 0.5) -> LatentMap:
    """Which DFT bins each latent controls, from traversals of ``L`` rows.

    A bin belongs to a latent when its traversal moves that bin in at least
    ``min_frac`` of the rows. A map where some latent drives several bins is
    flagged unreliable and a warning is emitted.
    """
    X = np.atleast_2d(np.asarray(X))[:L]
    lmap = _map_from_hits(traversal_hits(vae, X, C, K, eps, reference), min_frac)
    if not lmap.reliable:
        warnings.warn(f"latent map unreliable: {lmap.warning}", RuntimeWarning, stacklevel=2)
    return lmap
