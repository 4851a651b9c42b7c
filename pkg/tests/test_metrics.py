import warnings

import numpy as np
import pytest

from physpoof import metrics
from physpoof.metrics import (FactorOracleEncoder, GenerativeFactorSpec, empirical_variance,
                              higgins_metric, kim_metric, latent_map, score_hits, traversal_metric)
from physpoof.waveform import vectorize
from physpoof.vae import Vae


class BinDecoder:
    """Latent ``j < N`` sets the amplitude of DFT bin ``mix[j]``; extra latents are idle."""

    def __init__(self, N, n1, n_z, mix=None):
        self.N, self.n1, self.n_z = N, n1, n_z
        self.mix = mix or {j: [j] for j in range(N)}

    def encode_mean(self, X):
        s = X[:, :self.n1] + 1j * X[:, self.n1:]
        a = (np.fft.fft(s, axis=1) / self.n1)[:, :self.N].real
        z = np.zeros((len(X), self.n_z))
        for j, bins in self.mix.items():
            z[:, j] = a[:, bins[0]]
        return z

    def decode_mean(self, Z):
        A = np.zeros((len(Z), self.n1), dtype=complex)
        for j, bins in self.mix.items():
            for b in bins:
                A[:, b] += Z[:, j]
        return vectorize(np.fft.ifft(A, axis=1) * self.n1)


def _frames(N, n1, n, seed=0):
    spec = GenerativeFactorSpec(N, n1)
    return spec.render(spec.sample(n, np.random.default_rng(seed)))


def test_empirical_variance_examples(rng):
    assert empirical_variance([1, 2, 3]) == pytest.approx(1.0)
    assert empirical_variance([4.0] * 5) == 0.0
    for _ in range(20):
        w = rng.normal(3.0, 2.0, size=int(rng.integers(2, 40)))
        brute = np.sum((w[:, None] - w[None, :]) ** 2) / (2 * len(w) * (len(w) - 1))
        assert empirical_variance(w) == pytest.approx(np.var(w, ddof=1), abs=1e-12)
        assert empirical_variance(w) == pytest.approx(brute, abs=1e-12)


def test_empirical_variance_needs_two_values():
    with pytest.raises(ValueError):
        empirical_variance([1.0])


def test_disentangled_decoder_scores_100():
    X = _frames(6, 8, 60)
    rep = traversal_metric(BinDecoder(6, 8, 8), X, L=60, eps=0.5)
    assert rep.S0 == 100.0 and rep.I == 6
    assert rep.verdicts[6:] == ["uninformative", "uninformative"]


def test_two_bin_latent_scores_zero():
    X = _frames(6, 8, 60)
    mix = {0: [0, 1], 1: [2, 3], 2: [4, 5]}
    rep = traversal_metric(BinDecoder(6, 8, 4, mix), X, L=60, eps=0.5)
    assert rep.S0 < 50
    assert all(v == "entangled" for v in rep.verdicts[:3])


def test_one_entangled_latent_lowers_score():
    X = _frames(4, 8, 40)
    mix = {0: [0], 1: [1], 2: [2, 3]}
    rep = traversal_metric(BinDecoder(4, 8, 3, mix), X, L=40, eps=0.5)
    assert rep.verdicts[2] == "entangled"
    assert 0 < rep.S0 < 100


def test_faithful_mode_resets_on_entangled():
    hits = np.zeros((1, 3, 4), dtype=bool)
    hits[0, 0, 0] = True
    hits[0, 1, [1, 2]] = True
    hits[0, 2, 3] = True
    s_c, I = score_hits(hits, "corrected")
    s_f, _ = score_hits(hits, "faithful")
    assert I[0] == 3
    assert s_c[0] == pytest.approx(200 / 3)
    assert s_f[0] == pytest.approx(100 / 3)
    with pytest.raises(ValueError):
        score_hits(hits, "lenient")


def test_no_informative_latents():
    class Flat(BinDecoder):
        def decode_mean(self, Z):
            return np.zeros((len(Z), 2 * self.n1))

    X = np.zeros((5, 16))
    with pytest.raises(metrics.NoInformativeLatents):
        traversal_metric(Flat(3, 8, 3), X, L=5)


def test_looser_threshold_never_scores_lower():
    X = _frames(6, 8, 40)
    for mix in ({j: [j] for j in range(6)}, {0: [0, 1], 1: [2], 2: [3, 4], 3: [5]}):
        dec = BinDecoder(6, 8, 6, mix)
        hits_half = metrics.traversal_hits(dec, X, eps=0.5)
        hits_one = metrics.traversal_hits(dec, X, eps=1.0)
        assert np.all(hits_one <= hits_half)


def test_latent_map_on_synthetic_decoder():
    X = _frames(5, 8, 50)
    lmap = latent_map(BinDecoder(5, 8, 7), X, L=50)
    assert lmap.n_informative == 5 and lmap.is_bijective() and lmap.reliable
    assert lmap.is_bijective(range(5)) and not lmap.is_bijective(range(4))
    assert lmap.covered_bins == [0, 1, 2, 3, 4]


def test_untrained_vae_map_is_flagged():
    X = _frames(16, 32, 50)
    vae = Vae(64, 20, (32,), rng=0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lmap = latent_map(vae, X, L=50)
    assert not lmap.reliable and lmap.warning
    assert any("unreliable" in str(w.message) for w in caught)


@pytest.mark.parametrize("mod", ["bpsk", "qam16"])
def test_oracle_encoder_scores_100(mod):
    spec = GenerativeFactorSpec(6, 8, mod)
    enc = FactorOracleEncoder(spec)
    assert higgins_metric(enc, spec, seed=0) == 100.0
    assert kim_metric(enc, spec, seed=0) == 100.0


class NoiseEncoder:
    def __init__(self, n_z, seed):
        self.n_z = n_z
        self.rng = np.random.default_rng(seed)

    def encode_mean(self, X):
        return self.rng.standard_normal((len(X), self.n_z))


def test_noise_encoder_is_near_chance():
    spec = GenerativeFactorSpec(6, 8)
    chance = 100.0 / spec.n_factors
    assert abs(higgins_metric(NoiseEncoder(6, 1), spec, votes_per_class=200, seed=0) - chance) <= 5
    assert abs(kim_metric(NoiseEncoder(6, 2), spec, votes_per_class=200, seed=0) - chance) <= 5


class SwappingEncoder(FactorOracleEncoder):
    """Oracle encoder that swaps factors 0 and 1 at random per batch of rows."""

    def __init__(self, spec, seed):
        super().__init__(spec)
        self.rng = np.random.default_rng(seed)

    def encode_mean(self, X):
        z = super().encode_mean(X)
        if self.rng.random() < 0.5:
            z[:, [0, 1]] = z[:, [1, 0]]
        return z


def test_swapped_latents_confuse_kim_for_those_factors():
    spec = GenerativeFactorSpec(4, 8)
    score = kim_metric(SwappingEncoder(spec, 0), spec, votes_per_class=200, seed=0)
    # factors 0 and 1 are decided by a coin flip, the other two stay perfect
    assert 60 <= score <= 90


def test_factor_spec_render_matches_spectrum(rng):
    spec = GenerativeFactorSpec(5, 8, "qam16")
    f = spec.sample(10, rng)
    back = FactorOracleEncoder(spec).encode_mean(spec.render(f))
    assert np.allclose(back, f)
    fixed = spec.sample_fixed(2, 7, rng)
    assert np.all(fixed[:, 2] == fixed[0, 2])
