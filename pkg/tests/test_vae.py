import numpy as np
import pytest
from scipy import integrate

from gradcheck import VAE_CASES, discriminator_case, vae_case
from physpoof import dataset as dsm
from physpoof.metrics import latent_map
from physpoof.nn import TrainConfig
from physpoof.vae import (Vae, Variant, batch_covariance, dip_penalty, gaussian_log_density,
                          kl_to_standard_normal, permute_dims, train_variant)


def test_kl_closed_form_examples():
    assert kl_to_standard_normal([0.0], [1.0]) == 0.0
    assert kl_to_standard_normal([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.5)


def test_kl_matches_quadrature(rng):
    mu = rng.normal(size=3)
    var = rng.uniform(0.2, 3.0, size=3)
    total = 0.0
    for m, v in zip(mu, var):
        q = lambda z: np.exp(-(z - m) ** 2 / (2 * v)) / np.sqrt(2 * np.pi * v)  # noqa: E731
        integrand = lambda z: q(z) * (np.log(q(z)) + 0.5 * z * z + 0.5 * np.log(2 * np.pi))  # noqa: E731
        total += integrate.quad(integrand, m - 12 * np.sqrt(v), m + 12 * np.sqrt(v), epsabs=1e-12)[0]
    assert kl_to_standard_normal(mu, var) == pytest.approx(total, abs=1e-6)


def test_kl_rejects_nonpositive_variance():
    with pytest.raises(ValueError):
        kl_to_standard_normal([0.0], [0.0])


def test_gaussian_density_peak():
    var = np.full(5, 1e-6)
    x = np.arange(5.0)
    expected = -0.5 * np.sum(np.log(2 * np.pi * var))
    assert gaussian_log_density(x, x, var) == pytest.approx(expected)


def test_eta_zero_gives_negative_kl(rng):
    model = Vae(8, 3, (6,), eta=0.0, rng=0)
    x = rng.standard_normal((5, 8))
    eps = rng.standard_normal((5, 3))
    total, kl, _ = model.elbo(x, eps)
    assert total == -kl


@pytest.mark.parametrize("name", list(VAE_CASES))
def test_objective_gradients(name):
    assert vae_case(name, np.random.default_rng(11)) < 1e-4


def test_discriminator_gradients():
    assert discriminator_case(np.random.default_rng(2)) < 1e-4


def test_dip_penalty_zero_at_identity(rng):
    m = rng.standard_normal((200, 4))
    m -= m.mean(0)
    L = np.linalg.cholesky(batch_covariance(m))
    m = m @ np.linalg.inv(L).T
    value, grad = dip_penalty(m, 10.0, 10.0)
    assert value == pytest.approx(0.0, abs=1e-20)
    assert np.allclose(grad, 0.0)


def test_density_ratio_zero_for_uninformed_discriminator(rng):
    model = Vae(6, 3, (5,), Variant.factor(5.0), rng=0)
    model.discriminator.params[-2][:] = 0
    model.discriminator.params[-1][:] = 0
    assert model.density_ratio_kl(rng.standard_normal((10, 3))) == 0.0


def test_permute_dims_keeps_marginals(rng):
    z = rng.standard_normal((50, 4))
    p = permute_dims(z, rng)
    for j in range(4):
        assert sorted(p[:, j]) == sorted(z[:, j])


def test_variant_validation():
    with pytest.raises(ValueError):
        Variant("gamma-vae")
    with pytest.raises(ValueError):
        Variant.factor(5.0, negatives="uniform")
    with pytest.raises(ValueError):
        Variant.beta_vae(4.0, capacity=-1.0)
    with pytest.raises(ValueError):
        Vae(8, 0)
    with pytest.raises(ValueError):
        Vae(8, 2, eta=1.5)
    with pytest.raises(ValueError):
        Vae(8, 2, decoder_var=0.0)


def test_encode_determinism_and_persistence(tmp_path, rng):
    model = Vae(8, 3, (6, 5), Variant.factor(5.0), rng=1, decoder_var=0.2)
    model.x_scale = 2.5
    x = rng.standard_normal((4, 8))
    assert np.array_equal(model.encode_mean(x), model.encode_mean(x))
    model.save(tmp_path / "m")
    back = Vae.load(tmp_path / "m")
    assert np.allclose(back.encode_mean(x), model.encode_mean(x), atol=1e-6)
    assert np.allclose(back.decode(back.encode_mean(x))[1], model.decode(model.encode_mean(x))[1])
    assert back.variant == model.variant and back.decoder_var == 0.2


def test_training_is_deterministic():
    X = np.random.default_rng(0).standard_normal((300, 8)).astype(np.float32)
    out = []
    for _ in range(2):
        m = Vae(8, 2, (6,), Variant.factor(5.0), rng=3, dtype=np.float32)
        h = train_variant(m, X, TrainConfig(lr=1e-3, steps=30, seed=5))
        out.append((m.encoder.flat(), h.loss))
    assert np.array_equal(out[0][0], out[1][0]) and out[0][1] == out[1][1]


def test_warmup_ramps_kl_weight():
    X = np.random.default_rng(0).standard_normal((100, 6))
    m = Vae(6, 2, (5,), Variant.beta_vae(4.0), rng=0)
    h = train_variant(m, X, TrainConfig(lr=1e-3, steps=1, seed=0), warmup=10)
    # first step carries a tenth of the KL weight
    assert h.loss[0] == pytest.approx(0.4 * h.kl[0] - h.recon[0])


@pytest.fixture(scope="module")
def two_factor_model():
    cfg = dsm.DatasetConfig(N=2, n1=4, pattern="ofdm")
    ds = dsm.build(cfg, 20_000, 0)
    model = Vae(8, 4, (64, 64), Variant.factor(5.0), rng=0, dtype=np.float32)
    train_variant(model, ds.X, TrainConfig(lr=1e-3, batch_size=100, steps=3000, seed=0))
    return model, ds


def test_two_factor_dataset_has_two_informative_latents(two_factor_model):
    model, ds = two_factor_model
    lmap = latent_map(model, ds.X, L=100)
    assert lmap.n_informative == 2


def test_uninformative_latent_leaves_reconstruction(two_factor_model):
    model, ds = two_factor_model
    lmap = latent_map(model, ds.X, L=100)
    idle = [j for j in range(model.n_z) if j not in lmap.informative]
    z = model.encode_mean(ds.X[:20])
    base = np.fft.fft(model.decode_mean(z)[:, :4] + 1j * model.decode_mean(z)[:, 4:], axis=1) / 4
    for j in idle:
        moved = z.copy()
        moved[:, j] = 3.0
        xm = model.decode_mean(moved)
        spec = np.fft.fft(xm[:, :4] + 1j * xm[:, 4:], axis=1) / 4
        assert np.max(np.abs(spec - base)) < 0.5
    assert model.reconstruction_error(ds.X[:500]) < 0.5
