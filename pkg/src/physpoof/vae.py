"""Gaussian VAEs over vectorized frames: plain, beta, DIP and Factor variants.

Both encoder and decoder are diagonal Gaussians whose means and log-variances
come out of an :class:`~physpoof.nn.Mlp`. The prior is ``N(0, I)``. All
objectives are written as quantities to *maximize*; training minimizes their
negative with a single reparameterized sample per datum.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .nn import Adam, Mlp, TrainConfig, TrainingDiverged, batch_indices, bce_with_logits

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2 * np.pi))
DECODER_VAR_FLOOR = 1e-4
PAPER_HIDDEN = (200, 400, 600, 400, 200)
DESK_HIDDEN = (200, 400, 200)


@dataclass
class Variant:
    """Objective variant and its hyperparameters.

    ``negatives`` selects the FactorVAE discriminator's negative samples:
    ``"prior"`` draws them from ``N(0, I)``, ``"permute"`` shuffles each latent
    dimension across the batch.
    """

    kind: str = "plain"
    beta: float = 1.0
    lambda_d: float = 0.0
    lambda_od: float = 0.0
    gamma: float = 0.0
    negatives: str = "permute"
    disc_hidden: Sequence[int] = (64, 64, 64)
    capacity: float = 0.0
    capacity_steps: int = 0

    def __post_init__(self):
        if self.kind not in ("plain", "beta", "dip", "factor"):
            raise ValueError(f"unknown variant {self.kind!r}")
        if self.negatives not in ("prior", "permute"):
            raise ValueError("negatives must be 'prior' or 'permute'")
        self.disc_hidden = tuple(int(w) for w in self.disc_hidden)
        if self.capacity < 0 or self.capacity_steps < 0:
            raise ValueError("capacity and capacity_steps must be non-negative")

    @classmethod
    def beta_vae(cls, beta, capacity=0.0, capacity_steps=0):
        """``capacity > 0`` switches to the controlled-capacity form
        ``beta * |KL - C|`` with ``C`` ramped from 0 to ``capacity`` nats."""
        return cls("beta", beta=beta, capacity=capacity, capacity_steps=capacity_steps)

    @classmethod
    def dip(cls, lambda_d, lambda_od=None):
        return cls("dip", lambda_d=lambda_d, lambda_od=lambda_d if lambda_od is None else lambda_od)

    @classmethod
    def factor(cls, gamma, negatives="permute"):
        return cls("factor", gamma=gamma, negatives=negatives)


def kl_to_standard_normal(mu, var) -> float:
    """``KL(N(mu, diag var) || N(0, I))`` summed over dimensions (and rows)."""
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0):
        raise ValueError("variances must be positive")
    return float(0.5 * np.sum(mu * mu + var - 1.0 - np.log(var)))


def gaussian_log_density(x, mean, var) -> np.ndarray:
    """Row-wise log density of a diagonal Gaussian."""
    return -0.5 * np.sum(LOG_2PI + np.log(var) + (x - mean) ** 2 / var, axis=-1)


def batch_covariance(m) -> np.ndarray:
    c = m - m.mean(axis=0)
    return c.T @ c / m.shape[0]


def dip_penalty(m, lambda_d: float, lambda_od: float):
    """Moment-matching penalty on the batch covariance of encoder means;
    returns ``(value, d value / d m)``."""
    B = m.shape[0]
    C = batch_covariance(m)
    diag = np.diag(C)
    off = C - np.diag(diag)
    value = lambda_od * np.sum(off * off) + lambda_d * np.sum((diag - 1.0) ** 2)
    G = 2.0 * lambda_od * off + np.diag(2.0 * lambda_d * (diag - 1.0))
    grad = (2.0 / B) * (m - m.mean(axis=0)) @ G
    return float(value), grad


def permute_dims(z, rng: np.random.Generator) -> np.ndarray:
    out = np.empty_like(z)
    for j in range(z.shape[1]):
        out[:, j] = z[rng.permutation(z.shape[0]), j]
    return out


class Vae:
    """Encoder/decoder pair (plus a discriminator for the Factor variant)."""

    def __init__(self, d: int, n_z: int, hidden: Sequence[int] = PAPER_HIDDEN,
                 variant: Optional[Variant] = None, eta: float = 1.0, rng=None,
                 dtype=np.float64, decoder_hidden: Optional[Sequence[int]] = None,
                 head_scale: float = 0.1, decoder_var: Optional[float] = None):
        if n_z < 1:
            raise ValueError("n_z must be >= 1")
        if not 0.0 <= eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        hidden = tuple(int(h) for h in hidden)
        dec_hidden = tuple(decoder_hidden) if decoder_hidden is not None else hidden
        self.d, self.n_z, self.hidden, self.decoder_hidden = int(d), int(n_z), hidden, dec_hidden
        self.variant = variant or Variant()
        self.eta = float(eta)
        acts = lambda n: ["relu"] * n + ["linear"]  # noqa: E731
        self.encoder = Mlp([d, *hidden, 2 * n_z], acts(len(hidden)), rng, dtype)
        self.decoder = Mlp([n_z, *dec_hidden, 2 * d], acts(len(dec_hidden)), rng, dtype)
        # Small output heads start both variances near one; at the default
        # scale the decoder variance absorbs the data and training stalls.
        for net in (self.encoder, self.decoder):
            net.params[-2] *= head_scale
        self.discriminator = None
        if self.variant.kind == "factor":
            dh = self.variant.disc_hidden
            self.discriminator = Mlp([n_z, *dh, 1], acts(len(dh)), rng, dtype)
        self.trained_steps = 0
        self.x_scale = 1.0
        # None: learned per-dimension variance; a number: fixed variance in frame units.
        self.decoder_var = None if decoder_var is None else float(decoder_var)
        if self.decoder_var is not None and self.decoder_var <= 0:
            raise ValueError("decoder_var must be positive")

    @property
    def dtype(self):
        return self.encoder.dtype

    # --- inference ------------------------------------------------------------

    def encode(self, x):
        """Posterior ``(mean, log-variance)``; ``x`` is in frame units."""
        out = self.encoder(np.asarray(x, dtype=self.dtype) / self.x_scale)
        return out[:, :self.n_z], out[:, self.n_z:]

    def encode_mean(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=self.dtype))
        return np.concatenate([self.encode(x[i:i + 4096])[0] for i in range(0, x.shape[0], 4096)])

    def decode(self, z):
        """Likelihood ``(mean, variance)`` in frame units."""
        out = self.decoder(z)
        s = self.x_scale
        return out[:, :self.d] * s, self._var(out[:, self.d:]) * s * s

    def _var(self, lvx):
        if self.decoder_var is None:
            return np.exp(lvx) + DECODER_VAR_FLOOR
        return np.full_like(lvx, self.decoder_var / self.x_scale ** 2)

    def decode_mean(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=self.dtype))
        return np.concatenate([self.decode(z[i:i + 4096])[0] for i in range(0, z.shape[0], 4096)])

    def reconstruct(self, x) -> np.ndarray:
        return self.decode_mean(self.encode_mean(x))

    def reconstruction_error(self, x) -> float:
        """Mean over rows of the element-wise l1 distance to the mean reconstruction."""
        x = np.atleast_2d(x)
        return float(np.mean(np.sum(np.abs(x - self.reconstruct(x)), axis=1)))

    # --- objectives -----------------------------------------------------------
    # Networks see frames divided by x_scale; log densities are reported in
    # frame units, which shifts them by -d * log(x_scale).

    @property
    def _log_scale_correction(self) -> float:
        return self.d * float(np.log(self.x_scale))

    def _forward(self, x, eps):
        enc_out, enc_cache = self.encoder.forward(x)
        m, lv = enc_out[:, :self.n_z], enc_out[:, self.n_z:]
        std = np.exp(0.5 * lv)
        z = m + std * eps
        dec_out, dec_cache = self.decoder.forward(z)
        mean_x, lvx = dec_out[:, :self.d], dec_out[:, self.d:]
        var_x = self._var(lvx)
        return dict(enc_cache=enc_cache, dec_cache=dec_cache, m=m, lv=lv, std=std, z=z,
                    mean_x=mean_x, lvx=lvx, var_x=var_x)

    def elbo(self, x, eps):
        """Batch means of ``(total, kl, recon)`` with ``total = -kl + eta * recon``."""
        x = np.atleast_2d(np.asarray(x, dtype=self.dtype)) / self.x_scale
        f = self._forward(x, np.atleast_2d(eps))
        kl = 0.5 * np.sum(f["m"] ** 2 + np.exp(f["lv"]) - 1.0 - f["lv"], axis=1)
        recon = gaussian_log_density(x, f["mean_x"], f["var_x"])
        kl, recon = float(kl.mean()), float(recon.mean()) - self._log_scale_correction
        return -kl + self.eta * recon, kl, recon

    def loss_and_grads(self, x, eps, need_grads: bool = True, anneal: float = 1.0,
                       capacity: Optional[float] = None):
        """Negative variant objective on one batch and its parameter gradients.

        Returns ``(loss, terms, grads)`` where ``grads`` has ``"encoder"`` and
        ``"decoder"`` lists and ``terms`` carries the individual objective pieces
        plus the latent sample ``z``. A ``capacity`` target replaces the KL
        term by ``beta * |KL - capacity|``.
        """
        x = np.atleast_2d(np.asarray(x, dtype=self.dtype)) / self.x_scale
        B = x.shape[0]
        v = self.variant
        f = self._forward(x, eps)
        m, lv, std, z = f["m"], f["lv"], f["std"], f["z"]
        mean_x, lvx, var_x = f["mean_x"], f["lvx"], f["var_x"]

        kl_rows = 0.5 * np.sum(m * m + np.exp(lv) - 1.0 - lv, axis=1)
        resid = x - mean_x
        recon_rows = -0.5 * np.sum(LOG_2PI + np.log(var_x) + resid * resid / var_x, axis=1)
        kl, recon = float(kl_rows.mean()), float(recon_rows.mean()) - self._log_scale_correction
        kl_weight = (v.beta if v.kind == "beta" else 1.0) * anneal
        if capacity is None:
            loss = kl_weight * kl - self.eta * recon
        else:
            loss = kl_weight * abs(kl - capacity) - self.eta * recon
            kl_weight = kl_weight * np.sign(kl - capacity)
        terms = {"kl": kl, "recon": recon, "penalty": 0.0, "z": z}

        dip_grad = None
        if v.kind == "dip":
            pen, dip_grad = dip_penalty(m, v.lambda_d * anneal, v.lambda_od * anneal)
            terms["penalty"] = pen
            loss += pen
        tc_grad_z = None
        if v.kind == "factor":
            logits, disc_cache = self.discriminator.forward(z)
            gamma = v.gamma * anneal
            pen = float(gamma * logits.mean())
            terms["penalty"] = pen
            loss += pen
            if need_grads:
                _, tc_grad_z = self.discriminator.backward(
                    disc_cache, np.full_like(logits, gamma / B), need_input_grad=True)
        if not need_grads:
            return loss, terms, None

        # d loss / d decoder outputs
        g_mean = -self.eta * resid / var_x / B
        if self.decoder_var is None:
            g_lvx = 0.5 * self.eta * (1.0 / var_x - resid * resid / var_x ** 2) * (var_x - DECODER_VAR_FLOOR) / B
        else:
            g_lvx = np.zeros_like(lvx)
        dec_grads, g_z = self.decoder.backward(f["dec_cache"], np.concatenate([g_mean, g_lvx], axis=1),
                                               need_input_grad=True)
        if tc_grad_z is not None:
            g_z = g_z + tc_grad_z
        g_m = g_z + kl_weight * m / B
        g_lv = g_z * eps * std * 0.5 + kl_weight * 0.5 * (np.exp(lv) - 1.0) / B
        if dip_grad is not None:
            g_m = g_m + dip_grad
        enc_grads, _ = self.encoder.backward(f["enc_cache"], np.concatenate([g_m, g_lv], axis=1))
        return loss, terms, {"encoder": enc_grads, "decoder": dec_grads}

    def discriminator_loss_and_grads(self, z, rng: np.random.Generator):
        """BCE of the density-ratio discriminator: ``q(z)`` samples labelled 1,
        negatives labelled 0."""
        if self.variant.negatives == "prior":
            neg = rng.standard_normal(z.shape).astype(self.dtype)
        else:
            neg = permute_dims(z, rng)
        inp = np.concatenate([z, neg])
        labels = np.concatenate([np.ones(len(z)), np.zeros(len(neg))])[:, None]
        logits, cache = self.discriminator.forward(inp)
        loss, g = bce_with_logits(logits, labels)
        grads, _ = self.discriminator.backward(cache, g)
        return loss, grads

    def density_ratio_kl(self, z) -> float:
        """``E[log D / (1 - D)]`` over the rows of ``z`` (the discriminator's logit)."""
        return float(self.discriminator(z).mean())

    def log_evidence_is(self, x, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        """Importance-sampled ``log p(x)`` per row with ``q(z|x)`` as proposal."""
        x = np.atleast_2d(np.asarray(x, dtype=self.dtype))
        m, lv = self.encode(x)
        var = np.exp(lv)
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            eps = rng.standard_normal((n_samples, self.n_z))
            z = m[i] + np.sqrt(var[i]) * eps
            mean_x, var_x = self.decode(z)
            log_w = (gaussian_log_density(x[i], mean_x, var_x)
                     + gaussian_log_density(z, 0.0, 1.0)
                     - gaussian_log_density(z, m[i], var[i]))
            top = log_w.max()
            out[i] = top + np.log(np.mean(np.exp(log_w - top)))
        return out

    # --- persistence ----------------------------------------------------------

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        header = {"format": "physpoof-vae", "version": 1, "d": self.d, "n_z": self.n_z,
                  "x_scale": self.x_scale, "decoder_var": self.decoder_var,
                  "hidden": list(self.hidden), "decoder_hidden": list(self.decoder_hidden),
                  "eta": self.eta, "variant": {**asdict(self.variant),
                                               "disc_hidden": list(self.variant.disc_hidden)},
                  "trained_steps": self.trained_steps}
        (directory / "vae.json").write_text(json.dumps(header, indent=2, sort_keys=True))
        self.encoder.save(directory / "encoder", {"role": "encoder"})
        self.decoder.save(directory / "decoder", {"role": "decoder"})
        if self.discriminator is not None:
            self.discriminator.save(directory / "discriminator", {"role": "discriminator"})

    @classmethod
    def load(cls, directory, dtype=np.float64) -> "Vae":
        directory = Path(directory)
        h = json.loads((directory / "vae.json").read_text())
        if h.get("format") != "physpoof-vae":
            raise ValueError("not a VAE checkpoint")
        model = cls(h["d"], h["n_z"], h["hidden"], Variant(**h["variant"]), h["eta"], rng=0,
                    dtype=dtype, decoder_hidden=h["decoder_hidden"], decoder_var=h.get("decoder_var"))
        model.encoder = Mlp.load(directory / "encoder", dtype)
        model.decoder = Mlp.load(directory / "decoder", dtype)
        if model.discriminator is not None:
            model.discriminator = Mlp.load(directory / "discriminator", dtype)
        model.trained_steps = h["trained_steps"]
        model.x_scale = h.get("x_scale", 1.0)
        return model


@dataclass
class VaeHistory:
    loss: list = field(default_factory=list)
    kl: list = field(default_factory=list)
    recon: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    disc_loss: list = field(default_factory=list)


def train_variant(model: Vae, X, config: Optional[TrainConfig] = None,
                  disc_lr: Optional[float] = None, rescale: bool = True,
                  warmup: int = 0) -> VaeHistory:
    """Mini-batch Adam on the variant objective, in place.

    On a fresh model (and ``rescale``) the input scale is set to the standard
    deviation of ``X``. The Factor variant alternates one discriminator update
    per VAE update on the same batch. ``warmup`` ramps the KL and penalty
    weights linearly from 0 over that many steps, counted from the model's first
    training step.
    """
    config = config or TrainConfig(lr=5e-4, batch_size=100, steps=1000, optimizer="adam")
    X = np.asarray(X, dtype=model.dtype)
    if rescale and model.trained_steps == 0:
        model.x_scale = float(X.std()) or 1.0
    rng = np.random.default_rng(config.seed)
    params = model.encoder.params + model.decoder.params
    n_enc = len(model.encoder.params)
    opt = Adam(config.lr) if config.optimizer == "adam" else None
    if opt is None:
        from .nn import Sgd
        opt = Sgd(config.lr)
    disc_opt = Adam(disc_lr or config.lr, beta1=0.5, beta2=0.9) if model.discriminator else None
    hist = VaeHistory()
    batch = min(config.batch_size, X.shape[0])
    for step, idx in enumerate(batch_indices(X.shape[0], batch, config.steps, rng)):
        xb = X[idx]
        eps = rng.standard_normal((len(idx), model.n_z)).astype(model.dtype)
        anneal = min(1.0, (model.trained_steps + 1) / warmup) if warmup else 1.0
        cap = None
        if model.variant.capacity > 0:
            ramp = model.variant.capacity_steps
            cap = model.variant.capacity * (min(1.0, model.trained_steps / ramp) if ramp else 1.0)
        loss, terms, grads = model.loss_and_grads(xb, eps, anneal=anneal, capacity=cap)
        if not np.isfinite(loss):
            raise TrainingDiverged(step, loss)
        opt.step(params, grads["encoder"] + grads["decoder"])
        if disc_opt is not None:
            dloss, dgrads = model.discriminator_loss_and_grads(terms["z"], rng)
            disc_opt.step(model.discriminator.params, dgrads)
            hist.disc_loss.append(dloss)
        hist.loss.append(loss)
        hist.kl.append(terms["kl"])
        hist.recon.append(terms["recon"])
        hist.penalty.append(terms["penalty"])
        if config.log_every and step % config.log_every == 0:
            log.info("step %d loss %.4f kl %.3f recon %.3f pen %.4f", step, loss, terms["kl"],
                     terms["recon"], terms["penalty"])
        model.trained_steps += 1
    assert len(params) - n_enc == len(model.decoder.params)
    return hist
