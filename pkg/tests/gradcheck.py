"""Finite-difference checks shared by the unit and acceptance suites."""

import numpy as np

from physpoof.nn import Mlp, bce_with_logits, l2_loss, numerical_gradient, relative_error, \
    sample_coords, softmax_cross_entropy
from physpoof.vae import Vae, Variant

N_COORDS = 100
H = 1e-4
# Entries below this magnitude are dominated by round-off in the difference quotient.
FLOOR = 1e-6


def jitter_biases(net, rng, scale=0.1):
    """Zero-initialised biases put ReLUs exactly on their kink for rows whose
    inputs are all zero; move them off it."""
    for b in net.params[1::2]:
        b += scale * rng.standard_normal(b.shape)


def max_rel_error(f, params, analytic, rng, n=N_COORDS):
    """Worst relative error over ``n`` random coordinates.

    A coordinate whose difference quotient at ``H`` and ``H / 2`` disagree sits
    on a ReLU kink inside the stencil; it has no derivative to compare, so it is
    replaced by a fresh draw.
    """
    errors = []
    seen = set()
    for _ in range(20 * n):
        if len(errors) == n:
            break
        (pi, fi), = sample_coords(params, 1, rng)
        if (pi, fi) in seen:
            continue
        seen.add((pi, fi))
        num = numerical_gradient(f, params, [(pi, fi)], H)[0]
        half = numerical_gradient(f, params, [(pi, fi)], H / 2)[0]
        if relative_error(num, half, FLOOR) > 1e-5:
            continue
        errors.append(float(relative_error(analytic[pi].reshape(-1)[fi], num, FLOOR)))
    return max(errors)


def mlp_case(acts, loss, rng):
    widths = [5, 7, 6, 3]
    net = Mlp(widths, acts, rng)
    jitter_biases(net, rng)
    x = rng.standard_normal((8, 5))
    if loss is softmax_cross_entropy:
        y = rng.integers(0, 3, 8)
    elif loss is bce_with_logits:
        y = rng.integers(0, 2, (8, 3))
    else:
        y = rng.standard_normal((8, 3))

    def f():
        return loss(net(x), y)[0]

    out, cache = net.forward(x)
    grads, _ = net.backward(cache, loss(out, y)[1])
    return max_rel_error(f, net.params, grads, rng)


MLP_CASES = [
    (["relu", "relu", "linear"], l2_loss),
    (["tanh", "sigmoid", "linear"], l2_loss),
    (["relu", "tanh", "softmax"], l2_loss),
    (["sigmoid", "relu", "linear"], softmax_cross_entropy),
    (["tanh", "relu", "linear"], bce_with_logits),
]

VAE_CASES = {
    "plain": dict(variant=Variant()),
    "beta": dict(variant=Variant.beta_vae(4.0)),
    "beta-capacity": dict(variant=Variant.beta_vae(4.0, 5.0), capacity=2.0),
    "dip": dict(variant=Variant.dip(3.0, 7.0)),
    "factor": dict(variant=Variant.factor(5.0)),
    "fixed-var": dict(variant=Variant(), decoder_var=0.2),
    "eta": dict(variant=Variant(), eta=0.3),
}


def vae_case(name, rng):
    spec = dict(VAE_CASES[name])
    capacity = spec.pop("capacity", None)
    variant = spec.pop("variant")
    model = Vae(12, 3, (9, 7), variant, rng=rng, **spec)
    for net in (model.encoder, model.decoder, model.discriminator):
        if net is not None:
            jitter_biases(net, rng)
    model.x_scale = 1.7
    x = rng.standard_normal((6, 12))
    eps = rng.standard_normal((6, 3))
    _, _, grads = model.loss_and_grads(x, eps, capacity=capacity)
    params = model.encoder.params + model.decoder.params

    def f():
        return model.loss_and_grads(x, eps, need_grads=False, capacity=capacity)[0]

    return max_rel_error(f, params, grads["encoder"] + grads["decoder"], rng)


def discriminator_case(rng):
    model = Vae(8, 3, (6,), Variant.factor(5.0), rng=rng)
    jitter_biases(model.discriminator, rng)
    z = rng.standard_normal((10, 3))
    seed = int(rng.integers(1 << 30))
    _, grads = model.discriminator_loss_and_grads(z, np.random.default_rng(seed))

    def f():
        return model.discriminator_loss_and_grads(z, np.random.default_rng(seed))[0]

    return max_rel_error(f, model.discriminator.params, grads, rng)
