"""Feed-forward networks with hand-written reverse-mode gradients.

Activations and losses are kept deliberately small: dense layers with
relu/sigmoid/linear/softmax/tanh activations, l2 / softmax cross-entropy /
binary cross-entropy losses, and SGD or Adam updates.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "sigmoid", "linear", "softmax", "tanh")


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(a, kind):
    if kind == "relu":
        return np.maximum(a, 0)
    if kind == "sigmoid":
        return sigmoid(a)
    if kind == "softmax":
        return softmax(a)
    if kind == "tanh":
        return np.tanh(a)
    return a


def _activation_grad(a, h, g, kind):
    """Gradient w.r.t. pre-activation ``a`` given output ``h`` and upstream ``g``."""
    if kind == "relu":
        return g * (a > 0)
    if kind == "sigmoid":
        return g * h * (1.0 - h)
    if kind == "tanh":
        return g * (1.0 - h * h)
    if kind == "softmax":
        return h * (g - np.sum(g * h, axis=-1, keepdims=True))
    return g


class Mlp:
    """Dense feed-forward network.

    ``widths`` lists every layer size including input and output; ``activations``
    has one entry per weight layer. Parameters are stored as a flat list
    ``[W0, b0, W1, b1, ...]`` with ``W`` shaped ``(fan_in, fan_out)``.
    """

    def __init__(self, widths: Sequence[int], activations: Sequence[str], rng=None,
                 dtype=np.float64):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or len(activations) != len(widths) - 1:
            raise ValueError("need one activation per weight layer")
        for act in activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        self.widths = widths
        self.activations = list(activations)
        self.dtype = np.dtype(dtype)
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.params: List[np.ndarray] = []
        for fan_in, fan_out, act in zip(widths[:-1], widths[1:], activations):
            if act == "relu":
                std = np.sqrt(2.0 / fan_in)
            else:
                std = np.sqrt(2.0 / (fan_in + fan_out))
            self.params.append((std * rng.standard_normal((fan_in, fan_out))).astype(self.dtype))
            self.params.append(np.zeros(fan_out, dtype=self.dtype))

    @property
    def n_layers(self) -> int:
        return len(self.activations)

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.widths = list(self.widths)
        other.activations = list(self.activations)
        other.dtype = self.dtype
        other.params = [p.copy() for p in self.params]
        return other

    def astype(self, dtype) -> "Mlp":
        other = self.copy()
        other.dtype = np.dtype(dtype)
        other.params = [p.astype(dtype) for p in other.params]
        return other

    def forward(self, x) -> Tuple[np.ndarray, list]:
        """Returns the output and the per-layer ``(input, pre-activation, output)`` cache."""
        h = np.asarray(x, dtype=self.dtype)
        if h.ndim == 1:
            h = h[None, :]
        if h.shape[-1] != self.widths[0]:
            raise ValueError(f"input width {h.shape[-1]} != {self.widths[0]}")
        cache = []
        for i, act in enumerate(self.activations):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            a = h @ W + b
            out = _activate(a, act)
            cache.append((h, a, out))
            h = out
        return h, cache

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, grad_out, need_input_grad: bool = False):
        """Back-propagate ``dLoss/dOutput``; returns ``(param_grads, input_grad)``."""
        grads: List[Optional[np.ndarray]] = [None] * len(self.params)
        g = np.asarray(grad_out, dtype=self.dtype)
        for i in range(self.n_layers - 1, -1, -1):
            h_in, a, out = cache[i]
            g = _activation_grad(a, out, g, self.activations[i])
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0 or need_input_grad:
                g = g @ self.params[2 * i].T
        return grads, (g if need_input_grad else None)

    # --- checkpoints --------------------------------------------------------

    def header(self) -> dict:
        return {"widths": self.widths, "activations": self.activations}

    def save(self, path, extra: Optional[dict] = None) -> None:
        """JSON header plus a little-endian float32 weight blob next to it."""
        path = Path(path)
        header = {"format": "physpoof-mlp", "version": 1, **self.header(),
                  "optimizer_state": False, **(extra or {})}
        blob = np.concatenate([p.ravel() for p in self.params]).astype("<f4")
        path.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True))
        path.with_suffix(".f32le").write_bytes(blob.tobytes())

    @classmethod
    def load(cls, path, dtype=np.float64) -> "Mlp":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text())
        blob = np.frombuffer(path.with_suffix(".f32le").read_bytes(), dtype="<f4")
        model = cls(header["widths"], header["activations"], rng=0, dtype=dtype)
        model.set_flat(blob)
        return model

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, vec) -> None:
        vec = np.asarray(vec)
        if vec.size != self.n_params:
            raise ValueError("parameter count mismatch")
        pos = 0
        for i, p in enumerate(self.params):
            self.params[i] = vec[pos:pos + p.size].reshape(p.shape).astype(self.dtype)
            pos += p.size


# --- losses: each returns (mean loss, dLoss/dPrediction) ------------------------

def l2_loss(pred, target):
    """Mean over the batch of the summed squared error."""
    diff = pred - np.asarray(target, dtype=pred.dtype).reshape(pred.shape)
    B = pred.shape[0]
    return float(np.sum(diff * diff) / B), 2.0 * diff / B


def softmax_cross_entropy(logits, labels):
    """``labels`` are integer classes or probability rows; gradient is w.r.t. logits."""
    B, K = logits.shape
    labels = np.asarray(labels)
    if labels.ndim == 1:
        target = np.zeros_like(logits)
        target[np.arange(B), labels.astype(int)] = 1.0
    else:
        target = labels.astype(logits.dtype)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -float(np.sum(target * logp) / B)
    return loss, (np.exp(logp) - target) / B


def bce_with_logits(logits, labels):
    """Binary cross-entropy on raw logits, mean over every element."""
    y = np.asarray(labels, dtype=logits.dtype).reshape(logits.shape)
    loss = np.maximum(logits, 0) - logits * y + np.log1p(np.exp(-np.abs(logits)))
    return float(loss.mean()), (sigmoid(logits) - y) / logits.size


LOSSES = {"l2": l2_loss, "cross_entropy": softmax_cross_entropy, "bce": bce_with_logits}


def hard_threshold(v) -> np.ndarray:
    """``h(t) = 0`` for ``0 <= t <= 0.5`` and ``1`` for ``0.5 < t <= 1``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(v > 1) or np.any(np.isnan(v)):
        raise ValueError("hard_threshold expects values in [0, 1]")
    return (v > 0.5).astype(np.uint8)


# --- optimizers ---------------------------------------------------------------

class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: Optional[list] = None
        self.v: Optional[list] = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr = np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * corr * m / (np.sqrt(v) + self.eps)


def make_optimizer(name: str, lr: float):
    if name == "sgd":
        return Sgd(lr)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 100
    steps: int = 1000
    optimizer: str = "adam"
    seed: int = 0
    log_every: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("batch size must be >= 1 and steps >= 0")
        make_optimizer(self.optimizer, self.lr)


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss} at step {step}")
        self.step = step
        self.loss = loss


def batch_indices(n: int, batch_size: int, steps: int, rng: np.random.Generator):
    """Yield index arrays from successive shuffled epochs."""
    perm = rng.permutation(n)
    pos = 0
    for _ in range(steps):
        if pos + batch_size > n:
            perm = rng.permutation(n)
            pos = 0
        yield perm[pos:pos + batch_size]
        pos += batch_size


def train(model: Mlp, X, Y, loss="l2", config: Optional[TrainConfig] = None,
          callback: Optional[Callable[[int, "Mlp", float], None]] = None) -> Tuple[Mlp, np.ndarray]:
    """Mini-batch training in place; returns ``(model, per-step loss trace)``.

    ``callback(step, model, loss)`` runs after every update.
    """
    config = config or TrainConfig()
    loss_fn = LOSSES[loss] if isinstance(loss, str) else loss
    X = np.asarray(X, dtype=model.dtype)
    Y = np.asarray(Y)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y differ in length")
    rng = np.random.default_rng(config.seed)
    opt = make_optimizer(config.optimizer, config.lr)
    batch = min(config.batch_size, X.shape[0])
    trace = np.empty(config.steps)
    for step, idx in enumerate(batch_indices(X.shape[0], batch, config.steps, rng)):
        out, cache = model.forward(X[idx])
        value, g = loss_fn(out, Y[idx])
        if not np.isfinite(value):
            raise TrainingDiverged(step, value)
        grads, _ = model.backward(cache, g)
        opt.step(model.params, grads)
        trace[step] = value
        if config.log_every and step % config.log_every == 0:
            log.info("step %d loss %.6f", step, value)
        if callback is not None:
            callback(step, model, value)
    return model, trace


def predict(model: Mlp, X, batch_size: int = 4096) -> np.ndarray:
    X = np.asarray(X, dtype=model.dtype)
    return np.concatenate([model(X[i:i + batch_size]) for i in range(0, X.shape[0], batch_size)])


def numerical_gradient(f: Callable[[], float], params: Sequence[np.ndarray], coords, h: float = 1e-4):
    """Central differences of ``f`` at the given ``(param_index, flat_index)`` coordinates."""
    out = np.empty(len(coords))
    for k, (pi, fi) in enumerate(coords):
        p = params[pi].reshape(-1)
        old = p[fi]
        p[fi] = old + h
        fp = f()
        p[fi] = old - h
        fm = f()
        p[fi] = old
        out[k] = (fp - fm) / (2 * h)
    return out


def relative_error(a, b, floor: float = 1e-8) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def sample_coords(params: Sequence[np.ndarray], n: int, rng: np.random.Generator):
    sizes = np.array([p.size for p in params])
    flat = rng.choice(sizes.sum(), size=min(n, sizes.sum()), replace=False)
    edges = np.cumsum(sizes)
    coords = []
    for f in flat:
        pi = int(np.searchsorted(edges, f, side="right"))
        start = edges[pi - 1] if pi else 0
        coords.append((pi, int(f - start)))
    return coords
