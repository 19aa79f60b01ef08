"""Training loop: binary cross-entropy, Adam, and the finite-difference
gradient verifier.
"""

import numpy as np

from ..errors import DivergenceError


class Adam:
    """Adam with bias correction; epsilon sits outside the square root."""

    def __init__(self, model, learning_rate=None, beta1=None, beta2=None,
                 eps=None):
        c = model.config
        self.model = model
        self.learning_rate = learning_rate if learning_rate is not None \
            else c.learning_rate
        self.beta1 = beta1 if beta1 is not None else c.adam_beta1
        self.beta2 = beta2 if beta2 is not None else c.adam_beta2
        self.eps = eps if eps is not None else c.adam_eps
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p, _ in model.parameters()}
        self.v = {name: np.zeros_like(p) for name, p, _ in model.parameters()}

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, p, g in self.model.parameters():
            m = self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            p -= (self.learning_rate * (m / bc1)
                  / (np.sqrt(v / bc2) + self.eps)).astype(p.dtype)


def bce_loss(probs, labels, clamp=1e-7):
    """Mean binary cross-entropy with probabilities clamped away from {0, 1}."""
    p = np.clip(probs, clamp, 1.0 - clamp)
    y = np.asarray(labels, dtype=p.dtype)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def train_step(model, optimizer, batch, labels, rng=None):
    """One forward/backward/update step; returns the batch loss.

    The output-layer gradient is the fused sigmoid/cross-entropy form
    (p - y) / B, so saturated probabilities still push in the right
    direction.
    """
    y = np.asarray(labels, dtype=model.dtype)
    if len(y) != len(batch):
        raise ValueError("labels must align with the batch")
    probs = model.forward(batch, training=True, rng=rng)
    loss = bce_loss(probs, y, model.config.prob_clamp)
    if not np.isfinite(loss):
        raise DivergenceError("non-finite training loss")
    d_logits = ((probs - y) / len(y)).astype(model.dtype)[:, None]
    model.backward(d_logits)
    optimizer.step()
    return loss


def train(model, x, y, config=None, rng=None):
    """Train on (x, y) with seeded shuffled mini-batches.

    Returns a per-epoch history of mean loss and training accuracy; the
    model ends in inference mode. A non-finite loss raises DivergenceError
    with the history so far attached.
    """
    config = config or model.config
    if len(x) == 0:
        raise ValueError("empty training set")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    optimizer = Adam(model, config.learning_rate, config.adam_beta1,
                     config.adam_beta2, config.adam_eps)
    model.mode = "training"
    history = []
    n = len(x)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch, labels = x[idx], y[idx]
            probs = model.forward(batch, training=True, rng=rng)
            loss = bce_loss(probs, labels, config.prob_clamp)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss in epoch {epoch}",
                    batch_index=start // config.batch_size, history=history)
            yb = np.asarray(labels, dtype=model.dtype)
            d_logits = ((probs - yb) / len(yb)).astype(model.dtype)[:, None]
            model.backward(d_logits)
            optimizer.step()
            losses.append(loss * len(idx))
            correct += int(np.sum((probs >= 0.5) == labels))
        history.append({"epoch": epoch,
                        "loss": float(np.sum(losses) / n),
                        "accuracy": correct / n})
    model.mode = "inference"
    return history


def gradient_check(model, sample, label, step=1e-5):
    """Max relative error of analytic vs central-difference gradients.

    Runs with dropout disabled and batch norm on running statistics
    (inference-mode forward), in the model's dtype; build the model with
    float64 for meaningful bounds.
    """
    x = np.asarray(sample, dtype=model.dtype)
    if x.ndim == 2:
        x = x[None]
    y = np.atleast_1d(np.asarray(label, dtype=model.dtype))
    clamp = model.config.prob_clamp

    def loss_at():
        return bce_loss(model.forward(x, training=False), y, clamp)

    probs = model.forward(x, training=False)
    d_logits = ((probs - y) / len(y)).astype(model.dtype)[:, None]
    model.backward(d_logits)
    analytic = {name: g.copy() for name, _, g in model.parameters()}

    worst = 0.0
    for name, p, _ in model.parameters():
        flat = p.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_at()
            flat[i] = orig - step
            lo = loss_at()
            flat[i] = orig
            gn = (hi - lo) / (2.0 * step)
            denom = max(abs(ga[i]), abs(gn), 1e-8)
            worst = max(worst, abs(ga[i] - gn) / denom)
    return worst
