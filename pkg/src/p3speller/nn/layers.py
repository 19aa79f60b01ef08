"""Layers of the spatio-sequential network, with analytic gradients.

Every layer owns its trainable arrays in ``params`` (matching ``grads``)
and non-trainable state in ``buffers``. ``forward`` caches whatever the
following ``backward`` needs; ``backward`` fills ``grads`` and returns
the gradient w.r.t. the layer input.
"""

import numpy as np


class Layer:
    def __init__(self):
        self.params = {}
        self.grads = {}
        self.buffers = {}
        self._cache = None

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def param_count(self):
        """Parameter count as reported per architecture row: trainables plus buffers."""
        n = sum(p.size for p in self.params.values())
        return n + sum(b.size for b in self.buffers.values())

    def zero_grad(self):
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)


class BatchNorm(Layer):
    """Normalizes the last axis, with statistics over all leading axes.

    Training uses batch statistics (biased variance) and updates the
    running estimates as running = momentum * running + (1 - m) * batch.
    Inference normalizes with the running estimates.
    """

    def __init__(self, n_features, momentum=0.99, eps=1e-3, dtype=np.float32):
        super().__init__()
        self.n_features = n_features
        self.momentum = momentum
        self.eps = eps
        self.params = {"gamma": np.ones(n_features, dtype=dtype),
                       "beta": np.zeros(n_features, dtype=dtype)}
        self.buffers = {"running_mean": np.zeros(n_features, dtype=dtype),
                        "running_var": np.ones(n_features, dtype=dtype)}
        self.zero_grad()

    def forward(self, x, training=False, rng=None):
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.buffers["running_mean"] = (
                m * self.buffers["running_mean"] + (1.0 - m) * mean
            ).astype(x.dtype)
            self.buffers["running_var"] = (
                m * self.buffers["running_var"] + (1.0 - m) * var
            ).astype(x.dtype)
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, axes, training,
                       int(np.prod([x.shape[a] for a in axes])))
        return self.params["gamma"] * xhat + self.params["beta"]

    def backward(self, dout):
        xhat, inv_std, axes, training, n = self._cache
        self.grads["gamma"] = (dout * xhat).sum(axis=axes)
        self.grads["beta"] = dout.sum(axis=axes)
        g = self.params["gamma"]
        if not training:
            return dout * g * inv_std
        # full gradient through the batch statistics
        dxhat = dout * g
        return (inv_std / n) * (n * dxhat
                                - dxhat.sum(axis=axes)
                                - xhat * (dxhat * xhat).sum(axis=axes))


class Reshape(Layer):
    """Reshapes the per-sample tail; the batch axis passes through."""

    def __init__(self, tail_shape):
        super().__init__()
        self.tail_shape = tuple(tail_shape)

    def forward(self, x, training=False, rng=None):
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.tail_shape)

    def backward(self, dout):
        return dout.reshape(self._cache)


class SpatialConv(Layer):
    """2-D convolution with a kernel spanning all channels: (1 x C), F filters.

    Input (B, T, C, 1) -> output (B, T, 1, F): one linear channel mix per
    time step, no activation.
    """

    def __init__(self, n_channels, n_filters, rng, dtype=np.float32):
        super().__init__()
        self.n_channels = n_channels
        self.n_filters = n_filters
        limit = np.sqrt(6.0 / (n_channels + n_channels * n_filters))
        self.params = {
            "w": rng.uniform(-limit, limit, (n_channels, n_filters)).astype(dtype),
            "b": np.zeros(n_filters, dtype=dtype),
        }
        self.zero_grad()

    def forward(self, x, training=False, rng=None):
        b, t, c, _ = x.shape
        x2 = x.reshape(b * t, c)
        self._cache = (x2, x.shape)
        out = x2 @ self.params["w"] + self.params["b"]
        return out.reshape(b, t, 1, self.n_filters)

    def backward(self, dout):
        x2, in_shape = self._cache
        b, t = in_shape[0], in_shape[1]
        d2 = dout.reshape(b * t, self.n_filters)
        self.grads["w"] = x2.T @ d2
        self.grads["b"] = d2.sum(axis=0)
        return (d2 @ self.params["w"].T).reshape(in_shape)


class TemporalConv(Layer):
    """1-D convolution over time: kernel K, stride S, F filters.

    Input (B, T, C) -> output (B, W, F) with W = (T - K) // S + 1.
    """

    def __init__(self, kernel, stride, in_channels, n_filters, rng,
                 dtype=np.float32):
        super().__init__()
        self.kernel = kernel
        self.stride = stride
        self.in_channels = in_channels
        self.n_filters = n_filters
        fan_in = kernel * in_channels
        fan_out = kernel * n_filters
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        self.params = {
            "w": rng.uniform(-limit, limit,
                             (kernel, in_channels, n_filters)).astype(dtype),
            "b": np.zeros(n_filters, dtype=dtype),
        }
        self.zero_grad()

    def _n_windows(self, t):
        return (t - self.kernel) // self.stride + 1

    def forward(self, x, training=False, rng=None):
        b, t, c = x.shape
        w = self._n_windows(t)
        k, s = self.kernel, self.stride
        idx = np.arange(w)[:, None] * s + np.arange(k)[None, :]
        xw = x[:, idx, :]                             # (B, W, K, C)
        flat = xw.reshape(b, w, k * c)
        self._cache = (flat, x.shape, w)
        out = flat @ self.params["w"].reshape(k * c, self.n_filters)
        return out + self.params["b"]

    def backward(self, dout):
        flat, in_shape, w = self._cache
        b, t, c = in_shape
        k, s = self.kernel, self.stride
        wmat = self.params["w"].reshape(k * c, self.n_filters)
        self.grads["w"] = np.einsum("bwi,bwf->if", flat, dout).reshape(
            self.params["w"].shape)
        self.grads["b"] = dout.sum(axis=(0, 1))
        dflat = (dout @ wmat.T).reshape(b, w, k, c)
        dx = np.zeros(in_shape, dtype=dout.dtype)
        for j in range(k):
            dx[:, j:j + s * (w - 1) + 1:s, :] += dflat[:, :, j, :]
        return dx


class LeakyReLU(Layer):
    def __init__(self, slope=0.3):
        super().__init__()
        self.slope = slope

    def forward(self, x, training=False, rng=None):
        self._cache = x > 0
        return np.where(self._cache, x, self.slope * x)

    def backward(self, dout):
        return np.where(self._cache, dout, self.slope * dout)


class Dense(Layer):
    """Fully connected block: flatten, affine, activation, inverted dropout.

    Multi-axis inputs flatten to (B, n_in). Dropout (drop fraction
    ``dropout``) applies after the activation during training only, with
    1/(1-rate) scaling so the expected output matches inference.
    """

    def __init__(self, n_in, n_out, rng, activation="linear", dropout=0.0,
                 dtype=np.float32):
        super().__init__()
        if activation not in ("linear", "tanh", "sigmoid"):
            raise ValueError(f"unknown activation {activation!r}")
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        self.dropout = dropout
        limit = np.sqrt(6.0 / (n_in + n_out))
        self.params = {
            "w": rng.uniform(-limit, limit, (n_in, n_out)).astype(dtype),
            "b": np.zeros(n_out, dtype=dtype),
        }
        self.zero_grad()

    def forward(self, x, training=False, rng=None):
        in_shape = x.shape
        x2 = x.reshape(in_shape[0], -1)
        if x2.shape[1] != self.n_in:
            raise ValueError(f"dense expects {self.n_in} inputs, "
                             f"got {x2.shape[1]}")
        z = x2 @ self.params["w"] + self.params["b"]
        if self.activation == "tanh":
            a = np.tanh(z)
        elif self.activation == "sigmoid":
            a = 1.0 / (1.0 + np.exp(-z))
        else:
            a = z
        mask = None
        if training and self.dropout > 0.0:
            if rng is None:
                rng = np.random.default_rng()
            mask = dropout_mask(a.shape, self.dropout, rng, a.dtype)
        self._cache = (x2, in_shape, a, mask)
        return a if mask is None else a * mask

    def backward(self, dout, d_preactivation=False):
        x2, in_shape, a, mask = self._cache
        if d_preactivation:
            dz = dout
        else:
            da = dout if mask is None else dout * mask
            if self.activation == "tanh":
                dz = da * (1.0 - a * a)
            elif self.activation == "sigmoid":
                dz = da * a * (1.0 - a)
            else:
                dz = da
        self.grads["w"] = x2.T @ dz
        self.grads["b"] = dz.sum(axis=0)
        return (dz @ self.params["w"].T).reshape(in_shape)


def dropout_mask(shape, rate, rng, dtype=np.float64):
    """Inverted-dropout mask: zero with probability ``rate``, else 1/(1-rate)."""
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(dtype) / keep
