"""The spatio-sequential CNN: a channel-spanning 2-D convolution feeding a
strided temporal 1-D convolution, batch-normalized at input and after the
temporal stage, topped with two tanh blocks and a sigmoid output.

The default architecture (row / output tail / parameters, running
statistics included):

    batch_norm_1   (160, 64)      256
    reshape_1      (160, 64, 1)     0
    conv_2d        (160, 1, 32)  2080
    reshape_2      (160, 32)        0
    conv_1d        (8, 16)      10256
    batch_norm_2   (8, 16)         64
    leaky_relu     (8, 16)          0
    dense_1        (128,)       16512
    dense_2        (128,)       16512
    dense_out      (1,)           129
                         total  45809
"""

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from ..errors import DimensionError, FormatError
from .layers import (BatchNorm, Dense, LeakyReLU, Reshape, SpatialConv,
                     TemporalConv)

WEIGHTS_MAGIC = b"SPSQ"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    """Stack dimensions; the defaults realize the 45,809-parameter network."""
    n_samples: int = 160
    n_channels: int = 64
    spatial_filters: int = 32
    temporal_kernel: int = 20
    temporal_stride: int = 20
    temporal_filters: int = 16
    dense_units: int = 128

    @property
    def temporal_windows(self):
        return (self.n_samples - self.temporal_kernel) // self.temporal_stride + 1

    @property
    def flat_size(self):
        return self.temporal_windows * self.temporal_filters


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the reference regime."""
    batch_size: int = 32
    learning_rate: float = 1e-3
    epochs: int = 30
    leaky_slope: float = 0.3
    dropout: float = 0.8
    bn_momentum: float = 0.99
    bn_eps: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-7
    prob_clamp: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        if not 0.0 < self.bn_momentum < 1.0:
            raise ValueError("batch-norm momentum must be in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


class SpatioSequentialCNN:
    """Binary target/non-target classifier over (160, 64) filtered epochs."""

    def __init__(self, config=None, arch=None, seed=0, dtype=np.float32):
        self.config = config or TrainConfig()
        self.arch = arch or Architecture()
        self.seed = seed
        self.dtype = dtype
        self.mode = "training"
        rng = np.random.default_rng(seed)
        a, c = self.arch, self.config
        self.layers = [
            ("batch_norm_1", BatchNorm(a.n_channels, c.bn_momentum, c.bn_eps,
                                       dtype)),
            ("reshape_1", Reshape((a.n_samples, a.n_channels, 1))),
            ("conv_2d", SpatialConv(a.n_channels, a.spatial_filters, rng,
                                    dtype)),
            ("reshape_2", Reshape((a.n_samples, a.spatial_filters))),
            ("conv_1d", TemporalConv(a.temporal_kernel, a.temporal_stride,
                                     a.spatial_filters, a.temporal_filters,
                                     rng, dtype)),
            ("batch_norm_2", BatchNorm(a.temporal_filters, c.bn_momentum,
                                       c.bn_eps, dtype)),
            ("leaky_relu", LeakyReLU(c.leaky_slope)),
            ("dense_1", Dense(a.flat_size, a.dense_units, rng, "tanh",
                              c.dropout, dtype)),
            ("dense_2", Dense(a.dense_units, a.dense_units, rng, "tanh",
                              c.dropout, dtype)),
            ("dense_out", Dense(a.dense_units, 1, rng, "sigmoid", 0.0, dtype)),
        ]

    def forward(self, batch, training=None, rng=None, dropout_seed=None):
        """Run the stack; returns per-sample target probabilities, shape (B,).

        ``training`` defaults to the model's mode flag. ``rng`` (or
        ``dropout_seed``) drives the dropout masks; inference ignores it.
        """
        if training is None:
            training = self.mode == "training"
        x = np.asarray(batch, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        expected = (self.arch.n_samples, self.arch.n_channels)
        if x.ndim != 3 or x.shape[1:] != expected:
            raise DimensionError(f"batch shape {x.shape} does not end in "
                                 f"{expected}")
        if rng is None and dropout_seed is not None:
            rng = np.random.default_rng(dropout_seed)
        for _, layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x[:, 0]

    def predict_proba(self, batch):
        return self.forward(batch, training=False)

    def backward(self, d_logits):
        """Backpropagate from the output pre-activation gradient, shape (B, 1).

        Feeding d(loss)/d(logit) directly keeps the sigmoid/cross-entropy
        pair numerically stable at saturation.
        """
        grad = self.layers[-1][1].backward(d_logits, d_preactivation=True)
        for _, layer in reversed(self.layers[:-1]):
            grad = layer.backward(grad)
        return grad

    def parameters(self):
        """Trainable arrays as (qualified name, param, grad) triples."""
        out = []
        for name, layer in self.layers:
            for pname in sorted(layer.params):
                out.append((f"{name}.{pname}", layer.params[pname],
                            layer.grads[pname]))
        return out

    def set_parameter(self, qualified, value):
        lname, pname = qualified.split(".")
        layer = dict(self.layers)[lname]
        layer.params[pname] = value.astype(layer.params[pname].dtype)

    def parameter_counts(self):
        """Per-row (name, count) including batch-norm running statistics."""
        return [(name, layer.param_count()) for name, layer in self.layers]

    def total_parameters(self):
        return sum(n for _, n in self.parameter_counts())

    def activation_shapes(self, batch_size=1):
        """Per-row output tail shapes for a forward pass (shape contract)."""
        x = np.zeros((batch_size, self.arch.n_samples, self.arch.n_channels),
                     dtype=self.dtype)
        shapes = []
        for _, layer in self.layers:
            x = layer.forward(x, training=False)
            shapes.append(x.shape[1:])
        return shapes

    def _blocks(self):
        """Serialization order: per row, params then buffers, names sorted."""
        for name, layer in self.layers:
            for pname in sorted(layer.params):
                yield f"{name}.{pname}", layer.params, pname
            for bname in sorted(layer.buffers):
                yield f"{name}.{bname}", layer.buffers, bname

    def save_weights(self, destination):
        """Write the SPSQ weight container; float32 little-endian blocks."""
        header = {
            "arch": asdict(self.arch),
            "config": asdict(self.config),
            "seed": self.seed,
            "mode": self.mode,
            "blocks": [{"name": qual, "shape": list(store[key].shape)}
                       for qual, store, key in self._blocks()],
        }
        hb = json.dumps(header, sort_keys=True,
                        separators=(",", ":")).encode("utf-8")

        def _emit(fh):
            n = fh.write(WEIGHTS_MAGIC)
            n += fh.write(bytes([WEIGHTS_VERSION]))
            n += fh.write(struct.pack("<I", len(hb)))
            n += fh.write(hb)
            for _, store, key in self._blocks():
                n += fh.write(np.ascontiguousarray(store[key],
                                                   dtype="<f4").tobytes())
            return n

        if hasattr(destination, "write"):
            return _emit(destination)
        with open(destination, "wb") as fh:
            return _emit(fh)

    @classmethod
    def load_weights(cls, source, dtype=np.float32):
        """Rebuild a model from an SPSQ weight container."""
        if not hasattr(source, "read"):
            with open(source, "rb") as fh:
                return cls.load_weights(fh, dtype=dtype)
        fh = source
        magic = fh.read(4)
        if magic != WEIGHTS_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {WEIGHTS_MAGIC!r}")
        version = fh.read(1)
        if len(version) != 1 or version[0] != WEIGHTS_VERSION:
            raise FormatError(f"unsupported weight-file version {version!r}")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise FormatError("short read in header length")
        header = json.loads(fh.read(struct.unpack("<I", raw_len)[0]))

        model = cls(config=TrainConfig(**header["config"]),
                    arch=Architecture(**header["arch"]),
                    seed=header.get("seed", 0), dtype=dtype)
        model.mode = header.get("mode", "inference")
        expected = {qual: (store, key, store[key].shape)
                    for qual, store, key in model._blocks()}
        for block in header["blocks"]:
            qual, shape = block["name"], tuple(block["shape"])
            if qual not in expected:
                raise FormatError(f"unknown weight block {qual!r}")
            store, key, want = expected[qual]
            if shape != want:
                raise DimensionError(f"block {qual!r} has shape {shape}, "
                                     f"model expects {want}")
            nbytes = int(np.prod(shape)) * 4
            raw = fh.read(nbytes)
            if len(raw) != nbytes:
                raise FormatError(f"truncated weight block {qual!r}")
            store[key] = np.frombuffer(raw, dtype="<f4").reshape(shape) \
                .astype(dtype)
        for _, layer in model.layers:
            layer.zero_grad()
        return model


def build_model(config=None, seed=0, arch=None, dtype=np.float32):
    """Construct the network with seeded fan-based uniform initialization."""
    return SpatioSequentialCNN(config=config, arch=arch, seed=seed, dtype=dtype)
