"""Parameter initialization and the forward pass of a ``ModelSpec``."""
import logging
from typing import Optional

import numpy as np

from sdda.autodiff import kernels as K
from sdda.autodiff.params import ParamStore
from sdda.autodiff.tensor import Tensor
from sdda.exceptions import ShapeError
from sdda.models.spec import LayerSpec, ModelSpec

logger = logging.getLogger(__name__)


def _weight_shapes(layer: LayerSpec) -> dict[str, tuple[tuple[int, ...], int]]:
    """Parameter name suffix -> (shape, fan_in)."""
    kh, kw = layer.kernel
    cin, cout = layer.in_channels, layer.out_channels
    if layer.kind in ("conv2d", "dense_conv2d"):
        shapes = {"weight": ((cout, cin, kh, kw), cin * kh * kw)}
    elif layer.kind == "depthwise_conv2d":
        shapes = {"weight": ((cout, 1, kh, kw), kh * kw)}
    elif layer.kind == "separable_conv2d":
        shapes = {"depthwise": ((cin, 1, kh, kw), kh * kw), "pointwise": ((cout, cin, 1, 1), cin)}
    elif layer.kind == "linear":
        shapes = {"weight": ((cout, cin), cin)}
    else:
        return {}
    if layer.bias:
        fan_in = shapes["pointwise" if layer.kind == "separable_conv2d" else "weight"][1]
        shapes["bias"] = ((cout,), fan_in)
    return shapes


def init_params(spec: ModelSpec, rng: np.random.Generator, dtype: np.dtype = np.float64) -> ParamStore:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; batch norm starts at gamma=1, beta=0."""
    store = ParamStore(dtype)
    for index, layer in enumerate(spec.layers):
        group = "feature" if index < spec.split else "classifier"
        if layer.kind == "batch_norm":
            c = layer.out_channels
            store.add(f"{layer.name}.gamma", np.ones(c), group)
            store.add(f"{layer.name}.beta", np.zeros(c), group)
            store.add_buffer(f"{layer.name}.running_mean", np.zeros(c))
            store.add_buffer(f"{layer.name}.running_var", np.ones(c))
            continue
        for suffix, (shape, fan_in) in _weight_shapes(layer).items():
            bound = 1.0 / np.sqrt(fan_in)
            store.add(f"{layer.name}.{suffix}", rng.uniform(-bound, bound, size=shape), group)
    logger.debug(f"initialized {spec.name}: {store.count('feature')} feature + "
                 f"{store.count('classifier')} classifier parameters")
    return store


class Network:
    """A spec bound to a parameter store.

    Two ``Network`` objects over the same store are the two Siamese branches;
    they share parameters by identity.
    """

    def __init__(self, spec: ModelSpec, store: ParamStore):
        self.spec = spec
        self.store = store

    def forward(self, x: np.ndarray | Tensor, bn_train: bool = False,
                dropout_rng: Optional[np.random.Generator] = None) -> tuple[Tensor, Tensor]:
        """Logits (b, C) and embedding (b, L) for trials shaped (b, E, T).

        Batch norm uses batch statistics and updates its running buffers when
        ``bn_train``; dropout is active only when a generator is given.
        """
        data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=self.store.dtype)
        if data.ndim != 3 or data.shape[1:] != self.spec.input_shape:
            raise ShapeError(f"{self.spec.name} expects trials shaped (b, {self.spec.n_channels}, "
                             f"{self.spec.n_samples}), got {data.shape}")
        h = Tensor(data[:, None, :, :])
        embedding = h
        for index, layer in enumerate(self.spec.layers):
            h = self._layer(layer, h, bn_train, dropout_rng)
            if index == self.spec.split - 1:
                embedding = h
        return h, embedding

    def _layer(self, layer: LayerSpec, h: Tensor, bn_train: bool,
               dropout_rng: Optional[np.random.Generator]) -> Tensor:
        p = self.store.param
        bias = p(f"{layer.name}.bias") if layer.bias else None
        kind = layer.kind
        if kind == "conv2d":
            return K.conv2d(h, p(f"{layer.name}.weight"), bias, padding=layer.padding)
        if kind == "depthwise_conv2d":
            return K.depthwise_conv2d(h, p(f"{layer.name}.weight"), bias, padding=layer.padding)
        if kind == "separable_conv2d":
            h = K.depthwise_conv2d(h, p(f"{layer.name}.depthwise"), padding=layer.padding)
            return K.conv2d(h, p(f"{layer.name}.pointwise"), bias)
        if kind == "dense_conv2d":
            weight = K.reshape(p(f"{layer.name}.weight"), (layer.out_channels, -1))
            return K.linear(h, weight, bias)
        if kind == "linear":
            return K.linear(h, p(f"{layer.name}.weight"), bias)
        if kind == "batch_norm":
            return K.batch_norm(
                h, p(f"{layer.name}.gamma"), p(f"{layer.name}.beta"),
                running_mean=self.store.buffers[f"{layer.name}.running_mean"],
                running_var=self.store.buffers[f"{layer.name}.running_var"],
                train=bn_train,
            )
        if kind == "square":
            return K.square(h)
        if kind == "log":
            return K.log(h)
        if kind == "elu":
            return K.elu(h)
        if kind == "avg_pool":
            return K.avg_pool(h, layer.kernel, layer.stride)
        if kind == "dropout":
            return K.dropout(h, layer.p, dropout_rng, train=dropout_rng is not None)
        if kind == "flatten":
            return K.flatten(h)
        raise ShapeError(f"no forward rule for layer kind {kind!r}")

    def predict_logits(self, trials: np.ndarray, batch_size: int = 128) -> np.ndarray:
        """Eval-mode logits, batch norm on running statistics and no dropout."""
        return self._eval(trials, batch_size)[0]

    def embed(self, trials: np.ndarray, batch_size: int = 128) -> np.ndarray:
        return self._eval(trials, batch_size)[1]

    def _eval(self, trials: np.ndarray, batch_size: int) -> tuple[np.ndarray, np.ndarray]:
        logits, embeddings = [], []
        for start in range(0, len(trials), batch_size):
            out, emb = self.forward(trials[start:start + batch_size], bn_train=False)
            logits.append(out.numpy())
            embeddings.append(emb.numpy())
        if not logits:
            raise ShapeError("cannot evaluate an empty trial set")
        return np.concatenate(logits), np.concatenate(embeddings)
