"""Declarative layer lists and their shape algebra."""
import logging
import shlex
from dataclasses import dataclass, fields

from sdda.autodiff.kernels import conv_output_length, pool_output_length
from sdda.exceptions import ArchitectureError

logger = logging.getLogger(__name__)

LAYER_KINDS = (
    "conv2d", "depthwise_conv2d", "separable_conv2d", "dense_conv2d", "batch_norm",
    "square", "log", "elu", "avg_pool", "dropout", "flatten", "linear",
)


@dataclass(frozen=True)
class LayerSpec:
    """One layer. ``dense_conv2d`` is a convolution whose kernel spans the whole
    incoming map, so it acts on the flattened embedding."""

    name: str
    kind: str
    label: str = ""
    kernel: tuple[int, int] = (1, 1)
    stride: tuple[int, int] = (1, 1)
    in_channels: int = 0
    out_channels: int = 0
    padding: str = "valid"
    bias: bool = False
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def param_count(self) -> int:
        kh, kw = self.kernel
        cin, cout = self.in_channels, self.out_channels
        bias = cout if self.bias else 0
        if self.kind in ("conv2d", "dense_conv2d"):
            return cout * cin * kh * kw + bias
        if self.kind == "depthwise_conv2d":
            return cout * kh * kw + bias
        if self.kind == "separable_conv2d":
            return cin * kh * kw + cin * cout + bias
        if self.kind == "batch_norm":
            return 2 * cout
        if self.kind == "linear":
            return cin * cout + bias
        return 0

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape after this layer, (maps, height, width) or (width,) once flattened."""
        if self.kind == "flatten":
            width = 1
            for extent in shape:
                width *= extent
            return (width,)
        if self.kind in ("linear", "dense_conv2d"):
            return (self.out_channels,)
        if self.kind in ("square", "log", "elu", "dropout", "batch_norm"):
            return shape
        c, h, w = shape
        kh, kw = self.kernel
        if self.kind == "avg_pool":
            sh, sw = self.stride
            h_out = pool_output_length(h, kh, sh) if h >= kh else 0
            w_out = pool_output_length(w, kw, sw) if w >= kw else 0
        else:
            h_out, w_out = conv_output_length(h, kh, self.padding), conv_output_length(w, kw, self.padding)
        if h_out <= 0 or w_out <= 0:
            raise ArchitectureError(
                f"layer {self.name!r} ({self.label or self.kind}) with kernel {self.kernel} leaves no output "
                f"from input {shape}; the trial is too short or has too few channels",
                layer=self.name,
            )
        return (self.out_channels or c, h_out, w_out)

    def to_text(self) -> str:
        parts = ["layer"]
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = "x".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            parts.append(f"{f.name}={shlex.quote(str(value))}")
        return " ".join(parts)

    @classmethod
    def from_text(cls, line: str) -> "LayerSpec":
        tokens = shlex.split(line)
        if not tokens or tokens[0] != "layer":
            raise ValueError(f"not a layer line: {line!r}")
        values = dict(token.split("=", 1) for token in tokens[1:])
        return cls(
            name=values["name"],
            kind=values["kind"],
            label=values.get("label", ""),
            kernel=tuple(int(v) for v in values["kernel"].split("x")),
            stride=tuple(int(v) for v in values["stride"].split("x")),
            in_channels=int(values["in_channels"]),
            out_channels=int(values["out_channels"]),
            padding=values["padding"],
            bias=values["bias"] == "true",
            p=float(values["p"]),
        )


@dataclass(frozen=True)
class ModelSpec:
    """Ordered layers on input (E, T) for C classes.

    ``layers[:split]`` is the feature extractor whose output is the embedding;
    ``layers[split:]`` is the classifier.
    """

    name: str
    n_channels: int
    n_samples: int
    n_classes: int
    layers: tuple[LayerSpec, ...]
    split: int

    @property
    def input_shape(self) -> tuple[int, int]:
        return self.n_channels, self.n_samples

    @property
    def feature_layers(self) -> tuple[LayerSpec, ...]:
        return self.layers[:self.split]

    @property
    def classifier_layers(self) -> tuple[LayerSpec, ...]:
        return self.layers[self.split:]

    def shapes(self) -> list[tuple[int, ...]]:
        """Output shape of every layer, starting from (1, E, T)."""
        shape: tuple[int, ...] = (1, self.n_channels, self.n_samples)
        out = []
        for layer in self.layers:
            shape = layer.output_shape(shape)
            out.append(shape)
        return out

    @property
    def embedding_width(self) -> int:
        shape = self.shapes()[self.split - 1]
        if len(shape) != 1:
            raise ArchitectureError(f"feature extractor of {self.name} must end flattened, ends at {shape}")
        return shape[0]

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(f"{self.name} has no layer {name!r}")

    def to_text(self) -> str:
        """One header line, then one ``key=value`` line per layer."""
        header = (f"model name={self.name} channels={self.n_channels} samples={self.n_samples} "
                  f"classes={self.n_classes} split={self.split}")
        return "\n".join([header, *(layer.to_text() for layer in self.layers)]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelSpec":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines or not lines[0].startswith("model "):
            raise ValueError("model spec text must start with a 'model' line")
        header = dict(token.split("=", 1) for token in shlex.split(lines[0])[1:])
        return cls(
            name=header["name"],
            n_channels=int(header["channels"]),
            n_samples=int(header["samples"]),
            n_classes=int(header["classes"]),
            layers=tuple(LayerSpec.from_text(line) for line in lines[1:]),
            split=int(header["split"]),
        )
