"""The two reference architectures on arbitrary (E, T, C)."""
import logging
from typing import Callable

from sdda.exceptions import ArchitectureError
from sdda.models.counting import count_params
from sdda.models.spec import LayerSpec, ModelSpec

logger = logging.getLogger(__name__)

DROPOUT = 0.5


def _report_deltas(spec: ModelSpec) -> None:
    report = count_params(spec)
    for row in report.mismatches():
        logger.info(f"{spec.name} (E={spec.n_channels}) {row.name}: computed {row.count}, "
                    f"published {row.published} (delta {row.delta:+d})")
    if report.published_total is not None and report.total_delta:
        logger.info(f"{spec.name} (E={spec.n_channels}) total: computed {report.total}, "
                    f"published {report.published_total} (delta {report.total_delta:+d})")


def build_convnet(n_channels: int, n_samples: int, n_classes: int) -> ModelSpec:
    """Shallow ConvNet: temporal and spatial convolutions, square, mean pool, log.

    All convolutions are valid; the classifier kernel spans the remaining width.
    """
    features = (
        LayerSpec("temporal_conv", "conv2d", "Temporal Conv", kernel=(1, 25), in_channels=1, out_channels=40,
                  bias=True),
        LayerSpec("spatial_conv", "conv2d", "Spatial Conv", kernel=(n_channels, 1), in_channels=40,
                  out_channels=40),
        LayerSpec("batch_norm", "batch_norm", "BatchNorm", out_channels=40),
        LayerSpec("square", "square", "Square Activation"),
        LayerSpec("pool", "avg_pool", "Average Pooling", kernel=(1, 75), stride=(1, 15)),
        LayerSpec("log", "log", "Logarithm Activation"),
        LayerSpec("dropout", "dropout", "Dropout", p=DROPOUT),
        LayerSpec("flatten", "flatten", "Flatten"),
    )

    def classifier(maps: tuple[int, ...]) -> tuple[LayerSpec, ...]:
        c, h, w = maps
        return (LayerSpec("classifier", "dense_conv2d", "Classifier Conv", kernel=(h, w), in_channels=c,
                          out_channels=n_classes, bias=True),)

    return _assemble("convnet", n_channels, n_samples, n_classes, features, classifier)


def build_eegnet(n_channels: int, n_samples: int, n_classes: int) -> ModelSpec:
    """EEGNet with 8 temporal filters, depth multiplier 1 and 16 separable filters.

    Time convolutions use same padding; temporal and depthwise convolutions
    carry no bias.
    """
    if n_samples < 64:
        raise ArchitectureError(f"eegnet needs at least 64 samples for its temporal kernel, got {n_samples}",
                                layer="temporal_conv")
    features = (
        LayerSpec("temporal_conv", "conv2d", "Temporal Conv", kernel=(1, 64), in_channels=1, out_channels=8,
                  padding="same"),
        LayerSpec("batch_norm_1", "batch_norm", "BatchNorm", out_channels=8),
        LayerSpec("depthwise_conv", "depthwise_conv2d", "Depthwise Conv", kernel=(n_channels, 1), in_channels=8,
                  out_channels=8),
        LayerSpec("batch_norm_2", "batch_norm", "BatchNorm", out_channels=8),
        LayerSpec("elu_1", "elu", "ELU"),
        LayerSpec("pool_1", "avg_pool", "Average Pooling", kernel=(1, 4), stride=(1, 4)),
        LayerSpec("dropout_1", "dropout", "Dropout", p=DROPOUT),
        LayerSpec("separable_conv", "separable_conv2d", "Separable Conv", kernel=(1, 16), in_channels=8,
                  out_channels=16, padding="same"),
        LayerSpec("batch_norm_3", "batch_norm", "BatchNorm", out_channels=16),
        LayerSpec("elu_2", "elu", "ELU"),
        LayerSpec("pool_2", "avg_pool", "Average Pooling", kernel=(1, 8), stride=(1, 8)),
        LayerSpec("dropout_2", "dropout", "Dropout", p=DROPOUT),
        LayerSpec("flatten", "flatten", "Flatten"),
    )

    def classifier(maps: tuple[int, ...]) -> tuple[LayerSpec, ...]:
        width = maps[0] * maps[1] * maps[2]
        return (LayerSpec("fc", "linear", "Fully Connected", in_channels=width, out_channels=n_classes,
                          bias=True),)

    return _assemble("eegnet", n_channels, n_samples, n_classes, features, classifier)


def _assemble(name: str, n_channels: int, n_samples: int, n_classes: int, features: tuple[LayerSpec, ...],
              classifier: Callable[[tuple[int, ...]], tuple[LayerSpec, ...]]) -> ModelSpec:
    if n_channels < 1 or n_classes < 2:
        raise ArchitectureError(f"{name} needs E >= 1 and C >= 2, got E={n_channels}, C={n_classes}")
    head = ModelSpec(name, n_channels, n_samples, n_classes, features, split=len(features))
    # map shape entering the flatten layer
    maps = head.shapes()[-2]
    spec = ModelSpec(name, n_channels, n_samples, n_classes, features + classifier(maps), split=len(features))
    spec.shapes()
    _report_deltas(spec)
    return spec


BUILDERS: dict[str, Callable[[int, int, int], ModelSpec]] = {"convnet": build_convnet, "eegnet": build_eegnet}


def build_model(name: str, n_channels: int, n_samples: int, n_classes: int) -> ModelSpec:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ArchitectureError(f"unknown model {name!r}; known: {sorted(BUILDERS)}") from None
    return builder(n_channels, n_samples, n_classes)
