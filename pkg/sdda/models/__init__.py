"""Reference architectures: declarative specs, parameter counting and the forward pass."""
from sdda.models.builders import BUILDERS, build_convnet, build_eegnet, build_model
from sdda.models.counting import PUBLISHED_COUNTS, LayerCount, ParamReport, count_params
from sdda.models.network import Network, init_params
from sdda.models.spec import LayerSpec, ModelSpec

__all__ = [
    "BUILDERS",
    "LayerCount",
    "LayerSpec",
    "ModelSpec",
    "Network",
    "PUBLISHED_COUNTS",
    "ParamReport",
    "build_convnet",
    "build_eegnet",
    "build_model",
    "count_params",
    "init_params",
]
