"""Light-field super-resolution with high-order residual networks on numpy."""

from .errors import ComputeError, ConfigError, FormatError, HrolfError, RangeError, ShapeError
from .lightfield import LightField, extract_epi, load_lightfield, save_lightfield
from .model import ModelConfig, init_params, model_forward
from .train import TrainConfig, train_loop

__version__ = "0.1.0"

__all__ = [
    "ComputeError", "ConfigError", "FormatError", "HrolfError", "RangeError", "ShapeError",
    "LightField", "extract_epi", "load_lightfield", "save_lightfield",
    "ModelConfig", "init_params", "model_forward",
    "TrainConfig", "train_loop",
    "__version__",
]
