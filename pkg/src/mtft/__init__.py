"""Multi-scale temporal fusion transformer for incomplete trajectory prediction."""

from .model import VARIANTS, MTFTModel, ModelConfig

__version__ = "0.1.0"
