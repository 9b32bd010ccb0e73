"""Scene retargeting toolkit: descriptors, learned binary codes,
random-forest hashing, and Hamming-space retrieval."""

from .codes import InferenceParams, infer_codes
from .descriptor import PyramidConfig, extract
from .errors import (
    ConfigError,
    DataError,
    ImageError,
    ModelIOError,
    SceneHashError,
)
from .evaluate import EvalReport, ProtocolParams, run_protocol
from .forest import ForestParams, HashForest, train_hash_forest
from .images import GrayImage, load_and_prepare
from .index import QueryResult, RetargetModel, hamming, query
from .model_io import load, save
from .pipeline import train_model
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "EvalReport",
    "ForestParams",
    "GrayImage",
    "HashForest",
    "ImageError",
    "InferenceParams",
    "ModelIOError",
    "ProtocolParams",
    "PyramidConfig",
    "QueryResult",
    "RetargetModel",
    "SceneHashError",
    "SynthConfig",
    "extract",
    "generate",
    "hamming",
    "infer_codes",
    "load",
    "load_and_prepare",
    "query",
    "run_protocol",
    "save",
    "train_hash_forest",
    "train_model",
    "__version__",
]
