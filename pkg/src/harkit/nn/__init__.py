"""Minimal reverse-mode autodiff engine and the layer set used by the models."""

from .tensor import Tensor, ShapeError, as_tensor
from .layers import (
    Layer,
    Dense,
    Conv1d,
    BatchNorm1d,
    ReLU,
    MaxPool1d,
    Dropout,
    GlobalMaxPool,
    Module,
    glorot_uniform,
)
from .optim import SGD, Adam, MissingGradientError
from .gradcheck import grad_check, GradCheckReport
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "Tensor",
    "ShapeError",
    "as_tensor",
    "Layer",
    "Dense",
    "Conv1d",
    "BatchNorm1d",
    "ReLU",
    "MaxPool1d",
    "Dropout",
    "GlobalMaxPool",
    "Module",
    "glorot_uniform",
    "SGD",
    "Adam",
    "MissingGradientError",
    "grad_check",
    "GradCheckReport",
    "save_checkpoint",
    "load_checkpoint",
]
