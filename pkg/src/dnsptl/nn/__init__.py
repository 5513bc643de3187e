"""Minimal tensor/layer engine: conv, batch norm, ReLU, dense, MSE, Adam."""

from .gradcheck import GradCheckReport, grad_check
from .kernels import BACKEND
from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Layer,
    Parameter,
    ReLU,
    Sequential,
    batch_norm,
    conv2d,
    conv2d_backward,
    dense,
    mse_loss,
    relu,
)
from .optim import Adam, AdamState, adam_step

__all__ = [
    "BACKEND", "Adam", "AdamState", "BatchNorm", "Conv2D", "Dense", "GradCheckReport", "Layer",
    "Parameter", "ReLU", "Sequential", "adam_step", "batch_norm", "conv2d", "conv2d_backward",
    "dense", "grad_check", "mse_loss", "relu",
]
