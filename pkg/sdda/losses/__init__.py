"""Softmax, center and MMD losses, each differentiable through the tape."""
from sdda.losses.center import (
    CenterBank,
    CosineCenterLoss,
    EuclideanCenterLoss,
    center_loss,
    cosine_center_loss,
    update_centers,
)
from sdda.losses.mmd import KERNEL_FACTORS, MMDLoss, median_bandwidths, mmd2, mmd_loss
from sdda.losses.softmax import SoftmaxCrossEntropy, softmax_loss
from sdda.losses.total import LossWeights, total_loss

__all__ = [
    "CenterBank",
    "CosineCenterLoss",
    "EuclideanCenterLoss",
    "KERNEL_FACTORS",
    "LossWeights",
    "MMDLoss",
    "SoftmaxCrossEntropy",
    "center_loss",
    "cosine_center_loss",
    "median_bandwidths",
    "mmd2",
    "mmd_loss",
    "softmax_loss",
    "total_loss",
    "update_centers",
]
