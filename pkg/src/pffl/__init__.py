"""Perceptual feature fidelity loss: feature-weighted distortion and hard-label attacks."""
from .feature_map import FeatureLabel, build_penalty
from .metrics import MetricReport, mse, pffl, psnr, ssim

__version__ = "0.1.0"

__all__ = ["FeatureLabel", "build_penalty", "MetricReport", "mse", "pffl", "psnr", "ssim"]
