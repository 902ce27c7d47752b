"""Robust MMSE transceiver design for two-hop amplify-and-forward MIMO relays
with Gaussian channel-estimation errors."""

from .channel import ChannelModel, CorrelationParams, ErrorStats, build_model, load_preset
from .design import DesignConfig, IterTrace, alternate
from .objective import PowerBudget, Transceiver, mse

__all__ = [
    "ChannelModel",
    "CorrelationParams",
    "DesignConfig",
    "ErrorStats",
    "IterTrace",
    "PowerBudget",
    "Transceiver",
    "alternate",
    "build_model",
    "load_preset",
    "mse",
]
