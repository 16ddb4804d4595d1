"""Frozen spectral encoder/decoder forecasting with in-context residual correction."""

from .errors import (CellError, ConditioningError, ConfigError, DegenerateKernelError,
                     IntegrationError, LisaError, ParseError)
from .gplm import GplmDecoder, fit_decoder, predict, predict_batch
from .hankel import hankelize, split_prefix
from .icm import IcmConfig, Mode
from .metrics import MetricReport, evaluate
from .rollout import Forecast, Method, RolloutConfig, roll
from .series import TimeSeries
from .spectral import KernelParams, SpectralModel, encode, encode_batch, fit

__version__ = "0.1.0"

__all__ = [
    "CellError", "ConditioningError", "ConfigError", "DegenerateKernelError", "Forecast",
    "GplmDecoder", "IcmConfig", "IntegrationError", "KernelParams", "LisaError", "Method",
    "MetricReport", "Mode", "ParseError", "RolloutConfig", "SpectralModel", "TimeSeries",
    "encode", "encode_batch", "evaluate", "fit", "fit_decoder", "hankelize", "predict",
    "predict_batch", "roll", "split_prefix",
]
