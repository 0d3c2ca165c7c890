"""Trainable iterative detection for overloaded MIMO channels."""

from .channel import (
    ComplexChannel,
    Observation,
    RealSystem,
    noise_sigma_from_snr,
    sample_complex_channel,
    sample_transmit,
    to_real_system,
    transmit,
)
from .detectors import (
    DetectorParams,
    ForwardTrace,
    hard_decision,
    ista_detect,
    mmse_detect,
    soft_threshold,
    ti_detect,
    ti_forward,
)
from .evaluation import BerRecord, EvalConfig, estimate_ber, snr_sweep
from .training import TrainConfig, adam_step, squared_loss, ti_backward, train_incremental

__version__ = "0.1.0"
