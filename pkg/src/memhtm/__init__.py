"""Dual-fidelity simulator of a memristive hierarchical temporal memory region."""

__version__ = "0.1.0"

from .encoding import (SDR, Packet, ScalarEncoder, depacketize, iter_packets,
                       n_packets, overlap, packetize)
from .memristor import (CalibrationError, DeviceParams, MemristorArray,
                        MemristorDevice, fit_rate_constants, pulse_sweep_trace,
                        pulses_for_delta, window)
from .validation import ConfigError, DataError
from .crossbar import Crossbar
from .spatial_pooler import SpatialPooler
from .temporal_memory import TemporalMemory
from .classifier import SdrClassifier, anomaly_score, softmax
from .ssr import (CycleLedger, LatencyReport, arbitrate, arbitrate_grid,
                  broadcast_cycles, latency_estimate, latency_sweep,
                  p_false_match, p_match)
from .pipeline import HtmModel, StepResult
from .harness import (TimeSeries, default_config, elasticity_projection,
                      ingest_csv, lifespan_rounds, load_config, mape,
                      run_fault_sweep, run_prediction, synthetic_series)

__all__ = [
    "SDR", "Packet", "ScalarEncoder", "depacketize", "iter_packets",
    "n_packets", "overlap", "packetize",
    "CalibrationError", "DeviceParams", "MemristorArray", "MemristorDevice",
    "fit_rate_constants", "pulse_sweep_trace", "pulses_for_delta", "window",
    "ConfigError", "DataError",
    "Crossbar", "SpatialPooler", "TemporalMemory",
    "SdrClassifier", "anomaly_score", "softmax",
    "CycleLedger", "LatencyReport", "arbitrate", "arbitrate_grid",
    "broadcast_cycles", "latency_estimate", "latency_sweep",
    "p_false_match", "p_match",
    "HtmModel", "StepResult",
    "TimeSeries", "default_config", "elasticity_projection", "ingest_csv",
    "lifespan_rounds", "load_config", "mape", "run_fault_sweep",
    "run_prediction", "synthetic_series",
]
