"""Distributed Kalman filtering with minimum-time consensus.

Each node runs a local information-form Kalman filter that needs the network
average of the measurement information matrices. That average is tracked by
consensus filters; instead of waiting for them to converge asymptotically, a
per-element detector watches the filter output and extracts its exact limit
from a finite number of samples as soon as a Hankel matrix of first
differences loses rank. A robust variant uses the nearest rank-deficient
Hankel matrix when the samples are noisy.
"""

from .confilter import (
    ExactBandpass,
    bandpass_step,
    build_stacked_system,
    initial_bandpass,
    lowpass_step,
    spectrum_check,
)
from .errors import (
    DegenerateKernel,
    DKFError,
    NeverConverged,
    NoEdges,
    NoRootAtOne,
    NumericalError,
    NumericalFailure,
    ParseError,
    PropertyViolation,
    SingularCovariance,
    StepSizeTooLarge,
    ValidationError,
    WrongLength,
    ZeroVector,
)
from .graph import Graph, default_step_size, derive_matrices, max_step_size, random_connected_graph, stable_step_size
from .harness import RandomGraphSpec, RunResult, ScenarioConfig, error_trace, run_scenario, error_comparison_check, time_to_consensus_stats
from .kalman import ckf_step, dkf_local_update, exact_averages
from .mintime import MatrixConsensus, MinTimeDetector, beta_from_alpha, final_value, hankel_of_differences, matrix_consensus
from .robust import RobustDetector, build_cx, nearest_defective_hankel, robust_final_value
from .sysmodel import ContinuousModel, ProcessModel, SensorModel, discretize

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
