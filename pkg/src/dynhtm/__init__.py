"""Dynamical-systems reconstruction, near-neighbour forecasting, coupling detection and SDR sequence memory."""

__version__ = "0.1.0"

from .causality import ccm_skill, l_index, synchrony_test
from .dynsys import (
    ObservationConfig,
    ParameterSchedule,
    SystemParams,
    Trajectory,
    coupled_logistic,
    fixed_points,
    integrate,
    lorenz_deriv,
    observe,
)
from .embedding import EmbeddingSpec, PointCloud, TimeSeries, delay_embed, estimate_k, estimate_tau
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateInputError,
    DivergenceError,
    DynHTMError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
)
from .forecast import (
    RegimeTrackerState,
    build_library,
    correction_vector,
    predict_multi,
    predict_next,
    query_knn,
    track_regimes,
)
from .sdr import SDR, ScalarEncoderConfig, TemporalPooler, TMConfig, TransitionMemory, encode_scalar, kwta, overlap
