"""Distribution-moment analytics for wearable accelerometer, heart-rate and EEG streams.

Signals are cut into sliding windows, each window is summarised by its
mean, standard deviation, skewness and excess kurtosis, and the resulting
trajectories on the (skewness, excess kurtosis) plane are analysed with
distance metrics, phase slopes, clustering and correlation.
"""
from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .analysis import (
    ClusterResult,
    CorrelationMatrix,
    FatigueCorrelationReport,
    FeatureMatrix,
    MomentKMeans,
    MomentPCA,
    ZScoreScaler,
    cluster_purity,
    fatigue_correlation,
    kmeans,
    moment_feature_pipeline,
    pca,
    pearson,
    pearson_matrix,
    zscore,
)
from .exceptions import (
    BiomomentsError,
    DataFormatError,
    DegenerateError,
    DomainError,
    InsufficientDataError,
    NoAnalyzableWindowsError,
    RowError,
    SequenceError,
    UndefinedShapeError,
)
from .metrics import (
    MetricSeries,
    MomentTrajectory,
    Phase,
    PhaseSlopes,
    metric_from_normal,
    metric_from_uniform,
    metric_series,
    phase_slopes,
    trajectory_speed,
)
from .moments import (
    MomentAccumulator,
    MomentVector,
    WindowedMoments,
    batch_moments,
    bootstrap_ci,
    periodogram,
    sliding_windows,
    spectrogram,
    streaming_moments,
    window_moments,
)
from .signals import (
    EEGSample,
    Modality,
    RRInterval,
    TriaxSample,
    classify_band,
    hr_to_rr,
    magnitude,
    parse_csv,
    read_csv,
    rr_to_hr_integer,
    write_csv,
)
from .simulator import SessionProfile, SyntheticSession, generate_session, reference_profiles

__all__ = [name for name in dir() if not name.startswith("_")]
