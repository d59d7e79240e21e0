"""Prototype-based few-shot class-incremental learning on feature
embeddings: nearest-mean and Mahalanobis classifiers, random-projection
ridge readouts, and distribution calibration for few-shot classes."""

from .calibration import (
    CalibrationConfig,
    calibrate_all,
    calibrate_covariance,
    calibrate_prototype,
    calibration_weights,
    similarity,
)
from .classifiers import (
    CalibratedMahalanobisClassifier,
    CalibratedPrototypeClassifier,
    IncrementalClassifier,
    MahalanobisClassifier,
    NearestMeanClassifier,
)
from .datastore import (
    METHODS,
    MethodConfig,
    RunConfig,
    load_run_config,
    parse_run_config,
    read_report,
    read_store,
    write_report,
    write_store,
)
from .numerics import (
    correlation_normalize,
    estimate_stats,
    invert_spd,
    mahalanobis_sq,
    make_rng,
    sample_gaussian,
    shrink,
    softmax,
)
from .protocol import (
    ProtocolConfig,
    a_hm,
    build_task_stream,
    evaluate_after_task,
    finalize_report,
    stream_hash,
)
from .ranpac import (
    CalibratedRandomProjectionRidgeClassifier,
    GramState,
    ProjectionState,
    RandomProjectionRidgeClassifier,
    accumulate,
    init_projection,
    project,
    ridge_scores,
    select_lambda,
)
from .runner import compare_reports, make_classifier, run_experiment, run_stream, run_suite
from .synthgen import SynthConfig, covariance_similarity, generate, structure_correlation
from .types import (
    ClassStats,
    EvalReport,
    FeatureStore,
    Task,
    TaskMetrics,
    TaskStream,
    validate_store,
)

__version__ = "0.1.0"
