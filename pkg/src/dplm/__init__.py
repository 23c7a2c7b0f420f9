"""Binaural DOA networks and a deep-feature localization-similarity metric.

The package covers the full loop: spatializing mono audio (measured BRIRs
or a parametric head model), extracting stacked magnitude/phase features,
training static and moving direction-of-arrival classifiers, turning
their internal activations into a full-reference distance, a classical
interaural-cue baseline, and the evaluation harness that ties distances
to angular separations and listening-test ratings.
"""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ExperimentConfig, load_config
from .cues import CueFrame, cue_distance, extract_cues, median_cues
from .evaluate import (
    FramewiseReport,
    RatingRecord,
    SweepPoint,
    angular_sweep,
    compare_on_trajectory,
    constant_intervals,
    correlate_ratings,
    load_ratings_csv,
    rmse_folded_azimuth,
    spearman,
    sweep_spearman,
)
from .features import FeatureTensor, extract_features, frame_count
from .geometry import (
    BinGrid,
    SourceLocation,
    Trajectory,
    angle_to_bin,
    angular_separation_deg,
    azimuth_to_bin,
    bin_to_angle,
    elevation_to_bin,
    fold_front_back,
    haversine,
    sample_trajectory,
    wrap_azimuth,
)
from .losses import ClassTarget, combined_loss, label_smoothed_ce
from .manifest import (
    BrirRecord,
    DatasetRecord,
    ManifestError,
    load_brir_manifest,
    load_brirs,
    load_dataset_manifest,
)
from .metric import (
    MetricConfig,
    PairwiseDistanceError,
    batch_distance_matrix,
    deep_feature_distance,
    distance_with_gradient,
)
from .model import (
    ActivationStack,
    DoaNet,
    ModelConfig,
    PredictionFrame,
    build_model,
    decode_doa,
    forward,
)
from .render import (
    Brir,
    fractional_delay,
    mix_noise,
    render_trajectory,
    spatialize_brir,
    spatialize_parametric,
    woodworth_itd,
)
from .signal import SAMPLE_RATE, BinauralSignal, load_binaural, load_mono, load_wav, save_wav
from .train import TrainConfig, TrainResult, evaluate_on_manifest, train

__version__ = "0.1.0"

__all__ = [
    "ActivationStack",
    "BinGrid",
    "BinauralSignal",
    "Brir",
    "BrirRecord",
    "CheckpointError",
    "ClassTarget",
    "CueFrame",
    "DatasetRecord",
    "DoaNet",
    "ExperimentConfig",
    "FeatureTensor",
    "FramewiseReport",
    "ManifestError",
    "MetricConfig",
    "ModelConfig",
    "PairwiseDistanceError",
    "PredictionFrame",
    "RatingRecord",
    "SAMPLE_RATE",
    "SourceLocation",
    "SweepPoint",
    "TrainConfig",
    "TrainResult",
    "Trajectory",
    "angle_to_bin",
    "angular_separation_deg",
    "angular_sweep",
    "azimuth_to_bin",
    "batch_distance_matrix",
    "bin_to_angle",
    "build_model",
    "combined_loss",
    "compare_on_trajectory",
    "constant_intervals",
    "correlate_ratings",
    "cue_distance",
    "decode_doa",
    "deep_feature_distance",
    "distance_with_gradient",
    "elevation_to_bin",
    "evaluate_on_manifest",
    "extract_cues",
    "extract_features",
    "fold_front_back",
    "forward",
    "fractional_delay",
    "frame_count",
    "haversine",
    "label_smoothed_ce",
    "load_binaural",
    "load_brir_manifest",
    "load_brirs",
    "load_checkpoint",
    "load_config",
    "load_dataset_manifest",
    "load_mono",
    "load_ratings_csv",
    "load_wav",
    "median_cues",
    "mix_noise",
    "render_trajectory",
    "rmse_folded_azimuth",
    "sample_trajectory",
    "save_checkpoint",
    "save_wav",
    "spatialize_brir",
    "spatialize_parametric",
    "spearman",
    "sweep_spearman",
    "train",
    "woodworth_itd",
    "wrap_azimuth",
]
