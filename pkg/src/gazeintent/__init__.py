"""Gaze- and motion-based pick/place intention estimation.

The package is organized bottom-up:

- scene / datasets: domain types, the canonical table, persistence
- aoi: gaze-Gaussian attention likelihoods with depth-buffer occlusion
- tpa: target-path likelihoods from predicted vs ideal hand trajectories
- features: candidate-conditioned 8-dim observation vectors and windows
- ghmm: Gaussian HMM training, window scoring, one-vs-all classification
- sim: synthetic eye-hand-coordination trial generator
- engine: streaming per-hand estimation plus the bimanual rule combiner
- evaluation: cross-validation, earliness, window sweeps, ablations
- service / cli: WebSocket streaming endpoint and command-line front door
"""

from .scene import (
    Action,
    Frame,
    Hand,
    HandState,
    IntentLabel,
    Scene,
    SceneObject,
    Sequence,
    build_tabletop_scene,
    validate_sequence,
)
from .aoi import AoiConfig, aoi_likelihoods, rasterize_depth
from .tpa import TpaConfig, bhattacharyya, hobby_path, path_distance, predict_hand_path, tpa_vector
from .features import FeatureLayout, assemble, extract_window, window_length
from .ghmm import GhmmModel, classify, fit, load_model, log_likelihood, save_model
from .datasets import load_dataset, save_dataset

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AoiConfig",
    "FeatureLayout",
    "Frame",
    "GhmmModel",
    "Hand",
    "HandState",
    "IntentLabel",
    "Scene",
    "SceneObject",
    "Sequence",
    "TpaConfig",
    "aoi_likelihoods",
    "assemble",
    "bhattacharyya",
    "build_tabletop_scene",
    "classify",
    "extract_window",
    "fit",
    "hobby_path",
    "load_dataset",
    "load_model",
    "log_likelihood",
    "path_distance",
    "predict_hand_path",
    "rasterize_depth",
    "save_dataset",
    "save_model",
    "tpa_vector",
    "validate_sequence",
    "window_length",
]
