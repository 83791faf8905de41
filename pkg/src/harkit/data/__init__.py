"""Dataset parsing, windowing, synthesis, splits and on-disk containers."""

from .core import (
    SensorStream,
    Window,
    WindowSet,
    LabeledSubset,
    majority_label,
    segment,
    downsample,
    window_set_from_streams,
    stratified_split,
    subsample_labels,
)
from .synthetic import SynthSpec, synthesize
from .windowfile import (
    save_windows,
    load_windows,
    save_streams,
    load_streams,
    save_json,
)
from .parsers import parse_dataset, DATASET_CONFIGS, DatasetLayoutError

__all__ = [
    "SensorStream",
    "Window",
    "WindowSet",
    "LabeledSubset",
    "majority_label",
    "segment",
    "downsample",
    "window_set_from_streams",
    "stratified_split",
    "subsample_labels",
    "SynthSpec",
    "synthesize",
    "save_windows",
    "load_windows",
    "save_streams",
    "load_streams",
    "save_json",
    "parse_dataset",
    "DATASET_CONFIGS",
    "DatasetLayoutError",
]
