"""Skeleton package - graphs, sample formats, preprocessing and synthetic data."""

# pylint: disable=useless-import-alias
from .data import DatasetSplit as DatasetSplit
from .data import SkeletonSequence as SkeletonSequence
from .data import load_jsonl as load_jsonl
from .data import write_jsonl as write_jsonl
from .graph import SkeletonGraph as SkeletonGraph
from .graph import build_partitions as build_partitions
from .graph import load_graph as load_graph
from .graph import ntu25_graph as ntu25_graph
from .ntu import parse_ntu_skeleton as parse_ntu_skeleton
from .preprocess import center as center
from .preprocess import prepare_sample as prepare_sample
from .preprocess import resample as resample
from .preprocess import to_bone as to_bone
from .preprocess import to_motion as to_motion
from .synth import SynthSpec as SynthSpec
from .synth import nearest_centroid_accuracy as nearest_centroid_accuracy
from .synth import synth_dataset as synth_dataset

# pylint: enable=useless-import-alias

__all__ = [
    "DatasetSplit",
    "SkeletonGraph",
    "SkeletonSequence",
    "SynthSpec",
    "build_partitions",
    "center",
    "load_graph",
    "load_jsonl",
    "nearest_centroid_accuracy",
    "ntu25_graph",
    "parse_ntu_skeleton",
    "prepare_sample",
    "resample",
    "to_bone",
    "to_motion",
    "synth_dataset",
    "write_jsonl",
]
