"""HGCT package - adjacency, STGC and DSTT blocks, the model, accounting and checkpoints."""

# pylint: disable=useless-import-alias
from .checkpoint import load_checkpoint as load_checkpoint
from .checkpoint import read_checkpoint as read_checkpoint
from .checkpoint import save_checkpoint as save_checkpoint
from .counting import cost_report as cost_report
from .counting import count_flops as count_flops
from .counting import count_params as count_params
from .dstt import DsttBlock as DsttBlock
from .features import dump_feature_responses as dump_feature_responses
from .model import HgctModel as HgctModel
from .model import build_model as build_model
from .stgc import StgcBlock as StgcBlock
from .topology import PartitionedAdjacency as PartitionedAdjacency
from .topology import effective_adjacency as effective_adjacency
from .verification import run_gradcheck_suite as run_gradcheck_suite

# pylint: enable=useless-import-alias

__all__ = [
    "DsttBlock",
    "HgctModel",
    "PartitionedAdjacency",
    "StgcBlock",
    "build_model",
    "cost_report",
    "count_flops",
    "count_params",
    "dump_feature_responses",
    "effective_adjacency",
    "load_checkpoint",
    "read_checkpoint",
    "run_gradcheck_suite",
    "save_checkpoint",
]
