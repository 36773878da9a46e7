"""Training package - schedule, loss, optimizer, training loop, score fusion and ablations."""

# pylint: disable=useless-import-alias
from .ablation import AblationTable as AblationTable
from .ablation import run_ablation as run_ablation
from .fusion import ScoreSet as ScoreSet
from .fusion import fuse_scores as fuse_scores
from .fusion import read_scores_csv as read_scores_csv
from .fusion import write_scores_csv as write_scores_csv
from .loss import label_smoothed_ce as label_smoothed_ce
from .optim import SGD as SGD
from .schedule import lr_at as lr_at
from .trainer import RunReport as RunReport
from .trainer import evaluate as evaluate
from .trainer import train as train

# pylint: enable=useless-import-alias

__all__ = [
    "SGD",
    "AblationTable",
    "RunReport",
    "ScoreSet",
    "evaluate",
    "fuse_scores",
    "label_smoothed_ce",
    "lr_at",
    "read_scores_csv",
    "run_ablation",
    "train",
    "write_scores_csv",
]
