"""Common package - Shared exceptions, configs and run-state helpers."""

# Explicit re-exports for proper package API
# pylint: disable=useless-import-alias
from .exceptions import CheckpointError as CheckpointError
from .exceptions import ConfigError as ConfigError
from .exceptions import DataError as DataError
from .exceptions import DimensionError as DimensionError
from .exceptions import FormatError as FormatError
from .exceptions import HgctError as HgctError
from .exceptions import NumericalError as NumericalError
from .exceptions import OracleError as OracleError
from .exceptions import ParseError as ParseError
from .exceptions import SchemaError as SchemaError
from .exceptions import TopologyError as TopologyError
from .exceptions import UsageError as UsageError
from .state import FileRunRepository as FileRunRepository
from .state import RunRepository as RunRepository
from .types import AblationAxis as AblationAxis
from .types import DsttConfig as DsttConfig
from .types import DType as DType
from .types import Modality as Modality
from .types import ModelConfig as ModelConfig
from .types import RunManifest as RunManifest
from .types import RunMode as RunMode
from .types import TopologyMode as TopologyMode
from .types import TrainConfig as TrainConfig
from .utils import config_run_id as config_run_id
from .utils import derive_rng as derive_rng
from .utils import fraction_literal as fraction_literal

# pylint: enable=useless-import-alias

__all__ = [
    # Exceptions
    "CheckpointError",
    "ConfigError",
    "DataError",
    "DimensionError",
    "FormatError",
    "HgctError",
    "NumericalError",
    "OracleError",
    "ParseError",
    "SchemaError",
    "TopologyError",
    "UsageError",
    # State
    "FileRunRepository",
    "RunRepository",
    # Types
    "AblationAxis",
    "DType",
    "DsttConfig",
    "Modality",
    "ModelConfig",
    "RunManifest",
    "RunMode",
    "TopologyMode",
    "TrainConfig",
    # Utils
    "config_run_id",
    "derive_rng",
    "fraction_literal",
]
