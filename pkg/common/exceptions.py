"""
HGCT Exception Hierarchy
========================

Structured exceptions for the HGCT toolkit.
All toolkit-specific exceptions inherit from HgctError.

Configuration and dimension errors also inherit from ValueError so callers
that only know the standard library still catch them.
"""

from __future__ import annotations


class HgctError(Exception):
    """Base exception for all toolkit errors.

    All toolkit-specific exceptions should inherit from this class.
    This allows callers to catch all toolkit errors with a single except clause.
    """


class ConfigError(HgctError, ValueError):
    """Configuration is invalid.

    Raised when:
    - A config file names an unknown key
    - A value cannot be converted to the key's type
    - Channel counts are not divisible by heads or groups
    - A subcommand receives an inconsistent combination of settings
    """


class DimensionError(HgctError, ValueError):
    """Tensor shapes are incompatible.

    Raised when:
    - Matrix inner dimensions do not contract
    - Convolution inputs or kernels have the wrong rank or extent
    - Input geometry does not match the model configuration
    """


class DataError(HgctError):
    """Skeleton data is invalid."""


class ParseError(DataError):
    """A data file could not be parsed.

    Raised when:
    - A JSON-lines record is malformed (message carries the line number)
    - An NTU .skeleton file is truncated or declares zero frames
    """


class SchemaError(DataError):
    """A sample does not match the declared dataset schema.

    Raised when:
    - Joint count or channel count differs from the sidecar manifest
    - A label is outside [0, classes)
    """


class FormatError(DataError):
    """A file violates its fixed format.

    Raised when:
    - An NTU body declares a joint count other than 25
    """


class TopologyError(HgctError):
    """A skeleton graph is unusable.

    Raised when:
    - Edges do not form a connected tree over all joints
    - The center joint is out of range
    """


class CheckpointError(HgctError):
    """Checkpoint handling failed.

    Raised when:
    - Checkpoint file is truncated or corrupted
    - Format version is unknown
    - Tensor names or shapes do not match the target model
    """


class NumericalError(HgctError):
    """A computation produced non-finite values.

    Raised when:
    - Debug numerics are on and a forward op yields NaN/Inf
    - Training loss becomes NaN
    """


class OracleError(NumericalError):
    """The finite-difference oracle could not evaluate the function."""


class UsageError(HgctError):
    """An API was called outside its contract.

    Raised when:
    - backward() is called on a non-scalar tensor
    - backward() is called on a tensor that does not require gradients
    """
