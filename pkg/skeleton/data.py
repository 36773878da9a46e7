"""
Skeleton Data Model and JSON-Lines Format
=========================================

One JSON object per line:

    {"label": 3, "coords": [[[[x, y, z] x V] x M] x T], "id": "optional"}

with a sidecar ``manifest.json`` next to the data file:

    {"V": 25, "C": 3, "classes": 8}

Coordinates are held in memory as [C, T, V, M] arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from common.exceptions import ParseError, SchemaError

MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class SkeletonSequence:
    """One labeled sample.

    Attributes:
        coords: [C, T, V, M] float array; absent bodies are all-zero slices
        label: class id >= 0
        sample_id: identifier used to align score files
    """

    coords: np.ndarray
    label: int
    sample_id: str = ""

    def __post_init__(self) -> None:
        """Validate rank, channel count and finiteness.

        Raises:
            SchemaError: If coords is not [C, T, V, M] with C in {2, 3} and T >= 1,
                contains NaN/Inf, or label is negative.
        """
        if self.coords.ndim != 4:
            raise SchemaError(f"coords must be [C, T, V, M], got shape {self.coords.shape}")
        if self.coords.shape[0] not in (2, 3):
            raise SchemaError(f"coordinate channels must be 2 or 3, got {self.coords.shape[0]}")
        if self.coords.shape[1] < 1:
            raise SchemaError("sequence has no frames")
        if not np.all(np.isfinite(self.coords)):
            raise SchemaError(f"sample {self.sample_id or '?'} contains NaN or Inf coordinates")
        if self.label < 0:
            raise SchemaError(f"label must be >= 0, got {self.label}")

    @property
    def channels(self) -> int:
        return self.coords.shape[0]

    @property
    def frames(self) -> int:
        return self.coords.shape[1]

    @property
    def num_joints(self) -> int:
        return self.coords.shape[2]

    @property
    def bodies(self) -> int:
        return self.coords.shape[3]

    def with_coords(self, coords: np.ndarray) -> SkeletonSequence:
        return SkeletonSequence(coords, self.label, self.sample_id)


@dataclass(frozen=True)
class DatasetSplit:
    """Immutable list of samples sharing V and C.

    Attributes:
        samples: the sequences
        class_count: K; every label is < K
        name: split name (train | test | ...)
        num_joints: V
        channels: C
    """

    samples: tuple[SkeletonSequence, ...]
    class_count: int
    name: str
    num_joints: int
    channels: int = 3

    def __post_init__(self) -> None:
        """Check the shared schema.

        Raises:
            SchemaError: If a sample disagrees on V or C, or a label is >= class_count.
        """
        for sample in self.samples:
            if sample.num_joints != self.num_joints:
                raise SchemaError(
                    f"sample {sample.sample_id} has {sample.num_joints} joints, split declares {self.num_joints}"
                )
            if sample.channels != self.channels:
                raise SchemaError(
                    f"sample {sample.sample_id} has {sample.channels} channels, split declares {self.channels}"
                )
            if sample.label >= self.class_count:
                raise SchemaError(f"sample {sample.sample_id} label {sample.label} >= classes {self.class_count}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)


def read_manifest(path: Path) -> dict[str, int]:
    """Read {"V", "C", "classes"}.

    Raises:
        SchemaError: If the file is unreadable or a key is missing.
    """
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return {"V": int(data["V"]), "C": int(data.get("C", 3)), "classes": int(data["classes"])}
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"cannot read dataset manifest {path}: {e}") from e


def _parse_record(record: Any, line_number: int, split_name: str) -> SkeletonSequence:
    if not isinstance(record, dict) or "label" not in record or "coords" not in record:
        raise ParseError(f"line {line_number}: expected an object with 'label' and 'coords'")
    try:
        label = int(record["label"])
        # [T, M, V, C] on disk -> [C, T, V, M] in memory
        coords = np.asarray(record["coords"], dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ParseError(f"line {line_number}: {e}") from e
    if coords.ndim != 4:
        raise ParseError(f"line {line_number}: coords must be nested [T][M][V][C], got rank {coords.ndim}")
    sample_id = str(record.get("id", f"{split_name}-{line_number}"))
    return SkeletonSequence(np.ascontiguousarray(coords.transpose(3, 0, 2, 1)), label, sample_id)


def load_jsonl(
    path: str | Path,
    manifest: dict[str, int] | None = None,
    num_joints: int | None = None,
    name: str | None = None,
) -> DatasetSplit:
    """Load a JSON-lines split.

    The schema comes from `manifest`, else from manifest.json beside the file,
    else it is inferred from the samples. `num_joints` (the declared graph's V)
    is checked against the schema.

    Raises:
        ParseError: If a line is not valid JSON or lacks required fields (message names the line).
        SchemaError: If a sample disagrees with the declared V, C or class count.
    """
    path = Path(path)
    split_name = name or path.stem
    if manifest is None and (path.parent / MANIFEST_FILE).exists():
        manifest = read_manifest(path.parent / MANIFEST_FILE)

    samples: list[SkeletonSequence] = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}: line {line_number}: malformed JSON ({e.msg})") from e
            samples.append(_parse_record(record, line_number, split_name))

    if manifest is not None:
        declared_v, channels, classes = manifest["V"], manifest["C"], manifest["classes"]
    elif samples:
        declared_v, channels = samples[0].num_joints, samples[0].channels
        classes = max(s.label for s in samples) + 1
    else:
        declared_v, channels, classes = num_joints or 0, 3, 0
    if num_joints is not None and declared_v != num_joints:
        raise SchemaError(f"dataset declares V={declared_v}, graph has V={num_joints}")
    return DatasetSplit(tuple(samples), classes, split_name, declared_v, channels)


def write_jsonl(split: DatasetSplit, path: str | Path, write_manifest: bool = True) -> Path:
    """Write a split (and its manifest.json) in the JSON-lines format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for sample in split.samples:
            record = {
                "id": sample.sample_id,
                "label": sample.label,
                "coords": sample.coords.transpose(1, 3, 2, 0).tolist(),
            }
            f.write(json.dumps(record, separators=(",", ":")))
            f.write("\n")
    if write_manifest:
        manifest = {"V": split.num_joints, "C": split.channels, "classes": split.class_count}
        (path.parent / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path
