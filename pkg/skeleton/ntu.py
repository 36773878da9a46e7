"""
NTU RGB+D .skeleton Reader
==========================

Text layout (whitespace separated, one record per line):

    <frame count>
    per frame:
        <body count>
        per body:
            <body metadata: id, clipped edges, hand states, lean, tracking state>
            <joint count>
            per joint: x y z depthX depthY colorX colorY orientation(4) trackingState

Only the camera-space x, y, z of each joint is kept. The action label comes
from the "A###" token of the file name (action 1 is label 0).
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from common.exceptions import FormatError, ParseError
from skeleton.data import SkeletonSequence

NTU_JOINTS = 25
_ACTION_TOKEN = re.compile(r"A(\d{3})")


def label_from_filename(path: str | Path) -> int:
    """Zero-based action label, e.g. S001C001P001R001A043.skeleton -> 42.

    Raises:
        ParseError: If the name carries no A### token.
    """
    match = _ACTION_TOKEN.search(Path(path).name)
    if match is None:
        raise ParseError(f"{path}: file name has no A### action token")
    return int(match.group(1)) - 1


class _LineReader:
    def __init__(self, path: Path) -> None:
        self.path = path
        self.lines = path.read_text(encoding="utf-8").splitlines()
        self.position = 0

    def next_fields(self, what: str) -> list[str]:
        while self.position < len(self.lines):
            fields = self.lines[self.position].split()
            self.position += 1
            if fields:
                return fields
        raise ParseError(f"{self.path}: truncated file while reading {what} (line {self.position + 1})")

    def next_int(self, what: str) -> int:
        fields = self.next_fields(what)
        try:
            return int(fields[0])
        except ValueError as e:
            raise ParseError(f"{self.path}: line {self.position}: expected {what}, got {fields[0]!r}") from e


def parse_ntu_skeleton(path: str | Path) -> SkeletonSequence:
    """Read one .skeleton file into coords [3, T, 25, M].

    M is the largest body count observed in any frame (at least 1); bodies
    missing in a frame are zero-filled.

    Raises:
        ParseError: If the file is truncated, malformed or declares zero frames.
        FormatError: If a body declares a joint count other than 25.
    """
    path = Path(path)
    label = label_from_filename(path)
    reader = _LineReader(path)
    num_frames = reader.next_int("frame count")
    if num_frames <= 0:
        raise ParseError(f"{path}: file declares {num_frames} frames")

    frames: list[list[np.ndarray]] = []
    for t in range(num_frames):
        num_bodies = reader.next_int(f"body count of frame {t}")
        bodies: list[np.ndarray] = []
        for _ in range(num_bodies):
            reader.next_fields("body metadata")
            num_joints = reader.next_int("joint count")
            if num_joints != NTU_JOINTS:
                raise FormatError(f"{path}: frame {t} body declares {num_joints} joints, expected {NTU_JOINTS}")
            joints = np.zeros((NTU_JOINTS, 3), dtype=np.float64)
            for v in range(NTU_JOINTS):
                fields = reader.next_fields(f"joint {v} of frame {t}")
                try:
                    joints[v] = [float(x) for x in fields[:3]]
                except ValueError as e:
                    raise ParseError(f"{path}: line {reader.position}: bad joint record") from e
            bodies.append(joints)
        frames.append(bodies)

    max_bodies = max(1, max(len(bodies) for bodies in frames))
    coords = np.zeros((3, num_frames, NTU_JOINTS, max_bodies), dtype=np.float64)
    for t, bodies in enumerate(frames):
        for m, joints in enumerate(bodies):
            coords[:, t, :, m] = joints.T
    return SkeletonSequence(coords, label, path.stem)
