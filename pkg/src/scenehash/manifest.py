"""JSON-lines dataset manifests and rotation augmentation.

One record per line: {"path", "video_id", "frame_idx", "scene_label",
"rotation"}. ``scene_label`` may be null for unlabeled diagnosis video
(clustering assigns labels); ``rotation`` defaults to 0 and is applied to
the canonical square at load time, so augmented copies need no extra
image files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import DataError
from .util import atomic_write_text


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    video_id: str
    frame_idx: int
    scene_label: int | None = None
    rotation: int = 0

    def to_dict(self) -> dict:
        out = {
            "path": self.path,
            "video_id": self.video_id,
            "frame_idx": self.frame_idx,
            "scene_label": self.scene_label,
        }
        if self.rotation:
            out["rotation"] = self.rotation
        return out


def load_manifest(path) -> list[ManifestRecord]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
            records.append(
                ManifestRecord(
                    path=raw["path"],
                    video_id=raw["video_id"],
                    frame_idx=int(raw["frame_idx"]),
                    scene_label=None if raw.get("scene_label") is None else int(raw["scene_label"]),
                    rotation=int(raw.get("rotation", 0)),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad manifest record: {exc}") from exc
    _check_unique(records, path)
    return records


def _check_unique(records, source=""):
    seen = set()
    for rec in records:
        key = (rec.video_id, rec.frame_idx, rec.rotation)
        if key in seen:
            raise DataError(
                f"{source}: duplicate frame {rec.frame_idx} (rotation {rec.rotation}) "
                f"in video {rec.video_id!r}"
            )
        seen.add(key)


def save_manifest(records, path):
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in records]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_image_bytes(record: ManifestRecord, base_dir) -> bytes:
    """Record paths are resolved relative to the manifest's directory."""
    p = Path(record.path)
    if not p.is_absolute():
        p = Path(base_dir) / p
    try:
        return p.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read image {p}: {exc}") from exc


def augment_rotations(records, angles) -> list[ManifestRecord]:
    """Duplicate every record once per angle; copies keep their scene label.

    Only right angles are accepted: anything else would resample pixels.
    """
    angles = list(angles)
    if not angles:
        raise DataError("augmentation needs at least one angle")
    for angle in angles:
        if angle % 90 != 0:
            raise DataError(f"rotation angle {angle} is not a multiple of 90 degrees")
    out = []
    for rec in records:
        for angle in angles:
            out.append(replace(rec, rotation=(rec.rotation + angle) % 360))
    return out
