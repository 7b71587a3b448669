"""Utterance manifests (JSON lines) and the stratified train/test split."""
from __future__ import annotations

from dataclasses import dataclass
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from services.media import atomic_write_text
from services.roi import BoundingBox

logger = logging.getLogger(__name__)

SPLITS = ("train", "test", "auto")
RECORD_KEYS = {"id", "label", "frames_dir", "audio_path", "mouth_box", "split", "speaker"}


class ManifestError(ValueError):
    def __init__(self, message: str, *, line: int | None = None, record_id: str | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line = line
        self.record_id = record_id


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    label: str
    frames_dir: Path | None = None
    audio_path: Path | None = None
    mouth_box: BoundingBox | None = None
    split: str = "auto"
    speaker: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("Utterance id must not be empty.")
        if not self.label:
            raise ValueError(f"Utterance {self.id} has an empty label.")
        if self.frames_dir is None and self.audio_path is None:
            raise ValueError(f"Utterance {self.id} lists neither frames_dir nor audio_path.")
        if self.split not in SPLITS:
            raise ValueError(f"Utterance {self.id} has unknown split {self.split!r}.")

    def has_modality(self, modality: str) -> bool:
        if modality == "visual":
            return self.frames_dir is not None
        return self.audio_path is not None


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.70
    seed: int = 0
    stratified: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("split.train_fraction must lie strictly between 0 and 1.")
        if self.seed < 0:
            raise ValueError("split.seed must be non-negative.")


def _resolve(base: Path, value: Any, field_name: str, line: int, record_id: str) -> Path | None:
    if value is None or value == "":
        return None
    if not isinstance(value, str):
        raise ManifestError(f"{field_name} of {record_id} must be a path string.", line=line, record_id=record_id)
    path = Path(value)
    return path if path.is_absolute() else base / path


def _parse_box(value: Any, line: int, record_id: str) -> BoundingBox | None:
    if value is None:
        return None
    try:
        if isinstance(value, dict):
            return BoundingBox(int(value["x0"]), int(value["y0"]), int(value["w"]), int(value["h"]))
        x0, y0, w, h = (int(v) for v in value)
        return BoundingBox(x0, y0, w, h)
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(
            f"mouth_box of {record_id} must be [x0, y0, w, h] with w, h >= 1 ({exc}).",
            line=line,
            record_id=record_id,
        ) from exc


def parse_record(raw: dict[str, Any], base_dir: Path, line: int) -> UtteranceRecord:
    if not isinstance(raw, dict):
        raise ManifestError("each manifest line must be a JSON object.", line=line)
    record_id = str(raw.get("id") or "").strip()
    if not record_id:
        raise ManifestError("record is missing an id.", line=line)
    unknown = set(raw) - RECORD_KEYS
    if unknown:
        logger.warning("line %d: ignoring unknown keys %s", line, ", ".join(sorted(unknown)))
    try:
        return UtteranceRecord(
            id=record_id,
            label=str(raw.get("label") or "").strip(),
            frames_dir=_resolve(base_dir, raw.get("frames_dir"), "frames_dir", line, record_id),
            audio_path=_resolve(base_dir, raw.get("audio_path"), "audio_path", line, record_id),
            mouth_box=_parse_box(raw.get("mouth_box"), line, record_id),
            split=str(raw.get("split") or "auto"),
            speaker=(str(raw["speaker"]) if raw.get("speaker") is not None else None),
        )
    except ManifestError:
        raise
    except ValueError as exc:
        raise ManifestError(str(exc), line=line, record_id=record_id) from exc


def find_missing_media(records: Iterable[UtteranceRecord]) -> dict[str, list[Path]]:
    missing: dict[str, list[Path]] = {}
    for record in records:
        gone = []
        if record.frames_dir is not None and not record.frames_dir.is_dir():
            gone.append(record.frames_dir)
        if record.audio_path is not None and not record.audio_path.is_file():
            gone.append(record.audio_path)
        if gone:
            missing[record.id] = gone
    return missing


def load_manifest(path: Path | str) -> list[UtteranceRecord]:
    source = Path(path)
    base_dir = source.parent
    records: list[UtteranceRecord] = []
    seen: dict[str, int] = {}
    with source.open(encoding="utf-8") as handle:
        for line_no, text in enumerate(handle, start=1):
            if not text.strip():
                continue
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON ({exc.msg}).", line=line_no) from exc
            record = parse_record(raw, base_dir, line_no)
            if record.id in seen:
                raise ManifestError(
                    f"duplicate id {record.id!r} (first seen on line {seen[record.id]}).",
                    line=line_no,
                    record_id=record.id,
                )
            seen[record.id] = line_no
            records.append(record)
    for record_id, paths in find_missing_media(records).items():
        logger.warning("%s: missing %s", record_id, ", ".join(str(p) for p in paths))
    logger.info("Loaded %d records from %s", len(records), source)
    return records


def _relative(path: Path | None, base: Path) -> str | None:
    if path is None:
        return None
    try:
        return path.relative_to(base).as_posix()
    except ValueError:
        return str(path)


def record_to_json(record: UtteranceRecord, base_dir: Path) -> dict[str, Any]:
    data: dict[str, Any] = {"id": record.id, "label": record.label}
    if record.frames_dir is not None:
        data["frames_dir"] = _relative(record.frames_dir, base_dir)
    if record.audio_path is not None:
        data["audio_path"] = _relative(record.audio_path, base_dir)
    if record.mouth_box is not None:
        data["mouth_box"] = record.mouth_box.as_list()
    data["split"] = record.split
    if record.speaker is not None:
        data["speaker"] = record.speaker
    return data


def write_manifest(path: Path | str, records: Iterable[UtteranceRecord]) -> None:
    target = Path(path)
    base_dir = target.parent
    lines = [json.dumps(record_to_json(r, base_dir), sort_keys=False) for r in records]
    atomic_write_text(target, "".join(line + "\n" for line in lines))


def class_labels(records: Iterable[UtteranceRecord]) -> list[str]:
    """Distinct labels in first-appearance order."""
    return list(dict.fromkeys(r.label for r in records))


def _train_count(n: int, fraction: float) -> int:
    # the epsilon keeps 10 * 0.7 at 7 despite binary rounding
    return min(n - 1, max(1, math.floor(n * fraction + 1e-9)))


def split(
    records: list[UtteranceRecord],
    cfg: SplitConfig,
) -> tuple[list[UtteranceRecord], list[UtteranceRecord]]:
    """Seeded per-class split; explicit train/test assignments are honored as-is.

    Both halves keep manifest order.
    """
    rng = np.random.default_rng(cfg.seed)
    to_train: set[int] = set()
    auto = [pos for pos, r in enumerate(records) if r.split == "auto"]
    to_train.update(pos for pos, r in enumerate(records) if r.split == "train")

    if cfg.stratified:
        groups: dict[str, list[int]] = {}
        for pos in auto:
            groups.setdefault(records[pos].label, []).append(pos)
        for label in sorted(groups):
            members = groups[label]
            if len(members) < 2:
                raise ValueError(
                    f"Class {label!r} has {len(members)} record(s); a stratified split needs at least 2."
                )
            shuffled = rng.permutation(len(members))
            take = _train_count(len(members), cfg.train_fraction)
            to_train.update(members[i] for i in shuffled[:take])
    elif auto:
        shuffled = rng.permutation(len(auto))
        take = math.floor(len(auto) * cfg.train_fraction + 1e-9)
        to_train.update(auto[i] for i in shuffled[:take])

    train = [r for pos, r in enumerate(records) if pos in to_train]
    test = [r for pos, r in enumerate(records) if pos not in to_train]
    return train, test
