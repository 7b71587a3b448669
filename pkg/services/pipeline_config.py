from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
import logging
from pathlib import Path
from typing import Any

from services.dataset import SplitConfig
from services.media import atomic_write_text
from services.mfcc import MfccConfig
from services.roi import RoiConfig
from services.zernike import ZernikeConfig

logger = logging.getLogger(__name__)

SECTIONS = ("roi", "zernike", "mfcc", "pca", "split", "paths")


@dataclass(frozen=True)
class PcaConfig:
    components: int | str = "all"

    def __post_init__(self) -> None:
        if isinstance(self.components, bool):
            raise ValueError("pca.components must be 'all' or a non-negative integer.")
        if isinstance(self.components, str):
            if self.components != "all":
                raise ValueError("pca.components must be 'all' or a non-negative integer.")
        elif int(self.components) < 0:
            raise ValueError("pca.components must be 'all' or a non-negative integer.")


@dataclass(frozen=True)
class PathsConfig:
    out_dir: str = "out"
    masks_dir: str | None = None


@dataclass(frozen=True)
class PipelineConfig:
    roi: RoiConfig = field(default_factory=RoiConfig)
    zernike: ZernikeConfig = field(default_factory=ZernikeConfig)
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    pca: PcaConfig = field(default_factory=PcaConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    workers: int = 0

    def __post_init__(self) -> None:
        if self.workers < 0:
            raise ValueError("workers must be zero (all CPUs) or a positive count.")


_SECTION_TYPES = {
    "roi": RoiConfig,
    "zernike": ZernikeConfig,
    "mfcc": MfccConfig,
    "pca": PcaConfig,
    "split": SplitConfig,
    "paths": PathsConfig,
}


_OPTIONAL_INT_KEYS = {"fft_size"}
_OPTIONAL_STR_KEYS = {"masks_dir"}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    where = f"{section}.{key}"
    if key == "indices":
        try:
            return tuple((int(m), int(n)) for m, n in value)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{where} must be a list of [m, n] pairs.") from exc
    if key == "components":
        if value == "all" or _is_int(value):
            return value
        raise ValueError(f"{where} must be 'all' or a non-negative integer.")
    if key in _OPTIONAL_INT_KEYS:
        if value is None or _is_int(value):
            return value
        raise ValueError(f"{where} must be an integer or null.")
    if key in _OPTIONAL_STR_KEYS:
        if value is None or isinstance(value, str):
            return value
        raise ValueError(f"{where} must be a string or null.")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValueError(f"{where} must be true or false.")
        return value
    if isinstance(default, int):
        if not _is_int(value):
            raise ValueError(f"{where} must be an integer.")
        return value
    if isinstance(default, float):
        if not (_is_int(value) or isinstance(value, float)):
            raise ValueError(f"{where} must be a number.")
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"{where} must be a string.")
    return value


def _build_section(name: str, raw: Any) -> Any:
    cls = _SECTION_TYPES[name]
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ValueError(f"Config section '{name}' must be an object.")
    defaults = cls()
    known = {f.name for f in fields(cls)}
    values = {}
    for key, value in raw.items():
        if key not in known:
            logger.warning("Ignoring unknown config key %s.%s", name, key)
            continue
        values[key] = _coerce(name, key, value, getattr(defaults, key))
    try:
        return cls(**values)
    except TypeError as exc:
        raise ValueError(f"Config section '{name}' is invalid: {exc}") from exc


def config_from_dict(raw: dict[str, Any]) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ValueError("Pipeline config must be a JSON object.")
    for key in raw:
        if key not in SECTIONS and key != "workers":
            logger.warning("Ignoring unknown config section %s", key)
    workers = raw.get("workers", 1)
    if not _is_int(workers):
        raise ValueError("workers must be an integer.")
    sections = {name: _build_section(name, raw.get(name)) for name in SECTIONS}
    return PipelineConfig(workers=workers, **sections)


def load_pipeline_config(path: Path | None) -> PipelineConfig:
    """Defaults when ``path`` is None; a missing or malformed file is an error."""
    if path is None:
        return PipelineConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: config is not valid JSON ({exc.msg}, line {exc.lineno}).") from exc
    logger.debug("Loaded pipeline config from %s", path)
    return config_from_dict(raw)


def config_to_dict(cfg: PipelineConfig) -> dict[str, Any]:
    data: dict[str, Any] = {}
    for name in SECTIONS:
        section = asdict(getattr(cfg, name))
        if name == "zernike":
            section["indices"] = [list(pair) for pair in section["indices"]]
        data[name] = section
    data["workers"] = cfg.workers
    return data


def render_config(cfg: PipelineConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


def save_pipeline_config(path: Path, cfg: PipelineConfig) -> None:
    atomic_write_text(path, render_config(cfg))


def with_overrides(
    cfg: PipelineConfig,
    *,
    seed: int | None = None,
    components: int | str | None = None,
    workers: int | None = None,
) -> PipelineConfig:
    if seed is not None:
        cfg = replace(cfg, split=replace(cfg.split, seed=seed))
    if components is not None:
        cfg = replace(cfg, pca=PcaConfig(components))
    if workers is not None:
        cfg = replace(cfg, workers=workers)
    return cfg
