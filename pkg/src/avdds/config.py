"""Config document loading: edit defaults plus a job list.

The document is YAML (JSON is valid YAML) with two sections: ``edit`` holding
:class:`EditConfig` overrides and ``jobs`` listing clips to edit. Unknown keys
are rejected with the offending path in the message, and loading an emitted
config round-trips exactly. See docs/config.md for the schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .editor import EditConfig
from .exceptions import ConfigurationError

_JOB_KEYS = {"clip", "y_trg", "y_src", "out", "fps", "sample_rate", "target_object", "overrides"}


@dataclass
class JobSpec:
    clip: str
    y_trg: str
    out: str
    y_src: Optional[str] = None
    fps: float = 4.0
    sample_rate: int = 16000
    target_object: Optional[str] = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.y_trg:
            raise ConfigurationError("job y_trg must be nonempty")
        if self.fps <= 0:
            raise ConfigurationError("job fps must be > 0")
        if self.sample_rate <= 0:
            raise ConfigurationError("job sample_rate must be > 0")

    def config(self, base: EditConfig) -> EditConfig:
        """Resolve this job's effective edit config on top of the base."""
        merged = dict(base.to_dict())
        merged.update(self.overrides)
        return EditConfig.from_mapping(merged, path="job.overrides")


def _parse_job(raw: dict, index: int, config_dir: Path) -> JobSpec:
    path = f"jobs[{index}]"
    unknown = set(raw) - _JOB_KEYS
    if unknown:
        raise ConfigurationError(f"{path}.{sorted(unknown)[0]}: unknown key")
    for required in ("clip", "y_trg", "out"):
        if required not in raw:
            raise ConfigurationError(f"{path}.{required}: missing required key")
    clip = Path(raw["clip"])
    if not clip.is_absolute():
        clip = config_dir / clip
    if not clip.exists():
        raise ConfigurationError(f"{path}.clip: path does not exist: {clip}")
    overrides = raw.get("overrides", {})
    if not isinstance(overrides, dict):
        raise ConfigurationError(f"{path}.overrides: must be a mapping")
    # validate overrides eagerly so bad jobs fail at load time
    EditConfig.from_mapping({**EditConfig().to_dict(), **overrides}, path=f"{path}.overrides")
    out = Path(raw["out"])
    if not out.is_absolute():
        out = config_dir / out
    return JobSpec(
        clip=str(clip),
        y_trg=str(raw["y_trg"]),
        y_src=raw.get("y_src"),
        out=str(out),
        fps=float(raw.get("fps", 4.0)),
        sample_rate=int(raw.get("sample_rate", 16000)),
        target_object=raw.get("target_object"),
        overrides=dict(overrides),
    )


def load_config(path) -> tuple[EditConfig, list[JobSpec]]:
    """Parse a config document into the base EditConfig plus job specs."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    unknown = set(raw) - {"edit", "jobs"}
    if unknown:
        raise ConfigurationError(f"{sorted(unknown)[0]}: unknown top-level key")
    edit_section = raw.get("edit", {})
    if not isinstance(edit_section, dict):
        raise ConfigurationError("edit: must be a mapping")
    config = EditConfig.from_mapping(edit_section, path="edit")
    jobs_section = raw.get("jobs", [])
    if not isinstance(jobs_section, list):
        raise ConfigurationError("jobs: must be a list")
    jobs = [_parse_job(j, i, path.parent.resolve()) for i, j in enumerate(jobs_section)]
    return config, jobs


def emit_config(config: EditConfig, jobs: Optional[list[JobSpec]] = None) -> dict:
    doc: dict = {"edit": config.to_dict()}
    if jobs:
        doc["jobs"] = [
            {k: v for k, v in {
                "clip": j.clip, "y_trg": j.y_trg, "y_src": j.y_src, "out": j.out,
                "fps": j.fps, "sample_rate": j.sample_rate,
                "target_object": j.target_object,
                "overrides": j.overrides or None,
            }.items() if v is not None}
            for j in jobs
        ]
    return doc


def dump_config(config: EditConfig, path, jobs: Optional[list[JobSpec]] = None) -> None:
    Path(path).write_text(yaml.safe_dump(emit_config(config, jobs), sort_keys=False))
