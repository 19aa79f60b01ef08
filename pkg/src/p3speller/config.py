"""Pipeline configuration: one JSON document holding every tunable.

Unknown keys are rejected so typos cannot silently fall back to
defaults; the fully-resolved document and its hash are echoed into every
report for provenance.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .nn import TrainConfig


@dataclass(frozen=True)
class FilterConfig:
    order: int = 4
    ripple_db: float = 0.5
    low_hz: float = 0.1
    high_hz: float = 10.0
    zero_phase: bool = False


@dataclass(frozen=True)
class DecimationConfig:
    stride: int = 12
    strict: bool = True


@dataclass(frozen=True)
class SamplingConfig:
    subsets: int = 5
    seed: int = 0
    validation_fraction: float = 0.1


@dataclass(frozen=True)
class EnsembleConfig:
    threshold: float = 0.5


@dataclass(frozen=True)
class PipelineConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    decimation: DecimationConfig = field(default_factory=DecimationConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)

    def to_dict(self):
        return asdict(self)

    def hash(self):
        """Hash of the canonical JSON; identical configs hash identically."""
        canon = json.dumps(self.to_dict(), sort_keys=True,
                           separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


_SECTIONS = {"filter": FilterConfig, "decimation": DecimationConfig,
             "sampling": SamplingConfig, "train": TrainConfig,
             "ensemble": EnsembleConfig}


def config_from_dict(doc):
    """Build a PipelineConfig, rejecting unknown sections and keys."""
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = doc.get(name, {})
        valid = {f.name for f in fields(cls)}
        bad = set(section) - valid
        if bad:
            raise ValueError(f"unknown keys {sorted(bad)} in section {name!r} "
                             f"(valid: {sorted(valid)})")
        kwargs[name] = cls(**section)
    return PipelineConfig(**kwargs)


def load_config(path=None):
    if path is None:
        return PipelineConfig()
    with open(path) as fh:
        return config_from_dict(json.load(fh))
