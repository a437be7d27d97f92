"""Run configuration. Defaults: anchor window W = 2, freeze threshold alpha = 5%."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .attention import MASK_MODES


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    objects: int = 2
    frames: int = 8
    grid_h: int = 16
    grid_w: int = 16
    steps: int = 10
    window: int = 2
    alpha: float = 0.05
    mode: str = "neg_inf"
    dynamic: bool = True
    channels: int = 8
    noise: float = 1.0
    converge_step: int = 3
    heads: int = 4
    head_dim: int = 8
    leak_trials: int = 1
    literal_identity_v2v: bool = False
    literal_t2v: bool = False
    disjoint: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.window < 1:
            raise ValueError(f"window W must be >= 1, got {self.window}")
        if self.mode not in MASK_MODES:
            raise ValueError(f"unknown mask mode {self.mode!r}")
        for name in ("objects", "frames", "grid_h", "grid_w", "steps", "heads", "head_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def load_config(path) -> dict:
    """Raw key/value pairs from a JSON config file (validated by the caller)."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc
