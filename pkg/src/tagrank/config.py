"""Experiment configuration: one self-describing dataclass, JSON round-trip,
and the defaults used throughout (C=0.01, m=50, k=10, 50-occurrence tags,
6-image users, 0.8 re-ranking threshold)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .embeddings import EmbeddingConfig


def parse_n_tags(value: str | int | None) -> int | None:
    """Accept an int, a decimal string, or "inf"/None for unbounded."""
    if value is None:
        return None
    if isinstance(value, int):
        return value
    text = str(value).strip().lower()
    if text in ("inf", "infinity", "all", "none"):
        return None
    return int(text)


def n_tags_label(n: int | None) -> str:
    return "inf" if n is None else str(n)


@dataclass
class ExperimentConfig:
    seed: int = 7
    min_occurrences: int = 50
    min_user_images: int = 6
    m: int = 50
    C: float = 0.01
    k: int = 10
    n_tags: tuple[int | None, ...] = (None,)
    mode: str = "combined"
    threshold: float = 0.8
    min_cooccur: int = 2
    solver_epochs: int = 20
    exclude_same_user: bool = False
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)

    def to_json(self) -> str:
        data = asdict(self)
        data["n_tags"] = [n_tags_label(n) for n in self.n_tags]
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "embedding" in data:
            data["embedding"] = EmbeddingConfig(**data["embedding"])
        if "n_tags" in data:
            raw = data["n_tags"]
            if not isinstance(raw, (list, tuple)):
                raw = [raw]
            data["n_tags"] = tuple(parse_n_tags(v) for v in raw)
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        """Replace the given fields, ignoring None values (unset CLI flags)."""
        updates = {k: v for k, v in kwargs.items() if v is not None}
        emb = {
            k: updates.pop(k)
            for k in list(updates)
            if k in EmbeddingConfig.__dataclass_fields__
            and k not in ExperimentConfig.__dataclass_fields__
        }
        cfg = replace(self, **updates) if updates else self
        if emb:
            cfg = replace(cfg, embedding=replace(cfg.embedding, **emb))
        return cfg
