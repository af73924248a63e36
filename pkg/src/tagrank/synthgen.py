"""Synthetic corpus generation with known per-user ranking ground truth.

Each user owns a latent weight vector and each tag a latent embedding; a
user's tag list for an image is the noisy top scoring slice of the vocabulary,
and image features are a projection of the chosen tags' latents. Visual
neighbors therefore genuinely share tags, which the candidate-mining stage
relies on.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class SynthSpec:
    n_users: int = 20
    images_per_user: int = 40
    vocab_size: int = 300
    feature_dim: int = 50
    tags_per_image: int = 8
    latent_dim: int = 8
    noise: float = 0.0  # stddev of the per-(image, tag) score jitter
    seed: int = 0

    def validate(self) -> None:
        for name in (
            "n_users",
            "images_per_user",
            "vocab_size",
            "feature_dim",
            "tags_per_image",
            "latent_dim",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.noise < 0.0:
            raise ValueError("noise must be >= 0")
        if self.vocab_size < self.tags_per_image:
            raise ValueError("vocabulary too small for tags_per_image")


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = rng.normal(size=(n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def generate(
    spec: SynthSpec, records_path: str | Path, truth_path: str | Path
) -> None:
    """Write a raw record file and the latent-truth CSV it was drawn from.

    The truth CSV holds one row per user: user id followed by the latent
    weight components, then one row per tag: tag name followed by its latent
    components (prefixed 'user'/'tag' in the first column kind marker).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    tag_latents = _unit_rows(rng, spec.vocab_size, spec.latent_dim)
    user_latents = _unit_rows(rng, spec.n_users, spec.latent_dim)
    # orthonormal embedding of the latent space into feature space
    proj, _ = np.linalg.qr(rng.normal(size=(spec.feature_dim, spec.latent_dim)))
    proj = proj.T  # (latent_dim, feature_dim)
    feature_jitter = 0.05 / np.sqrt(spec.feature_dim)

    width = len(str(spec.vocab_size - 1))
    tag_names = [f"tag{i:0{width}d}" for i in range(spec.vocab_size)]

    with open(records_path, "w", encoding="utf-8") as fh:
        for u in range(spec.n_users):
            user_id = f"user{u:03d}"
            for j in range(spec.images_per_user):
                jitter = rng.normal(0.0, 1.0, spec.vocab_size) * spec.noise
                scores = tag_latents @ user_latents[u] + jitter
                top = np.argsort(-scores, kind="stable")[: spec.tags_per_image]
                feat = tag_latents[top].mean(axis=0) @ proj
                feat = feat + rng.normal(0.0, feature_jitter, spec.feature_dim)
                fh.write(
                    json.dumps(
                        {
                            "image_id": f"{user_id}_img{j:03d}",
                            "user_id": user_id,
                            "tags": [tag_names[t] for t in top],
                            "features": [float(x) for x in feat],
                        }
                    )
                    + "\n"
                )

    with open(truth_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "id"] + [f"c{i}" for i in range(spec.latent_dim)])
        for u in range(spec.n_users):
            writer.writerow(
                ["user", f"user{u:03d}"] + [repr(float(x)) for x in user_latents[u]]
            )
        for t in range(spec.vocab_size):
            writer.writerow(
                ["tag", tag_names[t]] + [repr(float(x)) for x in tag_latents[t]]
            )


def load_truth(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Read back (user latents, tag latents) keyed by id/name."""
    users: dict[str, np.ndarray] = {}
    tags: dict[str, np.ndarray] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        for row in reader:
            vec = np.asarray([float(x) for x in row[2:]])
            if row[0] == "user":
                users[row[1]] = vec
            else:
                tags[row[1]] = vec
    return users, tags
