import json

import numpy as np
import pytest

from tagrank.corpus import Corpus, Session, TagVocabulary


def write_records(path, records):
    """records: iterable of (image_id, user_id, tags, features) tuples."""
    with open(path, "w", encoding="utf-8") as fh:
        for image_id, user_id, tags, features in records:
            fh.write(
                json.dumps(
                    {
                        "image_id": image_id,
                        "user_id": user_id,
                        "tags": tags,
                        "features": features,
                    }
                )
                + "\n"
            )


def make_session(session_id, tags, features=None, user_id="u", image_id=None):
    return Session(
        session_id=session_id,
        image_id=image_id or f"img{session_id}",
        user_id=user_id,
        tags=list(tags),
        features=np.asarray(features if features is not None else [0.0], dtype=float),
    )


def make_corpus(sessions, n_tags):
    """Assemble a Corpus around pre-built sessions with a trivial vocabulary."""
    names = [f"t{i}" for i in range(n_tags)]
    counts = [0] * n_tags
    for s in sessions:
        for t in set(s.tags):
            counts[t] += 1
    users = {}
    for s in sessions:
        users.setdefault(s.user_id, []).append(s.session_id)
    vocab = TagVocabulary(
        tag_to_id={n: i for i, n in enumerate(names)},
        id_to_tag=names,
        occurrence_count=counts,
    )
    dim = sessions[0].features.shape[0]
    return Corpus(sessions=list(sessions), vocabulary=vocab, users=users, feature_dim=dim)


@pytest.fixture
def tmp_records(tmp_path):
    def _write(records, name="records.jsonl"):
        path = tmp_path / name
        write_records(path, records)
        return path

    return _write
