import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixtures_def import gold_dataset, train_dataset  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def gold():
    return gold_dataset()


@pytest.fixture(scope="session")
def train():
    return train_dataset()


class FakeEmbedder:
    """Gateway stand-in with preset text -> vector mappings for cosine tests."""

    def __init__(self, mapping: dict, default=None, model: str = "fake-embed"):
        self.mapping = dict(mapping)
        self.default = default
        self.model = model
        self.chat_model = "fake-chat"

    def embed(self, texts, model=None):
        from ontoforge.gateway import EmbeddingVector

        out = []
        for text in texts:
            values = self.mapping.get(text, self.default)
            if values is None:
                raise KeyError(f"no preset vector for {text!r}")
            out.append(EmbeddingVector(tuple(float(v) for v in values), model or self.model))
        return out


@pytest.fixture
def fake_embedder():
    return FakeEmbedder
