from pathlib import Path

import pytest

from kpx.corpus import Argument, Judgment

REPO = Path(__file__).resolve().parent.parent
MIRROR_CORPUS = REPO / "data" / "echr_mirror.json"
MIRROR_EMBEDDINGS = REPO / "data" / "echr_mirror_embeddings.jsonl"


def make_judgment(jid: str, premise_texts, conclusion_texts=()) -> Judgment:
    premises = tuple(
        Argument.build(id=f"{jid}_p{i:03d}", judgment_id=jid, text=text)
        for i, text in enumerate(premise_texts, start=1)
    )
    conclusions = tuple(
        Argument.build(id=f"{jid}_c{i:03d}", judgment_id=jid, text=text)
        for i, text in enumerate(conclusion_texts, start=1)
    )
    return Judgment(id=jid, name=f"{jid} fixture", premises=premises,
                    conclusions=conclusions)


@pytest.fixture(scope="session")
def mirror_paths():
    assert MIRROR_CORPUS.exists() and MIRROR_EMBEDDINGS.exists(), \
        "run scripts/build_mirror.py first"
    return MIRROR_CORPUS, MIRROR_EMBEDDINGS


@pytest.fixture(scope="session")
def mirror_corpus(mirror_paths):
    from kpx.corpus import load_corpus
    return load_corpus(mirror_paths[0])


@pytest.fixture(scope="session")
def mirror_store(mirror_paths):
    from kpx.embeddings import load_embeddings
    return load_embeddings(mirror_paths[1])
