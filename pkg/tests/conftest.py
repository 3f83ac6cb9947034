import json

import numpy as np
import pytest

from multires.embedding.stores import ContextFreeStore, write_context_free_store


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row))
            fh.write("\n")


@pytest.fixture
def cli_workspace(tmp_path):
    """Tiny end-to-end fixture: corpus, pairs, one embedding store, spec, run config."""
    n_docs = 8
    words = [f"item{i}" for i in range(n_docs)]
    extra = [f"tag{i}" for i in range(n_docs)]
    docs = [
        {"id": f"doc{i}", "text": f"common {words[i]} {extra[i]}"} for i in range(n_docs)
    ]
    pairs = [
        {"query_id": f"query{i}", "query_text": f"{words[i]} {extra[i]}", "positive_doc_id": f"doc{i}"}
        for i in range(n_docs)
    ]
    corpus_path = tmp_path / "corpus.jsonl"
    pairs_path = tmp_path / "pairs.jsonl"
    _write_jsonl(corpus_path, docs)
    _write_jsonl(pairs_path, pairs)

    vocab = ["common"] + words + extra
    gen = np.random.default_rng(99)
    store = ContextFreeStore(
        model_id="toy",
        num_layers=2,
        dim=4,
        vectors={tok: gen.normal(size=(2, 4)).astype(np.float32) for tok in vocab},
    )
    store_path = tmp_path / "toy.mre"
    write_context_free_store(str(store_path), store)

    spec_path = tmp_path / "spec.cfg"
    spec_path.write_text(
        "ensemble.aggregator=concatenate\n"
        "ensemble.weights=1\n"
        "mixture.1.model=toy\n"
        "mixture.1.weights=0.5,0.5\n"
        "mixture.1.aggregator=sum\n"
        "mixture.1.use_idf=true\n"
    )

    config_path = tmp_path / "run.cfg"
    config_path.write_text(
        f"corpus={corpus_path}\n"
        f"qa_pairs={pairs_path}\n"
        f"stores=toy:{store_path}\n"
        f"spec={spec_path}\n"
        f"checkpoint={tmp_path / 'model.crr'}\n"
        f"report={tmp_path / 'report.json'}\n"
        f"loss_trace={tmp_path / 'loss.csv'}\n"
        f"index={tmp_path / 'index.mre'}\n"
        "seed=5\n"
        "iterations=4\n"
        "batch_size=4\n"
        "lr=0.01\n"
        "weight_decay=0.0\n"
        "margin=1.0\n"
        "ws=3\n"
        "sf=0.05\n"
        "depth=1\n"
        "mining=batch_hard\n"
        "k=1,3\n"
    )
    return {
        "dir": tmp_path,
        "corpus": corpus_path,
        "pairs": pairs_path,
        "store": store_path,
        "spec": spec_path,
        "config": config_path,
        "checkpoint": tmp_path / "model.crr",
        "report": tmp_path / "report.json",
        "loss_trace": tmp_path / "loss.csv",
        "index": tmp_path / "index.mre",
    }
