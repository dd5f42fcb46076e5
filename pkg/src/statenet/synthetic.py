"""Synthetic HMM corpora with Gaussian emissions in embedding space.

Each hidden state owns a cluster mean and a private slice of the vocabulary;
one state emits genuine function words so composition analyses have signal.
Used by the test suite, the demos, and anyone who wants a self-contained
end-to-end run without a pretrained model.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus_io import (
    Corpus,
    EmbeddingStore,
    TagLayer,
    corpus_from_surfaces,
    save_corpus,
    save_embeddings,
    save_tags,
)

__all__ = ["HmmDataset", "make_hmm_dataset", "write_dataset"]

FUNCTION_STATE_WORDS = ("the", "of", "to", "and", "a", "in", "is", "that")


@dataclass(frozen=True)
class HmmDataset:
    corpus: Corpus
    store: EmbeddingStore
    gold: TagLayer  # true hidden state per token, tags "S0".."S{K-1}"
    means: np.ndarray  # (K, dim)
    transitions: np.ndarray  # (K, K) row-stochastic


def make_hmm_dataset(
    n_sentences: int,
    length_range: tuple[int, int] = (8, 20),
    n_states: int = 5,
    dim: int = 16,
    separation: float = 4.0,
    scale: float = 1.5,
    words_per_state: int = 8,
    seed: int = 0,
) -> HmmDataset:
    """Sample sentences from a K-state HMM with Gaussian emissions.

    ``separation`` counts in noise standard deviations (pairwise mean distance
    is exactly ``separation * scale``); ``scale`` sets the absolute units. The
    default puts cluster means well outside the unit ball, which leaves room
    for low-norm state embeddings whose emissions dominate their own pairwise
    transition potentials.
    """
    if n_states > dim:
        raise ValueError(f"need dim >= n_states, got {dim} < {n_states}")
    rng = np.random.default_rng(seed)
    # centered axis simplex: every pairwise distance == separation * scale,
    # and the mixture mean sits at the origin
    means = np.zeros((n_states, dim))
    for k in range(n_states):
        means[k, k] = separation * scale / np.sqrt(2.0)
    means -= means.mean(axis=0, keepdims=True)

    trans = rng.uniform(0.2, 1.0, (n_states, n_states))
    trans += np.eye(n_states)  # mild self-transition preference
    trans /= trans.sum(axis=1, keepdims=True)
    initial = np.full(n_states, 1.0 / n_states)

    words = []
    for k in range(n_states):
        if k == 0:
            row = list(FUNCTION_STATE_WORDS[:words_per_state])
            row += [f"s{k}w{j}" for j in range(len(row), words_per_state)]
        else:
            row = [f"s{k}w{j}" for j in range(words_per_state)]
        words.append(row)

    sentences = []
    states_per_sentence = []
    embeddings = []
    lo, hi = length_range
    for _ in range(n_sentences):
        T = int(rng.integers(lo, hi + 1))
        states = np.empty(T, dtype=np.intp)
        states[0] = rng.choice(n_states, p=initial)
        for t in range(1, T):
            states[t] = rng.choice(n_states, p=trans[states[t - 1]])
        surfaces = [words[z][int(rng.integers(0, words_per_state))] for z in states]
        emb = means[states] + scale * rng.standard_normal((T, dim))
        sentences.append(surfaces)
        states_per_sentence.append(states)
        embeddings.append(emb)

    corpus = corpus_from_surfaces(sentences)
    store = EmbeddingStore(dim, tuple(embeddings))
    gold = TagLayer(
        "GOLD", tuple(tuple(f"S{int(z)}" for z in states) for states in states_per_sentence)
    )
    return HmmDataset(corpus, store, gold, means, trans)


def write_dataset(ds: HmmDataset, out_dir) -> dict[str, Path]:
    """Write corpus/embeddings/gold-tag files in the library's formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.txt",
        "embeddings": out / "embeddings.lse",
        "gold": out / "gold.tsv",
    }
    save_corpus(ds.corpus, paths["corpus"])
    save_embeddings(ds.store, paths["embeddings"])
    save_tags(ds.gold, ds.corpus, paths["gold"])
    return paths
