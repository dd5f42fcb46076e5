"""Corpora, embedding stores, tag layers, and the function-word list.

On-disk formats (all little-endian, all UTF-8 text unless binary):

* corpus: one sentence per line, surfaces joined by single spaces. Token ids
  are derived in first-occurrence order, never stored.
* embeddings: binary. Header: magic ``LSE1``, u32 version=1, u32 dim,
  u64 sentence count. Body per sentence: u32 length, then length*dim float32.
* tags: TSV rows ``sentence-index, token-index, surface, tag``, one row per
  token in corpus order; untagged tokens carry the sentinel ``—``.
* function words: plain text, one lowercase word per line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "TokenSequence",
    "Corpus",
    "EmbeddingStore",
    "TagLayer",
    "FunctionWordList",
    "UNTAGGED",
    "SUBWORD_PREFIX",
    "EMBEDDING_MAGIC",
    "corpus_from_surfaces",
    "load_corpus",
    "save_corpus",
    "load_embeddings",
    "save_embeddings",
    "load_tags",
    "save_tags",
    "load_function_words",
    "is_function_word",
]

UNTAGGED = "—"  # em dash sentinel for tokens without a tag
SUBWORD_PREFIX = "##"  # continuation marker on subword surfaces
EMBEDDING_MAGIC = b"LSE1"


class DataError(ValueError):
    """Malformed or inconsistent input file."""


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[int, ...]
    surfaces: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[TokenSequence, ...]
    vocabulary: dict[str, int]

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class EmbeddingStore:
    dim: int
    sequences: tuple[np.ndarray, ...]  # one (T_i, dim) float64 matrix per sentence


@dataclass(frozen=True)
class TagLayer:
    name: str
    tags: tuple[tuple[str, ...], ...]  # mirrors the corpus shape exactly

    def alphabet(self) -> set[str]:
        return {t for sent in self.tags for t in sent}


@dataclass(frozen=True)
class FunctionWordList:
    words: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.words:
            raise DataError("function-word list is empty")


def _validate_surface(surface: str, where: str) -> None:
    if not surface or any(c.isspace() for c in surface):
        raise DataError(f"{where}: bad token surface {surface!r}")


def corpus_from_surfaces(sentences: list[list[str]]) -> Corpus:
    """Build a corpus in memory; vocabulary ids follow first occurrence."""
    if not sentences:
        raise DataError("corpus has no sentences")
    vocab: dict[str, int] = {}
    out = []
    for i, surfaces in enumerate(sentences):
        if not surfaces:
            raise DataError(f"sentence {i}: empty")
        ids = []
        for s in surfaces:
            _validate_surface(s, f"sentence {i}")
            if s not in vocab:
                vocab[s] = len(vocab)
            ids.append(vocab[s])
        out.append(TokenSequence(tuple(ids), tuple(surfaces)))
    return Corpus(tuple(out), vocab)


def load_corpus(path) -> Corpus:
    text = Path(path).read_text(encoding="utf-8")
    if text == "":
        raise DataError(f"{path}: empty corpus file")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    sentences = []
    for lineno, line in enumerate(lines, start=1):
        if line == "" or line != line.strip() or "  " in line:
            raise DataError(f"{path}: malformed line {lineno}")
        sentences.append(line.split(" "))
    return corpus_from_surfaces(sentences)


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sent in corpus.sentences:
            f.write(" ".join(sent.surfaces))
            f.write("\n")


def save_embeddings(store: EmbeddingStore, path) -> None:
    with open(path, "wb") as f:
        f.write(EMBEDDING_MAGIC)
        f.write(struct.pack("<IIQ", 1, store.dim, len(store.sequences)))
        for seq in store.sequences:
            f.write(struct.pack("<I", seq.shape[0]))
            f.write(np.asarray(seq, dtype="<f4").tobytes(order="C"))


def load_embeddings(path, corpus: Corpus) -> EmbeddingStore:
    raw = Path(path).read_bytes()
    if raw[:4] != EMBEDDING_MAGIC:
        raise DataError(f"{path}: bad magic {raw[:4]!r}, expected {EMBEDDING_MAGIC!r}")
    if len(raw) < 20:
        raise DataError(f"{path}: truncated header")
    version, dim, count = struct.unpack_from("<IIQ", raw, 4)
    if version != 1:
        raise DataError(f"{path}: unsupported version {version}")
    if dim < 1:
        raise DataError(f"{path}: bad dimension {dim}")
    if count != len(corpus.sentences):
        raise DataError(
            f"{path}: sentence count {count} does not match corpus ({len(corpus.sentences)})"
        )
    offset = 20
    sequences = []
    for i, sent in enumerate(corpus.sentences):
        if offset + 4 > len(raw):
            raise DataError(f"{path}: truncated payload at sentence {i}")
        (length,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        if length != len(sent):
            raise DataError(
                f"{path}: sentence {i} length {length} does not match corpus ({len(sent)})"
            )
        nbytes = 4 * length * dim
        if offset + nbytes > len(raw):
            raise DataError(f"{path}: truncated payload at sentence {i}")
        mat = np.frombuffer(raw, dtype="<f4", count=length * dim, offset=offset)
        sequences.append(mat.astype(np.float64).reshape(length, dim))
        offset += nbytes
    if offset != len(raw):
        raise DataError(f"{path}: {len(raw) - offset} trailing bytes after payload")
    return EmbeddingStore(dim, tuple(sequences))


def load_tags(path, corpus: Corpus, name: str | None = None) -> TagLayer:
    if name is None:
        name = Path(path).stem.upper()
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    rows = []
    for lineno, line in enumerate(lines, start=1):
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"{path}: row {lineno}: expected 4 tab-separated fields")
        try:
            si, ti = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"{path}: row {lineno}: bad indices") from None
        rows.append((lineno, si, ti, parts[2], parts[3]))

    expected = [(si, ti) for si, sent in enumerate(corpus.sentences) for ti in range(len(sent))]
    if len(rows) != len(expected):
        raise DataError(
            f"{path}: {len(rows)} rows for a corpus of {len(expected)} tokens"
        )
    tags: list[list[str]] = [["" for _ in sent.tokens] for sent in corpus.sentences]
    for (lineno, si, ti, surface, tag), (esi, eti) in zip(rows, expected):
        if (si, ti) != (esi, eti):
            raise DataError(f"{path}: row {lineno}: expected token ({esi},{eti}), got ({si},{ti})")
        if surface != corpus.sentences[si].surfaces[ti]:
            raise DataError(
                f"{path}: row {lineno}: surface {surface!r} does not match corpus "
                f"{corpus.sentences[si].surfaces[ti]!r}"
            )
        if tag == "":
            raise DataError(f"{path}: row {lineno}: empty tag")
        tags[si][ti] = tag
    return TagLayer(name, tuple(tuple(sent) for sent in tags))


def save_tags(layer: TagLayer, corpus: Corpus, path) -> None:
    if len(layer.tags) != len(corpus.sentences):
        raise DataError("tag layer shape does not match corpus")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for si, (sent, tag_row) in enumerate(zip(corpus.sentences, layer.tags)):
            if len(tag_row) != len(sent):
                raise DataError(f"tag layer sentence {si} length mismatch")
            for ti, (surface, tag) in enumerate(zip(sent.surfaces, tag_row)):
                f.write(f"{si}\t{ti}\t{surface}\t{tag}\n")


def load_function_words(path=None) -> FunctionWordList:
    """Load a function-word list; defaults to the packaged stopword list."""
    if path is None:
        text = resources.files("statenet").joinpath("data/function_words.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = frozenset(w.strip().lower() for w in text.split("\n") if w.strip())
    return FunctionWordList(words)


def is_function_word(surface: str, fw: FunctionWordList) -> bool:
    """Case-insensitive membership; subword continuations never qualify."""
    if surface.startswith(SUBWORD_PREFIX):
        return False
    return surface.lower() in fw.words
