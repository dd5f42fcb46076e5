import numpy as np
import pytest

from statenet import corpus_io as cio
from statenet.corpus_io import DataError


@pytest.fixture
def corpus():
    return cio.corpus_from_surfaces(
        [["the", "cat", "sat"], ["the", "dog", "sat", "down", "##s"]]
    )


class TestCorpus:
    def test_two_sentence_fixture(self, tmp_path, corpus):
        path = tmp_path / "fixture.txt"
        cio.save_corpus(corpus, path)
        loaded = cio.load_corpus(path)
        assert len(loaded.sentences) == 2
        assert loaded.sentences[0].surfaces == ("the", "cat", "sat")
        assert loaded.sentences[1].tokens == tuple(
            loaded.vocabulary[s] for s in loaded.sentences[1].surfaces
        )

    def test_repeated_token_shares_id(self):
        corpus = cio.corpus_from_surfaces([["be", "kind"], ["be", "brave"]])
        assert corpus.sentences[0].tokens[0] == corpus.sentences[1].tokens[0]
        assert corpus.vocab_size == 3

    def test_vocabulary_first_occurrence_order_and_dense(self, corpus):
        ids = sorted(corpus.vocabulary.values())
        assert ids == list(range(corpus.vocab_size))
        assert corpus.vocabulary["the"] == 0 and corpus.vocabulary["cat"] == 1

    def test_save_load_save_byte_identical(self, tmp_path, corpus):
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        cio.save_corpus(corpus, p1)
        cio.save_corpus(cio.load_corpus(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("a b\n\nc d\n", encoding="utf-8")
        with pytest.raises(DataError, match="line 2"):
            cio.load_corpus(path)

    def test_double_space_is_malformed(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("a  b\n", encoding="utf-8")
        with pytest.raises(DataError, match="line 1"):
            cio.load_corpus(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="empty"):
            cio.load_corpus(path)


class TestEmbeddings:
    def make_store(self, rng, corpus, dim=4):
        seqs = tuple(rng.uniform(-1, 1, (len(s), dim)) for s in corpus.sentences)
        return cio.EmbeddingStore(dim, seqs)

    def test_shapes(self, tmp_path, rng):
        corpus = cio.corpus_from_surfaces([["a", "b", "c"], ["d", "e", "f", "g", "h"]])
        store = self.make_store(rng, corpus)
        path = tmp_path / "emb.bin"
        cio.save_embeddings(store, path)
        loaded = cio.load_embeddings(path, corpus)
        assert loaded.dim == 4
        assert [m.shape for m in loaded.sequences] == [(3, 4), (5, 4)]
        assert all(m.dtype == np.float64 for m in loaded.sequences)

    def test_sentence_count_mismatch(self, tmp_path, rng, corpus):
        small = cio.corpus_from_surfaces([["a", "b"], ["c", "d"]])
        store = self.make_store(rng, small)
        path = tmp_path / "emb.bin"
        cio.save_embeddings(store, path)
        three = cio.corpus_from_surfaces([["a", "b"], ["c", "d"], ["e", "f"]])
        with pytest.raises(DataError, match="count"):
            cio.load_embeddings(path, three)

    def test_length_mismatch(self, tmp_path, rng, corpus):
        store = self.make_store(rng, corpus)
        path = tmp_path / "emb.bin"
        cio.save_embeddings(store, path)
        other = cio.corpus_from_surfaces([["x", "y", "z"], ["q", "w", "e", "r"]])
        with pytest.raises(DataError, match="length"):
            cio.load_embeddings(path, other)

    def test_round_trip_float32_quantization(self, tmp_path, rng, corpus):
        store = self.make_store(rng, corpus, dim=6)
        path = tmp_path / "emb.bin"
        cio.save_embeddings(store, path)
        loaded = cio.load_embeddings(path, corpus)
        worst = max(
            np.abs(a - b).max() for a, b in zip(store.sequences, loaded.sequences)
        )
        assert worst <= 1e-7

    def test_bad_magic(self, tmp_path, corpus):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(DataError, match="magic"):
            cio.load_embeddings(path, corpus)

    def test_truncated_payload(self, tmp_path, rng, corpus):
        store = self.make_store(rng, corpus)
        path = tmp_path / "emb.bin"
        cio.save_embeddings(store, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(DataError, match="truncated"):
            cio.load_embeddings(path, corpus)

    def test_trailing_garbage(self, tmp_path, rng, corpus):
        store = self.make_store(rng, corpus)
        path = tmp_path / "emb.bin"
        cio.save_embeddings(store, path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(DataError, match="trailing"):
            cio.load_embeddings(path, corpus)


class TestTags:
    def test_pos_fixture(self, tmp_path, corpus):
        layer = cio.TagLayer(
            "POS", (("DET", "NOUN", "VERB"), ("DET", "NOUN", "VERB", "ADV", cio.UNTAGGED))
        )
        path = tmp_path / "pos.tsv"
        cio.save_tags(layer, corpus, path)
        loaded = cio.load_tags(path, corpus)
        assert loaded.name == "POS"
        assert loaded.tags == layer.tags

    def test_surface_mismatch_names_row(self, tmp_path, corpus):
        layer = cio.TagLayer(
            "POS", (("DET", "NOUN", "VERB"), ("DET", "NOUN", "VERB", "ADV", cio.UNTAGGED))
        )
        path = tmp_path / "pos.tsv"
        cio.save_tags(layer, corpus, path)
        lines = path.read_text(encoding="utf-8").split("\n")
        lines[1] = "0\t1\twrong\tNOUN"
        path.write_text("\n".join(lines), encoding="utf-8")
        with pytest.raises(DataError, match="row 2"):
            cio.load_tags(path, corpus)

    def test_round_trip_unchanged(self, tmp_path, corpus, rng):
        tags = tuple(
            tuple(rng.choice(["A", "B", cio.UNTAGGED]) for _ in sent.tokens)
            for sent in corpus.sentences
        )
        layer = cio.TagLayer("ENT", tags)
        p1, p2 = tmp_path / "ent.tsv", tmp_path / "ent2.tsv"
        cio.save_tags(layer, corpus, p1)
        cio.save_tags(cio.load_tags(p1, corpus, name="ENT"), corpus, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert cio.load_tags(p1, corpus, name="ENT").tags == tags

    def test_wrong_row_count(self, tmp_path, corpus):
        path = tmp_path / "bad.tsv"
        path.write_text("0\t0\tthe\tDET\n", encoding="utf-8")
        with pytest.raises(DataError, match="rows"):
            cio.load_tags(path, corpus)


class TestFunctionWords:
    def test_packaged_list(self):
        fw = cio.load_function_words()
        assert cio.is_function_word("the", fw)
        assert not cio.is_function_word("computer", fw)
        assert len(fw.words) == 127

    def test_case_insensitive(self):
        fw = cio.load_function_words()
        assert cio.is_function_word("The", fw)
        assert cio.is_function_word("BECAUSE", fw)

    def test_subword_continuations_excluded(self):
        fw = cio.load_function_words()
        assert not cio.is_function_word("##s", fw)
        assert not cio.is_function_word("##the", fw)
        assert cio.is_function_word("s", fw)

    def test_override_file(self, tmp_path):
        path = tmp_path / "fw.txt"
        path.write_text("foo\nBar\n", encoding="utf-8")
        fw = cio.load_function_words(path)
        assert fw.words == frozenset({"foo", "bar"})
        assert cio.is_function_word("FOO", fw)

    def test_empty_list_rejected(self, tmp_path):
        path = tmp_path / "fw.txt"
        path.write_text("\n", encoding="utf-8")
        with pytest.raises(DataError):
            cio.load_function_words(path)
