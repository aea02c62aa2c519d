"""Value and structure indexes: tokenizer, idempotence, rebuild equality."""
from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from impliance.index import IndexKey, IndexManager, PartitionIndex, tokenize
from impliance.model import (
    DocId,
    DocNode,
    Kind,
    SourceFormat,
    Timestamp,
    UniversalDocument,
)


def _doc(seq: int, root: DocNode, version: int = 1, at: int = 0) -> UniversalDocument:
    return UniversalDocument(DocId(1, seq), version, Kind.BASE,
                             SourceFormat.JSON_LIKE, root, ingested_at=at or seq)


class TestTokenize:
    def test_lowercase_split_on_non_alnum(self):
        assert tokenize("Hello, World-2024!") == ["hello", "world", "2024"]

    def test_no_stemming_or_stopwords(self):
        assert tokenize("the running runs") == ["the", "running", "runs"]

    def test_empty_and_punctuation_only(self):
        assert tokenize("") == []
        assert tokenize("--- ...") == []

    @settings(max_examples=50, deadline=None)
    @given(st.text(max_size=40))
    def test_tokens_are_clean(self, text):
        for token in tokenize(text):
            assert token == token.lower()
            assert token.isalnum()


class TestPartitionIndex:
    def test_idempotent_add(self):
        index = PartitionIndex()
        doc = _doc(1, DocNode("text", "alpha beta alpha"))
        first = index.add_document(doc)
        assert first > 0
        assert index.add_document(doc) == 0
        postings = index.lookup(IndexKey.for_token("alpha"))
        assert len(postings) == 2  # one posting per occurrence

    def test_token_positions_are_occurrence_ordinals(self):
        index = PartitionIndex()
        index.add_document(_doc(1, DocNode("text", "x y x")))
        positions = [p.position for p in index.lookup(IndexKey.for_token("x"))]
        assert positions == [0, 1]

    def test_path_and_path_value_lookup(self):
        index = PartitionIndex()
        root = DocNode("row", None, [DocNode("amount", 5), DocNode("name", "ada")])
        index.add_document(_doc(1, root))
        assert len(index.lookup(IndexKey.for_path("/row/amount"))) == 1
        assert len(index.lookup(IndexKey.for_path_value("/row/amount", 5))) == 1
        assert index.lookup(IndexKey.for_path_value("/row/amount", 6)) == []

    def test_values_at_sorted_by_value(self):
        index = PartitionIndex()
        for seq, amount in enumerate([30, 10, 20], start=1):
            index.add_document(_doc(seq, DocNode("row", None, [DocNode("amount", amount)])))
        values = [v for v, _ in index.values_at("/row/amount")]
        assert values == [10, 20, 30]

    def test_timestamp_values_tokenized_distinctly(self):
        index = PartitionIndex()
        index.add_document(_doc(1, DocNode("seen", Timestamp(42))))
        assert len(index.lookup(IndexKey.for_token("42"))) == 1

    def test_drop_document(self):
        index = PartitionIndex()
        doc = _doc(1, DocNode("text", "gone"))
        index.add_document(doc)
        index.drop_document(doc.doc_id, doc.version)
        assert index.lookup(IndexKey.for_token("gone")) == []


class TestIndexManager:
    def test_watermark_advances_with_documents(self):
        manager = IndexManager(4)
        assert manager.epoch().high_watermark == 0
        manager.index_document(_doc(1, DocNode("text", "a"), at=17), 0)
        assert manager.epoch().high_watermark == 17
        manager.index_document(_doc(2, DocNode("text", "b"), at=5), 1)
        assert manager.epoch().high_watermark == 17  # never regresses

    def test_lookup_merges_partitions_sorted(self):
        manager = IndexManager(2)
        manager.index_document(_doc(2, DocNode("text", "same")), 1)
        manager.index_document(_doc(1, DocNode("text", "same")), 0)
        docs = [p.doc_id.sequence for p in manager.lookup(IndexKey.for_token("same"))]
        assert docs == [1, 2]

    def test_doc_frequency_counts_distinct_documents(self):
        manager = IndexManager(2)
        manager.index_document(_doc(1, DocNode("text", "dup dup dup")), 0)
        manager.index_document(_doc(2, DocNode("text", "dup")), 1)
        assert manager.doc_frequency("dup") == 2

    def test_rebuild_equals_fresh_index(self):
        docs = [
            _doc(i, DocNode("row", None, [DocNode("name", f"item {i}"), DocNode("n", i)]))
            for i in range(1, 8)
        ]
        manager = IndexManager(1)
        for doc in docs:
            manager.index_document(doc, 0)
        manager.drop_partition(0)
        for doc in docs:
            manager.index_document(doc, 0)
        fresh = IndexManager(1)
        for doc in docs:
            fresh.index_document(doc, 0)
        for token in ("item", "1", "7"):
            key = IndexKey.for_token(token)
            assert manager.lookup(key) == fresh.lookup(key)
        assert manager.lookup(IndexKey.for_path("/row/n")) == fresh.lookup(IndexKey.for_path("/row/n"))

    def test_has_path(self):
        manager = IndexManager(1)
        manager.index_document(_doc(1, DocNode("row", None, [DocNode("x", 1)])), 0)
        assert manager.has_path("/row/x")
        assert not manager.has_path("/row/missing")
