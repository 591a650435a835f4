"""Group-annotated corpus: schemas, documents, ingestion, tokenization.

A corpus is a set of documents, each carrying group-membership labels per
fairness category (e.g. gender, geography). Membership mass is fractional:
a document labeled with several subgroups splits one unit of mass equally
among them, so per-document group vectors always live on the simplex.
Documents missing a category's annotation fall back to the reserved
"Unknown" subgroup.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    CorpusLookupError,
    DuplicateIdError,
    IngestionError,
    SchemaError,
)

UNKNOWN = "Unknown"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics, dropping empty tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class GroupSchema:
    """Ordered subgroup labels for one fairness category.

    The ordering is fixed at construction; every distribution over this
    category is a vector in this order. "Unknown" must appear exactly once.
    """

    category: str
    subgroups: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.subgroups)) != len(self.subgroups):
            raise SchemaError(
                f"duplicate subgroup labels in category {self.category!r}"
            )
        if list(self.subgroups).count(UNKNOWN) != 1:
            raise SchemaError(
                f"category {self.category!r} must contain {UNKNOWN!r} exactly once"
            )

    def index(self, subgroup: str) -> int:
        try:
            return self.subgroups.index(subgroup)
        except ValueError:
            raise SchemaError(
                f"subgroup {subgroup!r} not in category {self.category!r}"
            ) from None


@dataclass(frozen=True)
class Document:
    """One corpus document with per-category subgroup labels."""

    id: str
    text: str
    groups: dict[str, frozenset[str]]


@dataclass
class CorpusStore:
    """Immutable-after-ingestion document collection.

    Safe for concurrent reads once built; ingestion is single-writer.
    """

    schemas: dict[str, GroupSchema]
    documents: dict[str, Document] = field(default_factory=dict)
    total_tokens: int = 0

    @property
    def n_documents(self) -> int:
        return len(self.documents)

    def document(self, doc_id: str) -> Document:
        try:
            return self.documents[doc_id]
        except KeyError:
            raise CorpusLookupError(f"unknown document id {doc_id!r}") from None

    def schema(self, category: str) -> GroupSchema:
        try:
            return self.schemas[category]
        except KeyError:
            raise CorpusLookupError(f"unknown category {category!r}") from None


def ingest_corpus(
    records: Iterable[dict], schemas: Iterable[GroupSchema]
) -> CorpusStore:
    """Build a CorpusStore from parsed JSONL records.

    Unlabeled categories fall back to {"Unknown"}; labels outside the schema
    and duplicate ids are rejected.
    """
    store = CorpusStore(schemas={s.category: s for s in schemas})
    for line_no, record in enumerate(records, start=1):
        if not isinstance(record, dict):
            raise IngestionError("record is not an object", line_no)
        doc_id = record.get("id")
        text = record.get("text")
        if not isinstance(doc_id, str) or not doc_id:
            raise IngestionError("missing or invalid 'id'", line_no)
        if not isinstance(text, str):
            raise IngestionError("missing or invalid 'text'", line_no)
        if doc_id in store.documents:
            raise DuplicateIdError(f"duplicate document id {doc_id!r}")
        raw_groups = record.get("groups", {})
        if not isinstance(raw_groups, dict):
            raise IngestionError("'groups' must be an object", line_no)
        groups: dict[str, frozenset[str]] = {}
        for category, schema in store.schemas.items():
            labels = raw_groups.get(category) or [UNKNOWN]
            for label in labels:
                if label not in schema.subgroups:
                    raise SchemaError(
                        f"subgroup {label!r} not in category {category!r} "
                        f"(document {doc_id!r})"
                    )
            groups[category] = frozenset(labels)
        doc = Document(id=doc_id, text=text, groups=groups)
        store.documents[doc_id] = doc
        store.total_tokens += len(tokenize(text))
    return store


def group_vector(store: CorpusStore, doc_id: str, category: str) -> np.ndarray:
    """Fractional group-membership vector over the category's subgroups.

    One unit of mass split equally across the document's labels; sums to 1.
    """
    doc = store.document(doc_id)
    schema = store.schema(category)
    labels = doc.groups.get(category) or frozenset({UNKNOWN})
    vec = np.zeros(len(schema.subgroups))
    share = 1.0 / len(labels)
    for label in labels:
        vec[schema.index(label)] = share
    return vec


def document_record(doc: Document) -> dict:
    """Serialize a document back to its JSONL record form."""
    return {
        "id": doc.id,
        "text": doc.text,
        "groups": {cat: sorted(labels) for cat, labels in sorted(doc.groups.items())},
    }


def read_jsonl(path) -> Iterator[dict]:
    """Yield parsed objects from a JSONL file, with line numbers on errors."""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"invalid JSON: {exc}", line_no) from None


def load_schemas(path) -> list[GroupSchema]:
    """Load category schemas from a JSON file.

    Format: {"<category>": ["<subgroup>", ...], ...}
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise SchemaError("schema file must map categories to subgroup lists")
    return [GroupSchema(cat, tuple(subs)) for cat, subs in data.items()]


def load_corpus(corpus_path, schema_path) -> CorpusStore:
    """Convenience: read schema + JSONL corpus from disk."""
    schemas = load_schemas(schema_path)
    return ingest_corpus(read_jsonl(corpus_path), schemas)
