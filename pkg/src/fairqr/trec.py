"""TREC-format qrels and run files.

Qrels lines: `query_id 0 doc_id grade`. Run lines:
`query_id Q0 doc_id rank score tag`. Both whitespace-separated, UTF-8.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import RunFileError
from .index import RankedList, make_ranked_list


@dataclass
class Qrels:
    """Graded relevance judgments keyed by (query id, doc id)."""

    grades: dict[tuple[str, str], int] = field(default_factory=dict)

    def add(self, query_id: str, doc_id: str, grade: int) -> None:
        if grade < 0:
            raise RunFileError(
                f"negative grade for ({query_id}, {doc_id}): {grade}"
            )
        key = (query_id, doc_id)
        if key in self.grades:
            raise RunFileError(f"duplicate qrels pair ({query_id}, {doc_id})")
        self.grades[key] = grade

    def judgments(self, query_id: str) -> dict[str, int]:
        return {
            d: g for (q, d), g in self.grades.items() if q == query_id
        }

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.grades.get((query_id, doc_id), 0)

    def query_ids(self) -> list[str]:
        return sorted({q for q, _ in self.grades})


def parse_qrels(path) -> Qrels:
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise RunFileError(
                    f"expected 4 fields, got {len(parts)}", line_no
                )
            query_id, _, doc_id, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError:
                raise RunFileError(
                    f"non-integer grade {grade_s!r}", line_no
                ) from None
            try:
                qrels.add(query_id, doc_id, grade)
            except RunFileError as exc:
                raise RunFileError(str(exc), line_no) from None
    return qrels


def write_qrels(qrels: Qrels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (query_id, doc_id), grade in sorted(qrels.grades.items()):
            fh.write(f"{query_id} 0 {doc_id} {grade}\n")


def write_run(run: dict[str, RankedList], path, tag: str = "fairqr") -> None:
    """Write ranked lists as a TREC run file, queries sorted by id."""
    with open(path, "w", encoding="utf-8") as fh:
        for query_id in sorted(run):
            for entry in run[query_id].entries:
                fh.write(
                    f"{query_id} Q0 {entry.doc_id} {entry.rank} "
                    f"{entry.score!r} {tag}\n"
                )


def parse_run(path) -> dict[str, RankedList]:
    """Parse a TREC run file back into per-query ranked lists."""
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise RunFileError(
                    f"expected 6 fields, got {len(parts)}", line_no
                )
            query_id, _, doc_id, rank_s, score_s, _tag = parts
            try:
                rank = int(rank_s)
                score = float(score_s)
            except ValueError:
                raise RunFileError(
                    f"bad rank/score {rank_s!r}/{score_s!r}", line_no
                ) from None
            rows.setdefault(query_id, []).append((rank, doc_id, score))
    run: dict[str, RankedList] = {}
    for query_id, entries in rows.items():
        entries.sort()
        ranks = [r for r, _, _ in entries]
        if ranks != list(range(1, len(ranks) + 1)):
            raise RunFileError(
                f"ranks for query {query_id!r} not contiguous from 1"
            )
        run[query_id] = make_ranked_list(
            query_id, [(d, s) for _, d, s in entries]
        )
    return run
