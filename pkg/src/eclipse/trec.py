"""TREC-format relevance judgments and run files.

Qrels lines have four whitespace-separated fields ``qid iter docid grade``;
the iteration field is ignored.  Run lines have six fields
``qid Q0 docid rank score tag`` with scores printed to exactly six decimal
places, so files written here re-parse and re-write byte-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class TrecParseError(ValueError):
    """A malformed line in a qrels or run file."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class FieldCountError(TrecParseError):
    """Wrong number of whitespace-separated fields."""


class GradeValueError(TrecParseError):
    """Relevance grade is not a non-negative integer."""


class DuplicateJudgmentError(TrecParseError):
    """The same (query, document) pair is judged twice."""


class MalformedRunLineError(TrecParseError):
    """Run line has a non-integer rank or non-numeric score."""


class RunOrderError(TrecParseError):
    """Ranks are not contiguous from 1, scores increase, or a doc repeats."""


class RunValidationError(ValueError):
    """Run entries violate the per-query rank/score invariants."""


@dataclass
class Qrels:
    """Graded relevance judgments keyed by (query_id, doc_id)."""

    judgments: dict[tuple[str, str], int]
    _by_query: dict[str, dict[str, int]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        by_query: dict[str, dict[str, int]] = {}
        for (qid, did), grade in self.judgments.items():
            if not isinstance(grade, int) or isinstance(grade, bool) or grade < 0:
                raise ValueError(f"grade for ({qid}, {did}) must be an integer >= 0")
            by_query.setdefault(qid, {})[did] = grade
        self._by_query = by_query

    def query_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._by_query))

    def grade(self, query_id: str, doc_id: str) -> int:
        """Judged grade, with unjudged pairs counting as 0."""
        return self._by_query.get(query_id, {}).get(doc_id, 0)

    def judged(self, query_id: str) -> dict[str, int]:
        return dict(self._by_query.get(query_id, {}))

    def relevant_count(self, query_id: str, threshold: int) -> int:
        return sum(1 for g in self._by_query.get(query_id, {}).values() if g >= threshold)

    def __eq__(self, other) -> bool:
        return isinstance(other, Qrels) and self.judgments == other.judgments


def parse_qrels(path: str | Path) -> Qrels:
    judgments: dict[tuple[str, str], int] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 4:
                raise FieldCountError(line_no, f"expected 4 fields, found {len(fields)}")
            qid, _iteration, did, grade_text = fields
            try:
                grade = int(grade_text)
            except ValueError:
                raise GradeValueError(line_no, f"grade {grade_text!r} is not an integer") from None
            if grade < 0:
                raise GradeValueError(line_no, f"grade {grade} is negative")
            if (qid, did) in judgments:
                raise DuplicateJudgmentError(line_no, f"duplicate judgment for ({qid}, {did})")
            judgments[(qid, did)] = grade
    return Qrels(judgments=judgments)


def save_qrels(qrels: Qrels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for (qid, did), grade in sorted(qrels.judgments.items()):
            f.write(f"{qid} 0 {did} {grade}\n")


@dataclass(frozen=True)
class RunEntry:
    query_id: str
    doc_id: str
    rank: int
    score: float
    tag: str

    def __post_init__(self) -> None:
        for name in ("query_id", "doc_id", "tag"):
            value = getattr(self, name)
            if not value or any(c.isspace() for c in value):
                raise ValueError(f"{name} must be non-empty and contain no whitespace")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not np.isfinite(self.score):
            raise ValueError("score must be finite")


def _check_run_invariants(entries, error):
    """Per query: ranks 1..n contiguous in order, scores non-increasing, docs unique.

    ``error`` maps (position, message) to the exception to raise; positions
    are 0-based entry indices (parse callers convert them to line numbers).
    """
    next_rank: dict[str, int] = {}
    last_score: dict[str, float] = {}
    seen: dict[str, set[str]] = {}
    for pos, entry in enumerate(entries):
        qid = entry.query_id
        expected = next_rank.get(qid, 1)
        if entry.rank != expected:
            raise error(pos, f"query {qid}: expected rank {expected}, found {entry.rank}")
        if qid in last_score and entry.score > last_score[qid]:
            raise error(pos, f"query {qid}: score increases at rank {entry.rank}")
        docs = seen.setdefault(qid, set())
        if entry.doc_id in docs:
            raise error(pos, f"query {qid}: duplicate doc {entry.doc_id}")
        docs.add(entry.doc_id)
        next_rank[qid] = expected + 1
        last_score[qid] = entry.score


def format_run_line(entry: RunEntry) -> str:
    return f"{entry.query_id} Q0 {entry.doc_id} {entry.rank} {entry.score:.6f} {entry.tag}"


def write_run(entries: list[RunEntry], path: str | Path) -> None:
    """Write entries to a run file, validating invariants before any output."""
    _check_run_invariants(entries, lambda pos, msg: RunValidationError(f"entry {pos}: {msg}"))
    with open(path, "w", encoding="utf-8") as f:
        for entry in entries:
            f.write(format_run_line(entry) + "\n")


def parse_run(path: str | Path) -> list[RunEntry]:
    entries: list[RunEntry] = []
    line_nos: list[int] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 6:
                raise FieldCountError(line_no, f"expected 6 fields, found {len(fields)}")
            qid, _iteration, did, rank_text, score_text, tag = fields
            try:
                rank = int(rank_text)
            except ValueError:
                raise MalformedRunLineError(
                    line_no, f"rank {rank_text!r} is not an integer"
                ) from None
            try:
                run_score = float(score_text)
            except ValueError:
                raise MalformedRunLineError(
                    line_no, f"score {score_text!r} is not a number"
                ) from None
            try:
                entry = RunEntry(query_id=qid, doc_id=did, rank=rank, score=run_score, tag=tag)
            except ValueError as exc:
                raise MalformedRunLineError(line_no, str(exc)) from None
            entries.append(entry)
            line_nos.append(line_no)
    _check_run_invariants(entries, lambda pos, msg: RunOrderError(line_nos[pos], msg))
    return entries
