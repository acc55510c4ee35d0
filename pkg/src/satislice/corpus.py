"""Participant corpus: ingestion, activity filtering, survey validation, labels.

Records arrive as JSONL, one user per line:

    {"user_id": ..., "city": ..., "gender": "female|male|unspecified",
     "age": 23, "registered_at": "2010-05-01T00:00:00+00:00",
     "profile": {...},
     "statuses": [{"posted_at": ..., "text": ..., "is_repost": false}, ...],
     "answers": [{"question_id": 1, "score": 4, "submitted_at": ...}, ...]}

Timestamps are RFC 3339; naive timestamps are treated as UTC.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataValidationError

DIMENSIONS = ("LS", "IS", "SPS", "NES", "LES", "SJS")
GENDERS = ("female", "male", "unspecified")
QUESTION_COUNT = 13
SCORE_MIN, SCORE_MAX = 1, 5

EXCLUDED_TOO_FEW = "too_few_statuses"
EXCLUDED_INACTIVE = "inactive_recently"
INVALID_INCOMPLETE = "incomplete"
INVALID_TOO_FAST = "too_fast"


def parse_timestamp(value: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime."""
    try:
        dt = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    except ValueError as exc:
        raise DataValidationError(f"bad timestamp {value!r}: {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass(frozen=True)
class Status:
    posted_at: datetime
    text: str
    is_repost: bool = False

    def __post_init__(self):
        if not self.text and not self.is_repost:
            raise DataValidationError("original status with empty text")


@dataclass(frozen=True)
class SurveyAnswer:
    question_id: int
    score: int
    submitted_at: datetime

    def __post_init__(self):
        if not 1 <= self.question_id <= QUESTION_COUNT:
            raise DataValidationError(f"question_id {self.question_id} outside 1..{QUESTION_COUNT}")
        if self.score not in range(SCORE_MIN, SCORE_MAX + 1):
            raise DataValidationError(f"score {self.score} outside {SCORE_MIN}..{SCORE_MAX}")


@dataclass(frozen=True)
class UserRecord:
    """One participant: identity, profile map, status history, survey answers.

    Statuses are kept sorted by posted_at; answers may be empty for
    prediction-only users.
    """

    user_id: str
    city: str
    gender: str
    age: int
    registered_at: datetime
    profile: Mapping[str, object] = field(default_factory=dict)
    statuses: tuple[Status, ...] = ()
    answers: tuple[SurveyAnswer, ...] = ()

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise DataValidationError(f"unknown gender {self.gender!r}")
        if self.age < 0:
            raise DataValidationError(f"negative age {self.age}")
        object.__setattr__(
            self, "statuses", tuple(sorted(self.statuses, key=lambda s: s.posted_at))
        )
        for status in self.statuses:
            if status.posted_at < self.registered_at:
                raise DataValidationError(
                    f"user {self.user_id}: status at {status.posted_at.isoformat()} "
                    "predates registration"
                )
        seen: set[int] = set()
        for answer in self.answers:
            if answer.question_id in seen:
                raise DataValidationError(
                    f"user {self.user_id}: duplicate answer for question {answer.question_id}"
                )
            seen.add(answer.question_id)


@dataclass(frozen=True)
class SatisfactionLabels:
    """One score per satisfaction dimension, each on the 1..5 scale."""

    LS: float
    IS: float
    SPS: float
    NES: float
    LES: float
    SJS: float

    def __post_init__(self):
        for dim in DIMENSIONS:
            value = getattr(self, dim)
            if not SCORE_MIN <= value <= SCORE_MAX:
                raise DataValidationError(f"{dim} score {value} outside [{SCORE_MIN},{SCORE_MAX}]")

    def as_dict(self) -> dict[str, float]:
        return {dim: getattr(self, dim) for dim in DIMENSIONS}


@dataclass(frozen=True)
class DimensionMap:
    """Assignment of the 13 survey questions to the six dimensions.

    ``questions`` maps question_id -> dimension code. Every dimension must
    receive at least one question and every question id 1..13 must be
    assigned exactly once. ``aggregation`` is "mean" or "median".
    """

    questions: Mapping[int, str]
    aggregation: str = "mean"

    def __post_init__(self):
        if self.aggregation not in ("mean", "median"):
            raise DataValidationError(f"unknown aggregation {self.aggregation!r}")
        assigned = dict(self.questions)
        if set(assigned) != set(range(1, QUESTION_COUNT + 1)):
            missing = sorted(set(range(1, QUESTION_COUNT + 1)) - set(assigned))
            extra = sorted(set(assigned) - set(range(1, QUESTION_COUNT + 1)))
            raise DataValidationError(
                f"dimension map must cover questions 1..{QUESTION_COUNT} exactly once "
                f"(missing {missing}, unexpected {extra})"
            )
        for qid, dim in assigned.items():
            if dim not in DIMENSIONS:
                raise DataValidationError(f"question {qid} mapped to unknown dimension {dim!r}")
        covered = set(assigned.values())
        if covered != set(DIMENSIONS):
            raise DataValidationError(
                f"dimensions without questions: {sorted(set(DIMENSIONS) - covered)}"
            )
        object.__setattr__(self, "questions", dict(assigned))

    @classmethod
    def from_json(cls, path: str | Path) -> "DimensionMap":
        """Load a map written as {"LS": [1, 2], ..., "aggregation": "mean"}."""
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        aggregation = raw.pop("aggregation", "mean")
        questions: dict[int, str] = {}
        for dim, qids in raw.items():
            for qid in qids:
                if int(qid) in questions:
                    raise DataValidationError(f"question {qid} assigned to two dimensions")
                questions[int(qid)] = dim
        return cls(questions=questions, aggregation=aggregation)


@dataclass(frozen=True)
class SurveyCheck:
    valid: bool
    reason: str | None = None


def load_city_table(path: str | Path) -> dict[str, float]:
    """Read the city table CSV (city,population_millions) into a dict."""
    cities: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "city" not in reader.fieldnames:
            raise DataValidationError(f"{path}: city table needs a 'city' column")
        for row in reader:
            cities[row["city"]] = float(row.get("population_millions") or 0.0)
    if not cities:
        raise DataValidationError(f"{path}: city table is empty")
    return cities


def _record_from_obj(obj: Mapping, cities: Mapping[str, float]) -> UserRecord:
    city = obj.get("city")
    if city not in cities:
        raise DataValidationError(f"unknown city {city!r}")
    statuses = tuple(
        Status(
            posted_at=parse_timestamp(s["posted_at"]),
            text=s.get("text", ""),
            is_repost=bool(s.get("is_repost", False)),
        )
        for s in obj.get("statuses", [])
    )
    answers = tuple(
        SurveyAnswer(
            question_id=int(a["question_id"]),
            score=int(a["score"]),
            submitted_at=parse_timestamp(a["submitted_at"]),
        )
        for a in obj.get("answers", [])
    )
    return UserRecord(
        user_id=str(obj["user_id"]),
        city=str(city),
        gender=obj.get("gender", "unspecified"),
        age=int(obj.get("age", 0)),
        registered_at=parse_timestamp(obj["registered_at"]),
        profile=dict(obj.get("profile", {})),
        statuses=statuses,
        answers=answers,
    )


def ingest(path: str | Path, cities: Mapping[str, float]) -> list[UserRecord]:
    """Parse a JSONL corpus into validated UserRecords, preserving user order.

    Any malformed line raises DataValidationError carrying the 1-based line
    number; an unrecognized city is reported by name.
    """
    records: list[UserRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(_record_from_obj(obj, cities))
            except DataValidationError as exc:
                raise DataValidationError(f"line {lineno}: {exc}") from None
            except (KeyError, TypeError, ValueError) as exc:
                raise DataValidationError(f"line {lineno}: malformed record ({exc})") from None
    return records


def filter_active(
    records: Iterable[UserRecord],
    as_of: datetime,
    min_statuses: int = 500,
    recency: timedelta = timedelta(days=90),
) -> tuple[list[UserRecord], list[tuple[UserRecord, str]]]:
    """Split records into active users and excluded users with reasons.

    A user is active when the record holds at least ``min_statuses``
    statuses in total AND at least one status falls inside the window
    [as_of - recency, as_of]. Both boundaries are inclusive: exactly
    ``min_statuses`` statuses or a status exactly ``recency`` old keeps
    the user.
    """
    kept: list[UserRecord] = []
    excluded: list[tuple[UserRecord, str]] = []
    window_start = as_of - recency
    for record in records:
        if len(record.statuses) < min_statuses:
            excluded.append((record, EXCLUDED_TOO_FEW))
            continue
        if not any(window_start <= s.posted_at <= as_of for s in record.statuses):
            excluded.append((record, EXCLUDED_INACTIVE))
            continue
        kept.append(record)
    return kept, excluded


def validate_survey(record: UserRecord, min_gap: timedelta = timedelta(seconds=2)) -> SurveyCheck:
    """Check answer completeness and per-question response pacing.

    Invalid when fewer than 13 answers are present, or when any two
    adjacent submissions (sorted by time) are separated by strictly less
    than ``min_gap``. A gap of exactly ``min_gap`` is valid.
    """
    if len(record.answers) < QUESTION_COUNT:
        return SurveyCheck(valid=False, reason=INVALID_INCOMPLETE)
    times = sorted(a.submitted_at for a in record.answers)
    for earlier, later in zip(times, times[1:]):
        if later - earlier < min_gap:
            return SurveyCheck(valid=False, reason=INVALID_TOO_FAST)
    return SurveyCheck(valid=True)


def labels_from_answers(record: UserRecord, dmap: DimensionMap) -> SatisfactionLabels:
    """Aggregate answered scores into one label per dimension."""
    by_dim: dict[str, list[int]] = {dim: [] for dim in DIMENSIONS}
    for answer in record.answers:
        dim = dmap.questions.get(answer.question_id)
        if dim is not None:
            by_dim[dim].append(answer.score)
    values: dict[str, float] = {}
    for dim, scores in by_dim.items():
        if not scores:
            raise DataValidationError(
                f"user {record.user_id}: no answered question maps to dimension {dim}"
            )
        if dmap.aggregation == "mean":
            values[dim] = float(statistics.fmean(scores))
        else:
            values[dim] = float(statistics.median(scores))
    return SatisfactionLabels(**values)


def cohort_summary(records: Iterable[UserRecord]) -> dict[str, float]:
    """Headcount, gender split, and mean age for a validation report."""
    records = list(records)
    ages = [r.age for r in records]
    return {
        "n": len(records),
        "females": sum(1 for r in records if r.gender == "female"),
        "males": sum(1 for r in records if r.gender == "male"),
        "mean_age": float(statistics.fmean(ages)) if ages else 0.0,
    }
