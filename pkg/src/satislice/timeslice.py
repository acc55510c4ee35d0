"""Time-slicing blocks: per-(city, time point) feature matrices.

Each block holds one row per user of that city, computed from the user's
history truncated at the grid point. Users registered after a point still
get a row with empty-history feature values, so matrix shapes stay
constant across the grid. Blocks serialize to one CSV each
(``<city>__<YYYY-MM-DD>.csv``) plus an ``index.json``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .behavior import BehaviorRegistry, extract_behavior
from .corpus import UserRecord
from .errors import DataValidationError
from .lexicon import MAX_MATCH, Lexicon, build_word_bag, extract_linguistic


@dataclass(frozen=True)
class TimeGrid:
    points: tuple[datetime, ...]

    def __post_init__(self):
        if not self.points:
            raise DataValidationError("time grid is empty")
        for a, b in zip(self.points, self.points[1:]):
            if b <= a:
                raise DataValidationError("time grid must be strictly increasing")

    def __len__(self) -> int:
        return len(self.points)


def monthly_grid(start: str, count: int) -> TimeGrid:
    """First days (00:00 UTC) of ``count`` consecutive months from ``start``.

    ``start`` is a "YYYY-MM" string.
    """
    if count < 1:
        raise DataValidationError(f"grid count must be >= 1, got {count}")
    try:
        year_s, month_s = start.split("-")
        year, month = int(year_s), int(month_s)
        if not 1 <= month <= 12:
            raise ValueError(month)
    except ValueError:
        raise DataValidationError(f"bad grid start {start!r}, expected YYYY-MM") from None
    points = []
    for _ in range(count):
        points.append(datetime(year, month, 1, tzinfo=timezone.utc))
        month += 1
        if month > 12:
            month, year = 1, year + 1
    return TimeGrid(tuple(points))


@dataclass(frozen=True)
class SliceBlock:
    city: str
    at: datetime
    user_ids: tuple[str, ...]
    feature_ids: tuple[str, ...]
    matrix: np.ndarray  # |users| x |feature_ids|

    def __post_init__(self):
        if self.matrix.shape != (len(self.user_ids), len(self.feature_ids)):
            raise DataValidationError(
                f"block matrix shape {self.matrix.shape} != "
                f"({len(self.user_ids)}, {len(self.feature_ids)})"
            )


def feature_columns(registry: BehaviorRegistry, lexicon: Lexicon) -> tuple[str, ...]:
    """The full feature-vector layout: behavioral then linguistic."""
    return registry.feature_ids + lexicon.feature_ids


def user_vector(
    record: UserRecord,
    up_to: datetime,
    registry: BehaviorRegistry,
    lexicon: Lexicon,
    mode: str = MAX_MATCH,
    include_reposts: bool = True,
) -> np.ndarray:
    """One user's combined feature vector at a cutoff."""
    behavior = extract_behavior(record, up_to, registry)
    bag = build_word_bag(record, up_to, include_reposts=include_reposts)
    linguistic = extract_linguistic(bag, lexicon, mode)
    values = [behavior[fid] for fid in registry.feature_ids]
    values.extend(linguistic.values[fid] for fid in lexicon.feature_ids)
    return np.array(values, dtype=np.float64)


def build_blocks(
    records: Sequence[UserRecord],
    grid: TimeGrid,
    registry: BehaviorRegistry,
    lexicon: Lexicon,
    mode: str = MAX_MATCH,
    include_reposts: bool = True,
) -> list[SliceBlock]:
    """One block per (city present in records) x (grid point).

    Cities iterate in sorted order, users within a city in input order;
    construction is deterministic for identical inputs.
    """
    columns = feature_columns(registry, lexicon)
    by_city: dict[str, list[UserRecord]] = {}
    for record in records:
        by_city.setdefault(record.city, []).append(record)
    blocks: list[SliceBlock] = []
    for city in sorted(by_city):
        city_records = by_city[city]
        # vectors for every (user, point) pair; point-major for block layout
        for at in grid.points:
            rows = [
                user_vector(r, at, registry, lexicon, mode, include_reposts)
                for r in city_records
            ]
            blocks.append(
                SliceBlock(
                    city=city,
                    at=at,
                    user_ids=tuple(r.user_id for r in city_records),
                    feature_ids=columns,
                    matrix=np.vstack(rows),
                )
            )
    return blocks


def block_filename(city: str, at: datetime) -> str:
    return f"{city}__{at.date().isoformat()}.csv"


def write_blocks(blocks: Iterable[SliceBlock], out_dir: str | Path) -> Path:
    """Write one CSV per block plus index.json; returns the index path."""
    blocks = list(blocks)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for block in blocks:
        name = block_filename(block.city, block.at)
        with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("user_id",) + block.feature_ids)
            for user_id, row in zip(block.user_ids, block.matrix):
                writer.writerow([user_id] + [repr(float(v)) for v in row])
        index.append(
            {
                "city": block.city,
                "at": block.at.date().isoformat(),
                "file": name,
                "users": len(block.user_ids),
            }
        )
    index_path = out_dir / "index.json"
    with open(index_path, "w", encoding="utf-8") as fh:
        json.dump({"columns": list(blocks[0].feature_ids) if blocks else [], "blocks": index},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return index_path


def read_block_csv(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    """Load a block CSV back into (user_ids, feature_ids, matrix)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        feature_ids = header[1:]
        user_ids: list[str] = []
        rows: list[list[float]] = []
        for row in reader:
            user_ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    matrix = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(feature_ids)))
    return user_ids, feature_ids, matrix
