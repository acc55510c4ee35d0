"""Model evaluation and index correlation.

Covers MAE/PCC scoring, the MAE-to-accuracy reconstruction, seeded k-fold
cross-validation, per-city median aggregation of monthly predictions, and
significance-tested correlation of those medians against economy indexes
(two-tailed t-test on n-2 degrees of freedom, ** for p<0.01 and * for
p<0.05).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import DIMENSIONS
from .errors import ConfigError, DataValidationError
from .models import Dataset, fit, MODEL_KINDS


def mae(pred: Sequence[float], truth: Sequence[float]) -> float:
    """Mean absolute error."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.size < 1:
        raise DataValidationError(f"mae needs equal non-empty vectors, got {pred.shape} {truth.shape}")
    return float(np.mean(np.abs(pred - truth)))


def pcc(a: Sequence[float], b: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size < 3:
        raise DataValidationError(f"pcc needs equal vectors of length >= 3, got {a.shape} {b.shape}")
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0.0:
        raise DataValidationError("pcc undefined for constant input")
    return float(da @ db) / denom


def accuracy_from_mae(mae_value: float, scale_range: float = 4.0) -> float:
    """Percent accuracy as 100*(1 - mae/range) on the 1..5 answer scale."""
    if mae_value < 0:
        raise DataValidationError(f"mae must be >= 0, got {mae_value}")
    if scale_range <= 0:
        raise DataValidationError(f"scale range must be > 0, got {scale_range}")
    return 100.0 * (1.0 - mae_value / scale_range)


# --- Student-t tail probability -------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a} b={b} x={x}")


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf_two_tailed(t: float, df: int) -> float:
    """Two-tailed tail probability 2*P(T >= |t|) for Student's t."""
    if df < 1:
        raise DataValidationError(f"degrees of freedom must be >= 1, got {df}")
    if t == 0.0:
        return 1.0
    if math.isinf(t):
        return 0.0
    return _betainc(df / 2.0, 0.5, df / (df + t * t))


def pearson_significance(r: float, n: int) -> tuple[float, float]:
    """(t statistic, two-tailed p) for a sample correlation of n pairs."""
    if n < 3:
        raise DataValidationError(f"need n >= 3 pairs, got {n}")
    if not -1.0 <= r <= 1.0:
        raise DataValidationError(f"correlation {r} outside [-1, 1]")
    if abs(r) >= 1.0:
        return math.inf if r > 0 else -math.inf, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return t, t_cdf_two_tailed(t, n - 2)


def stars(p: float) -> str:
    """Significance marker: ** for p<0.01, * for 0.01<=p<0.05, else none."""
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def stars_for_r(r: float, n: int) -> str:
    return stars(pearson_significance(r, n)[1])


# --- cross-validation ------------------------------------------------------


def fold_assignments(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle split into ``folds`` disjoint, exhaustive test folds."""
    if folds < 2 or folds > n:
        raise ConfigError(f"folds must be in 2..n={n}, got {folds}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    sizes = [n // folds + (1 if i < n % folds else 0) for i in range(folds)]
    out = []
    start = 0
    for size in sizes:
        out.append(np.sort(perm[start : start + size]))
        start += size
    return out


def cross_validate(
    data: Dataset,
    kind: str,
    folds: int = 10,
    seed: int = 0,
    lam: float = 1.0,
    min_leaf: int = 4,
    smoothing: bool = True,
    standardize: bool = False,
    clamp: bool = False,
) -> tuple[float, float]:
    """Pooled out-of-fold (MAE, PCC) for one model kind."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    predictions = np.empty(data.n)
    for test_idx in fold_assignments(data.n, folds, seed):
        train_mask = np.ones(data.n, dtype=bool)
        train_mask[test_idx] = False
        saved = fit(
            data.subset(np.flatnonzero(train_mask)),
            kind,
            lam=lam,
            min_leaf=min_leaf,
            smoothing=smoothing,
            standardize=standardize,
        )
        for i in test_idx:
            predictions[i] = saved.predict_one(data.X[i], clamp=clamp)
    return mae(predictions, data.y), pcc(predictions, data.y)


# --- report tables ----------------------------------------------------------


@dataclass(frozen=True)
class EvalCell:
    pcc: float
    mae: float


@dataclass
class EvalReport:
    """Per-dimension scores for each model kind, plus a recomputed AVE row."""

    kinds: tuple[str, ...]
    rows: dict[str, dict[str, EvalCell]]  # dimension -> kind -> cell

    def __post_init__(self):
        for dim in DIMENSIONS:
            if dim not in self.rows:
                raise DataValidationError(f"eval report missing dimension {dim}")
            for kind in self.kinds:
                if kind not in self.rows[dim]:
                    raise DataValidationError(f"eval report missing {dim}/{kind}")

    def averages(self) -> dict[str, EvalCell]:
        out = {}
        for kind in self.kinds:
            out[kind] = EvalCell(
                pcc=float(np.mean([self.rows[dim][kind].pcc for dim in DIMENSIONS])),
                mae=float(np.mean([self.rows[dim][kind].mae for dim in DIMENSIONS])),
            )
        return out

    def accuracies(self, scale_range: float = 4.0) -> dict[str, float]:
        return {
            kind: accuracy_from_mae(cell.mae, scale_range)
            for kind, cell in self.averages().items()
        }

    def to_dict(self) -> dict:
        return {
            "kinds": list(self.kinds),
            "rows": {
                dim: {k: {"pcc": c.pcc, "mae": c.mae} for k, c in kinds.items()}
                for dim, kinds in self.rows.items()
            },
            "accuracy_note": (
                "accuracy is reconstructed as 100*(1 - MAE/4) on the 1-5 answer scale"
            ),
            "accuracy_percent": self.accuracies(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        rows = {
            dim: {k: EvalCell(pcc=c["pcc"], mae=c["mae"]) for k, c in kinds.items()}
            for dim, kinds in obj["rows"].items()
        }
        return cls(kinds=tuple(obj["kinds"]), rows=rows)

    def write_csv(self, path: str | Path) -> None:
        """Mirror of the dimension x (model, metric) results table."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["dim"]
            for kind in self.kinds:
                header += [f"{kind}_pcc", f"{kind}_mae"]
            writer.writerow(header)
            for dim in DIMENSIONS:
                row = [dim]
                for kind in self.kinds:
                    cell = self.rows[dim][kind]
                    row += [f"{cell.pcc:.4f}", f"{cell.mae:.4f}"]
                writer.writerow(row)
            ave = ["AVE"]
            for kind, cell in self.averages().items():
                ave += [f"{cell.pcc:.4f}", f"{cell.mae:.4f}"]
            writer.writerow(ave)


@dataclass(frozen=True)
class RegionalSeries:
    """One city's per-grid-point scores for one dimension."""

    city: str
    dimension: str
    points: tuple[datetime, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.points) != len(self.values):
            raise DataValidationError("series points/values length mismatch")
        if not self.values:
            raise DataValidationError("empty regional series")


def regional_median(series: RegionalSeries) -> float:
    """Median of the series values (even counts average the central pair)."""
    return float(np.median(np.asarray(series.values, dtype=np.float64)))


@dataclass(frozen=True)
class IndexTable:
    """Economy index values per city; every index covers the same city set."""

    names: tuple[str, ...]
    values: Mapping[str, Mapping[str, float]]  # index -> city -> value

    def __post_init__(self):
        if not self.names:
            raise DataValidationError("index table is empty")
        city_sets = {name: frozenset(self.values[name]) for name in self.names}
        first = city_sets[self.names[0]]
        for name, cities in city_sets.items():
            if cities != first:
                raise DataValidationError(f"index {name!r} covers a different city set")

    @property
    def cities(self) -> frozenset[str]:
        return frozenset(self.values[self.names[0]])


def load_index_table(path: str | Path) -> IndexTable:
    """Read a long-format CSV ``index,city,value`` preserving index order."""
    names: list[str] = []
    values: dict[str, dict[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"index", "city", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataValidationError(f"{path}: index CSV needs columns {sorted(required)}")
        for row in reader:
            name = row["index"].strip()
            if name not in values:
                names.append(name)
                values[name] = {}
            values[name][row["city"].strip()] = float(row["value"])
    return IndexTable(names=tuple(names), values=values)


@dataclass(frozen=True)
class CorrelationRow:
    index: str
    dimension: str
    r: float
    p: float
    stars: str


def correlate_indexes(
    regional: Mapping[str, Mapping[str, float]],
    table: IndexTable,
) -> list[CorrelationRow]:
    """Correlate per-city medians against every economy index.

    ``regional`` maps city -> dimension -> median score. Cities are the
    sorted intersection of both inputs; fewer than 3 shared cities is an
    error.
    """
    common = sorted(set(regional) & set(table.cities))
    if len(common) < 3:
        raise DataValidationError(
            f"need >= 3 cities shared between medians and indexes, got {len(common)}"
        )
    out: list[CorrelationRow] = []
    for name in table.names:
        index_values = [table.values[name][city] for city in common]
        for dim in DIMENSIONS:
            med = [regional[city][dim] for city in common]
            r = pcc(index_values, med)
            _, p = pearson_significance(r, len(common))
            out.append(CorrelationRow(index=name, dimension=dim, r=r, p=p, stars=stars(p)))
    return out


def write_correlation_csv(rows: Sequence[CorrelationRow], path: str | Path) -> None:
    """Index rows x dimension columns with star suffixes."""
    by_index: dict[str, dict[str, CorrelationRow]] = {}
    order: list[str] = []
    for row in rows:
        if row.index not in by_index:
            order.append(row.index)
            by_index[row.index] = {}
        by_index[row.index][row.dimension] = row
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index"] + list(DIMENSIONS))
        for name in order:
            cells = [name]
            for dim in DIMENSIONS:
                row = by_index[name][dim]
                cells.append(f"{row.r:.2f}{row.stars}")
            writer.writerow(cells)
