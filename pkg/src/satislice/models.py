"""Regressors: least-squares linear, ridge, and M5-style model trees.

All fits are deterministic. Rank-deficient least squares resolves to the
minimum-norm solution so wide designs (more features than samples) fit
without failing. Ridge leaves the intercept unpenalized. The model tree
grows by standard-deviation reduction, prunes bottom-up against
adjusted error, and optionally smooths predictions along the path to the
root.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataValidationError

OLS = "ols"
RIDGE = "ridge"
M5P = "m5p"
MODEL_KINDS = (OLS, RIDGE, M5P)

SD_STOP_FACTOR = 0.05   # stop splitting when subset sd falls below 5% of the root sd
SMOOTHING_K = 15.0      # blending constant for path smoothing
PRUNE_PENALTY = 1.0     # parameter multiplier in the (n + a*p)/(n - p) error inflation


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_ids: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataValidationError(f"bad dataset shapes X{X.shape} y{y.shape}")
        if X.shape[0] < 1:
            raise DataValidationError("dataset is empty")
        if len(self.feature_ids) != X.shape[1]:
            raise DataValidationError(
                f"{len(self.feature_ids)} feature ids for {X.shape[1]} columns"
            )
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataValidationError("dataset contains NaN or infinite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.feature_ids)


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    kind: str = OLS
    lam: float | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not (np.isfinite(w).all() and np.isfinite(self.intercept)):
            raise DataValidationError("non-finite linear model coefficients")
        object.__setattr__(self, "weights", w)

    def predict_one(self, x: np.ndarray) -> float:
        return float(self.weights @ x + self.intercept)

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.intercept


def _lstsq_on(X: np.ndarray, y: np.ndarray, columns: Sequence[int]) -> tuple[np.ndarray, float]:
    """Minimum-norm least squares over selected columns, full-width weights."""
    d = X.shape[1]
    cols = list(columns)
    design = np.hstack([X[:, cols], np.ones((X.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    weights = np.zeros(d)
    weights[cols] = coef[:-1]
    return weights, float(coef[-1])


def fit_ols(data: Dataset) -> LinearModel:
    """Ordinary least squares with intercept; minimum-norm when rank deficient."""
    weights, intercept = _lstsq_on(data.X, data.y, range(data.d))
    return LinearModel(weights=weights, intercept=intercept, kind=OLS)


def fit_ridge(data: Dataset, lam: float) -> LinearModel:
    """L2-shrunk linear regression; the intercept is not penalized."""
    if lam <= 0:
        raise ConfigError(f"ridge penalty must be > 0, got {lam}")
    x_mean = data.X.mean(axis=0)
    y_mean = data.y.mean()
    Xc = data.X - x_mean
    yc = data.y - y_mean
    gram = Xc.T @ Xc + lam * np.eye(data.d)
    weights = np.linalg.solve(gram, Xc.T @ yc)
    intercept = float(y_mean - weights @ x_mean)
    return LinearModel(weights=weights, intercept=intercept, kind=RIDGE, lam=float(lam))


# --- M5-style model tree -------------------------------------------------


@dataclass
class Leaf:
    mean: float
    count: int
    model: LinearModel | None = None  # fitted during pruning


@dataclass
class Split:
    feature: int
    threshold: float
    left: "Leaf | Split"
    right: "Leaf | Split"
    count: int
    model: LinearModel | None = None  # node model kept for smoothing


@dataclass
class ModelTree:
    root: Leaf | Split
    smoothing: bool
    min_leaf: int
    feature_ids: tuple[str, ...] = ()

    def predict_one(self, x: np.ndarray) -> float:
        return _tree_predict(self.root, x, self.smoothing)

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row) for row in X])


def _tree_predict(node: Leaf | Split, x: np.ndarray, smoothing: bool) -> float:
    if isinstance(node, Leaf):
        return node.model.predict_one(x)
    child = node.left if x[node.feature] <= node.threshold else node.right
    value = _tree_predict(child, x, smoothing)
    if smoothing and node.model is not None:
        value = (child.count * value + SMOOTHING_K * node.model.predict_one(x)) / (
            child.count + SMOOTHING_K
        )
    return value


def _sd(y: np.ndarray) -> float:
    return float(np.sqrt(np.mean((y - y.mean()) ** 2))) if y.size else 0.0


def split_candidates(x: np.ndarray, y: np.ndarray, min_size: int = 1):
    """Yield (threshold, sdr) for midpoints between distinct values of x
    leaving at least ``min_size`` cases on each side.

    SDR is sd(T) - sum(|Ti|/|T| * sd(Ti)) computed with population
    standard deviations, so it is always >= 0.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = ys.size
    if n < 2 * min_size:
        return
    cum = np.cumsum(ys)
    cum2 = np.cumsum(ys**2)
    total, total2 = cum[-1], cum2[-1]
    sd_all = _sd(ys)
    for i in range(min_size - 1, n - min_size):
        if xs[i + 1] <= xs[i]:
            continue
        nl = i + 1
        nr = n - nl
        var_l = max(cum2[i] / nl - (cum[i] / nl) ** 2, 0.0)
        var_r = max((total2 - cum2[i]) / nr - ((total - cum[i]) / nr) ** 2, 0.0)
        sdr = sd_all - (nl / n) * np.sqrt(var_l) - (nr / n) * np.sqrt(var_r)
        yield (xs[i] + xs[i + 1]) / 2.0, float(sdr)


def _best_split(X: np.ndarray, y: np.ndarray, min_size: int) -> tuple[int, float] | None:
    """Highest-SDR (feature, threshold); ties go to the lowest feature index,
    then the lowest threshold."""
    best: tuple[int, float] | None = None
    best_sdr = -np.inf
    for j in range(X.shape[1]):
        for threshold, sdr in split_candidates(X[:, j], y, min_size):
            if sdr > best_sdr:
                best_sdr = sdr
                best = (j, threshold)
    return best


def _grow(X: np.ndarray, y: np.ndarray, idx: np.ndarray, sd_root: float, min_leaf: int):
    ys = y[idx]
    sd_here = _sd(ys)
    if idx.size < 2 * min_leaf or sd_here == 0.0 or sd_here < SD_STOP_FACTOR * sd_root:
        return Leaf(mean=float(ys.mean()), count=int(idx.size))
    found = _best_split(X[idx], ys, min_leaf)
    if found is None:
        return Leaf(mean=float(ys.mean()), count=int(idx.size))
    feature, threshold = found
    mask = X[idx, feature] <= threshold
    left = _grow(X, y, idx[mask], sd_root, min_leaf)
    right = _grow(X, y, idx[~mask], sd_root, min_leaf)
    return Split(feature=feature, threshold=threshold, left=left, right=right, count=int(idx.size))


def _subtree_features(node: Leaf | Split, acc: set[int]) -> set[int]:
    if isinstance(node, Split):
        acc.add(node.feature)
        _subtree_features(node.left, acc)
        _subtree_features(node.right, acc)
    return acc


def _adjusted(err: float, n: int, p: int) -> float:
    if n <= p:
        return float("inf") if err > 0 else err
    return err * (n + PRUNE_PENALTY * p) / (n - p)


def _fit_node_model(data: Dataset, idx: np.ndarray, columns: Sequence[int]) -> LinearModel:
    weights, intercept = _lstsq_on(data.X[idx], data.y[idx], columns)
    return LinearModel(weights=weights, intercept=intercept, kind=OLS)


def _prune(node: Leaf | Split, data: Dataset, idx: np.ndarray) -> tuple[Leaf | Split, float]:
    """Returns the (possibly collapsed) node and its adjusted training error."""
    n = idx.size
    if isinstance(node, Leaf):
        model = _fit_node_model(data, idx, [])
        err = float(np.mean(np.abs(data.y[idx] - model.predict_many(data.X[idx]))))
        node.model = model
        return node, _adjusted(err, n, 1)
    columns = sorted(_subtree_features(node, set()))
    model = _fit_node_model(data, idx, columns)
    model_err = float(np.mean(np.abs(data.y[idx] - model.predict_many(data.X[idx]))))
    model_adj = _adjusted(model_err, n, len(columns) + 1)
    mask = data.X[idx, node.feature] <= node.threshold
    left, left_adj = _prune(node.left, data, idx[mask])
    right, right_adj = _prune(node.right, data, idx[~mask])
    subtree_adj = (idx[mask].size * left_adj + idx[~mask].size * right_adj) / n
    if model_adj <= subtree_adj:
        return Leaf(mean=float(data.y[idx].mean()), count=n, model=model), model_adj
    node.left, node.right, node.model = left, right, model
    return node, subtree_adj


def fit_m5p(data: Dataset, min_leaf: int = 4, smoothing: bool = True) -> ModelTree:
    """Grow, prune, and (optionally) smooth an M5-style model tree.

    Splits must leave ``min_leaf`` cases per side; leaf models regress on
    the features tested in the pruned subtree. A degenerate tree with no
    splits at all (e.g. min_leaf >= n) carries a plain least-squares model
    over all features at its single leaf.
    """
    if min_leaf < 2:
        raise ConfigError(f"min_leaf must be >= 2, got {min_leaf}")
    idx = np.arange(data.n)
    sd_root = _sd(data.y)
    root = _grow(data.X, data.y, idx, sd_root, min_leaf)
    if isinstance(root, Leaf):
        root = Leaf(mean=float(data.y.mean()), count=data.n, model=fit_ols(data))
    else:
        root, _ = _prune(root, data, idx)
    return ModelTree(root=root, smoothing=smoothing, min_leaf=min_leaf,
                     feature_ids=data.feature_ids)


def predict(model: LinearModel | ModelTree, x: Sequence[float], clamp: bool = False) -> float:
    """Apply a fitted model to one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(model, ModelTree):
        if model.feature_ids and x.shape[0] != len(model.feature_ids):
            raise DataValidationError(
                f"vector length {x.shape[0]} != tree width {len(model.feature_ids)}"
            )
        value = model.predict_one(x)
    else:
        if x.shape[0] != model.weights.shape[0]:
            raise DataValidationError(
                f"vector length {x.shape[0]} != model width {model.weights.shape[0]}"
            )
        value = model.predict_one(x)
    if clamp:
        value = min(max(value, 1.0), 5.0)
    return value


# --- serialization --------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        stds = X.std(axis=0)
        stds = np.where(stds == 0.0, 1.0, stds)
        return cls(means=X.mean(axis=0), stds=stds)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.means) / self.stds


@dataclass
class SavedModel:
    """A fitted model plus everything needed to apply it verbatim later."""

    kind: str
    model: LinearModel | ModelTree
    manifest_hash: str
    params: dict = field(default_factory=dict)
    scaler: Standardizer | None = None

    def predict_one(self, x: Sequence[float], clamp: bool = False) -> float:
        x = np.asarray(x, dtype=np.float64)
        if self.scaler is not None:
            x = (x - self.scaler.means) / self.scaler.stds
        return predict(self.model, x, clamp=clamp)


def manifest_hash(feature_ids: Sequence[str]) -> str:
    digest = hashlib.sha256("\n".join(feature_ids).encode("utf-8"))
    return digest.hexdigest()


def fit(
    data: Dataset,
    kind: str,
    lam: float = 1.0,
    min_leaf: int = 4,
    smoothing: bool = True,
    standardize: bool = False,
) -> SavedModel:
    """Fit the requested model kind and wrap it for serialization."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    scaler = None
    if standardize:
        scaler = Standardizer.fit(data.X)
        data = Dataset(scaler.transform(data.X), data.y, data.feature_ids)
    if kind == OLS:
        model: LinearModel | ModelTree = fit_ols(data)
        params: dict = {}
    elif kind == RIDGE:
        model = fit_ridge(data, lam)
        params = {"lambda": float(lam)}
    else:
        model = fit_m5p(data, min_leaf=min_leaf, smoothing=smoothing)
        params = {"min_leaf": int(min_leaf), "smoothing": bool(smoothing)}
    return SavedModel(
        kind=kind,
        model=model,
        manifest_hash=manifest_hash(data.feature_ids),
        params=params,
        scaler=scaler,
    )


def _node_to_dict(node: Leaf | Split) -> dict:
    if isinstance(node, Leaf):
        return {
            "leaf": True,
            "weights": [float(w) for w in node.model.weights],
            "intercept": node.model.intercept,
            "mean": node.mean,
            "count": node.count,
        }
    return {
        "leaf": False,
        "feature": node.feature,
        "threshold": node.threshold,
        "count": node.count,
        "model": {
            "weights": [float(w) for w in node.model.weights],
            "intercept": node.model.intercept,
        }
        if node.model is not None
        else None,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(obj: dict) -> Leaf | Split:
    if obj["leaf"]:
        model = LinearModel(np.array(obj["weights"]), obj["intercept"])
        return Leaf(model=model, mean=obj["mean"], count=obj["count"])
    model = None
    if obj["model"] is not None:
        model = LinearModel(np.array(obj["model"]["weights"]), obj["model"]["intercept"])
    return Split(
        feature=obj["feature"],
        threshold=obj["threshold"],
        left=_node_from_dict(obj["left"]),
        right=_node_from_dict(obj["right"]),
        count=obj["count"],
        model=model,
    )


def model_to_dict(saved: SavedModel) -> dict:
    out: dict = {
        "kind": saved.kind,
        "params": saved.params,
        "manifest_hash": saved.manifest_hash,
        "standardization": None,
    }
    if saved.scaler is not None:
        out["standardization"] = {
            "means": [float(v) for v in saved.scaler.means],
            "stds": [float(v) for v in saved.scaler.stds],
        }
    if isinstance(saved.model, ModelTree):
        out["tree"] = _node_to_dict(saved.model.root)
        out["smoothing"] = saved.model.smoothing
        out["min_leaf"] = saved.model.min_leaf
        out["feature_ids"] = list(saved.model.feature_ids)
    else:
        out["weights"] = [float(w) for w in saved.model.weights]
        out["intercept"] = saved.model.intercept
        out["lambda"] = saved.model.lam
    return out


def model_from_dict(obj: dict) -> SavedModel:
    scaler = None
    if obj.get("standardization"):
        scaler = Standardizer(
            means=np.array(obj["standardization"]["means"]),
            stds=np.array(obj["standardization"]["stds"]),
        )
    if "tree" in obj:
        model: LinearModel | ModelTree = ModelTree(
            root=_node_from_dict(obj["tree"]),
            smoothing=obj["smoothing"],
            min_leaf=obj["min_leaf"],
            feature_ids=tuple(obj.get("feature_ids", ())),
        )
    else:
        model = LinearModel(
            weights=np.array(obj["weights"]),
            intercept=obj["intercept"],
            kind=obj["kind"],
            lam=obj.get("lambda"),
        )
    return SavedModel(
        kind=obj["kind"],
        model=model,
        manifest_hash=obj["manifest_hash"],
        params=dict(obj.get("params", {})),
        scaler=scaler,
    )


def save_model(saved: SavedModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(saved), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> SavedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
