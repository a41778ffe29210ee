"""Regression trees, bagged forests, and gradient-boosted ensembles.

Split search is histogram-based: each feature is quantile-binned once per
fit, and candidate splits are scored from per-bin count/sum accumulators.
The split criterion is squared-error (variance) reduction; each accepted
split's reduction is also accumulated per feature, which is what the
importance analysis reads out. Rows go left when ``value < threshold``;
thresholds are midpoints between adjacent bin edges, and the strict
inequality keeps fit-time bin arithmetic and predict-time comparisons
consistent even when a midpoint collides with a data value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDesign, NonFiniteLoss, PredictorError as TreeFitError


@dataclass
class Binner:
    """Per-feature candidate thresholds from training-data quantiles."""

    thresholds: list[np.ndarray]

    @classmethod
    def fit(cls, x: np.ndarray, max_bins: int = 64) -> "Binner":
        thresholds = []
        for j in range(x.shape[1]):
            uniq = np.unique(x[:, j])
            if len(uniq) <= 1:
                thresholds.append(np.empty(0))
                continue
            mids = (uniq[:-1] + uniq[1:]) / 2.0
            if len(mids) > max_bins - 1:
                pick = np.linspace(0, len(mids) - 1, max_bins - 1).round().astype(int)
                mids = mids[np.unique(pick)]
            thresholds.append(mids)
        return cls(thresholds)

    def code(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(x.shape, dtype=np.int32)
        for j, thr in enumerate(self.thresholds):
            if len(thr):
                out[:, j] = np.searchsorted(thr, x[:, j], side="right")
        return out


@dataclass
class Tree:
    """Flattened tree: parallel arrays over nodes; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray  # squared-error reduction at internal nodes

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            f = feat[rows]
            goes_left = x[rows, f] < self.threshold[node[rows]]
            node[rows] = np.where(
                goes_left, self.left[node[rows]], self.right[node[rows]]
            )
        return self.value[node]

    def feature_importance(self, n_features: int) -> np.ndarray:
        imp = np.zeros(n_features)
        internal = self.feature >= 0
        np.add.at(imp, self.feature[internal], self.gain[internal])
        return imp

    def max_depth(self) -> int:
        depth = {0: 0}
        best = 0
        for i in range(len(self.feature)):
            d = depth[i]
            best = max(best, d)
            if self.feature[i] >= 0:
                depth[int(self.left[i])] = d + 1
                depth[int(self.right[i])] = d + 1
        return best

    def to_records(self) -> list[dict]:
        return [
            {
                "feature": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "left": int(self.left[i]),
                "right": int(self.right[i]),
                "value": float(self.value[i]),
                "n": int(self.n_samples[i]),
                "gain": float(self.gain[i]),
            }
            for i in range(len(self.feature))
        ]

    @classmethod
    def from_records(cls, records: list[dict]) -> "Tree":
        return cls(
            feature=np.array([r["feature"] for r in records], dtype=np.int64),
            threshold=np.array([r["threshold"] for r in records]),
            left=np.array([r["left"] for r in records], dtype=np.int64),
            right=np.array([r["right"] for r in records], dtype=np.int64),
            value=np.array([r["value"] for r in records]),
            n_samples=np.array([r["n"] for r in records], dtype=np.int64),
            gain=np.array([r["gain"] for r in records]),
        )


def _grow_tree(
    codes: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    binner: Binner,
    max_depth: int,
    min_leaf: int,
    feature_fraction: float,
    rng: np.random.Generator,
) -> Tree:
    n_features = codes.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    n_samples: list[int] = []
    gain_list: list[float] = []

    def new_node(rows_here: np.ndarray) -> int:
        idx = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows_here].mean()))
        n_samples.append(len(rows_here))
        gain_list.append(0.0)
        return idx

    def best_split(rows_here: np.ndarray, candidates: np.ndarray):
        yh = y[rows_here]
        total_n = len(rows_here)
        total_s = float(yh.sum())
        parent = total_s * total_s / total_n
        best = (1e-12, -1, -1)  # (gain, feature, bin)
        for f in candidates:
            thr = binner.thresholds[f]
            if not len(thr):
                continue
            c = codes[rows_here, f]
            nbins = len(thr) + 1
            counts = np.bincount(c, minlength=nbins)
            sums = np.bincount(c, weights=yh, minlength=nbins)
            n_left = np.cumsum(counts)[:-1]
            s_left = np.cumsum(sums)[:-1]
            n_right = total_n - n_left
            s_right = total_s - s_left
            valid = (n_left >= min_leaf) & (n_right >= min_leaf)
            if not valid.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                gains = np.where(
                    valid,
                    s_left**2 / np.maximum(n_left, 1)
                    + s_right**2 / np.maximum(n_right, 1)
                    - parent,
                    -np.inf,
                )
            b = int(np.argmax(gains))
            if gains[b] > best[0]:
                best = (float(gains[b]), int(f), b)
        return best

    stack = [(new_node(rows), rows, 0)]
    while stack:
        node_id, rows_here, depth = stack.pop()
        if (
            depth >= max_depth
            or len(rows_here) < 2 * min_leaf
            or np.all(y[rows_here] == y[rows_here][0])
        ):
            continue
        if feature_fraction < 1.0:
            k = max(1, int(round(n_features * feature_fraction)))
            candidates = np.sort(rng.choice(n_features, size=k, replace=False))
        else:
            candidates = np.arange(n_features)
        gain, f, b = best_split(rows_here, candidates)
        if f < 0:
            continue
        thr = float(binner.thresholds[f][b])
        mask = codes[rows_here, f] <= b
        left_rows = rows_here[mask]
        right_rows = rows_here[~mask]
        feature[node_id] = f
        threshold[node_id] = thr
        gain_list[node_id] = gain
        lid = new_node(left_rows)
        rid = new_node(right_rows)
        left[node_id] = lid
        right[node_id] = rid
        stack.append((rid, right_rows, depth + 1))
        stack.append((lid, left_rows, depth + 1))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value),
        n_samples=np.array(n_samples, dtype=np.int64),
        gain=np.array(gain_list),
    )


def _check_input(x: np.ndarray, y: np.ndarray) -> None:
    if len(y) == 0:
        raise DegenerateDesign("no training rows")
    if np.std(y) == 0.0:
        raise DegenerateDesign("zero-variance target")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise TreeFitError("non-finite training data")


@dataclass
class RandomForest:
    trees: list[Tree]
    n_features: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if not self.trees:
            raise TreeFitError("empty forest")
        acc = np.zeros(len(x))
        for tree in self.trees:
            acc += tree.predict(x)
        return acc / len(self.trees)

    def feature_importance(self) -> np.ndarray:
        imp = np.zeros(self.n_features)
        for tree in self.trees:
            imp += tree.feature_importance(self.n_features)
        return imp


def fit_random_forest(
    x: np.ndarray,
    y: np.ndarray,
    n_trees: int = 300,
    max_depth: int = 12,
    min_leaf: int = 5,
    feature_fraction: float = 1.0 / 3.0,
    seed: int = 0,
) -> RandomForest:
    """Bagged trees: bootstrap rows per tree, feature subsample per split."""
    _check_input(x, y)
    binner = Binner.fit(x)
    codes = binner.code(x)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        rows = rng.integers(0, len(y), len(y))
        trees.append(
            _grow_tree(codes, x, y, rows, binner, max_depth, min_leaf,
                       feature_fraction, rng)
        )
    return RandomForest(trees=trees, n_features=x.shape[1])


@dataclass
class GradientBoost:
    base_score: float
    learning_rate: float
    trees: list[Tree]
    n_features: int
    train_losses: list[float] = field(default_factory=list)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        acc = np.full(len(x), self.base_score)
        for tree in self.trees:
            acc += self.learning_rate * tree.predict(x)
        return acc

    def feature_importance(self) -> np.ndarray:
        imp = np.zeros(self.n_features)
        for tree in self.trees:
            imp += tree.feature_importance(self.n_features)
        return imp


def fit_gradient_boost(
    x: np.ndarray,
    y: np.ndarray,
    n_trees: int = 300,
    max_depth: int = 3,
    learning_rate: float = 0.05,
    subsample: float = 0.8,
    min_leaf: int = 5,
    seed: int = 0,
) -> GradientBoost:
    """Squared-error boosting: each round fits residuals on a row subsample.

    ``train_losses`` records full-training MSE after every round; with
    ``subsample=1.0`` the sequence is provably non-increasing.
    """
    _check_input(x, y)
    binner = Binner.fit(x)
    codes = binner.code(x)
    base = float(y.mean())
    pred = np.full(len(y), base)
    model = GradientBoost(
        base_score=base, learning_rate=learning_rate, trees=[], n_features=x.shape[1]
    )
    model.train_losses.append(float(np.mean((y - pred) ** 2)))
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        resid = y - pred
        if subsample < 1.0:
            k = max(1, int(round(len(y) * subsample)))
            rows = np.sort(rng.choice(len(y), size=k, replace=False))
        else:
            rows = np.arange(len(y))
        tree = _grow_tree(
            codes, x, resid, rows, binner, max_depth, min_leaf, 1.0, rng
        )
        pred = pred + learning_rate * tree.predict(x)
        loss = float(np.mean((y - pred) ** 2))
        if not np.isfinite(loss):
            raise NonFiniteLoss("non-finite boosting loss")
        model.trees.append(tree)
        model.train_losses.append(loss)
    return model
