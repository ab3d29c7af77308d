"""Small, deterministic classifiers used for strut analysis.

Two model families, both trained from scratch so every parameter is
reproducible from (data, seed): a bootstrap-aggregated decision-tree
ensemble for candidate filtering and a maximum-margin linear classifier for
coverage calls. Both serialize to plain dicts.
"""

from __future__ import annotations

import numpy as np


class DecisionTree:
    """Binary CART classifier (gini impurity), arrays of node parameters."""

    def __init__(self, max_depth: int = 8, min_leaf: int = 3, max_features: int | None = None):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.prob: list[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> "DecisionTree":
        self.feature, self.threshold = [], []
        self.left, self.right, self.prob = [], [], []
        self._grow(X, y, np.arange(X.shape[0]), 0, rng)
        return self

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.prob.append(0.0)
        return len(self.feature) - 1

    def _grow(self, X, y, idx, depth, rng) -> int:
        node = self._new_node()
        ys = y[idx]
        p = float(ys.mean()) if idx.size else 0.0
        self.prob[node] = p
        if depth >= self.max_depth or idx.size < 2 * self.min_leaf or p in (0.0, 1.0):
            return node
        n_features = X.shape[1]
        k = self.max_features or n_features
        feats = rng.permutation(n_features)[:k]
        best = (np.inf, -1, 0.0)
        for f in feats:
            vals = X[idx, f]
            order = np.argsort(vals, kind="stable")
            sv, sy = vals[order], ys[order]
            # candidate cuts between distinct consecutive values
            distinct = np.flatnonzero(np.diff(sv) > 0)
            if distinct.size == 0:
                continue
            ones = np.cumsum(sy)
            total_ones = ones[-1]
            n = idx.size
            for cut in distinct:
                nl = cut + 1
                nr = n - nl
                if nl < self.min_leaf or nr < self.min_leaf:
                    continue
                ol = ones[cut]
                pl = ol / nl
                pr = (total_ones - ol) / nr
                gini = nl * pl * (1 - pl) + nr * pr * (1 - pr)
                if gini < best[0] - 1e-12:
                    best = (gini, f, (sv[cut] + sv[cut + 1]) / 2.0)
        if best[1] < 0:
            return node
        _, f, thr = best
        go_left = X[idx, f] <= thr
        self.feature[node] = int(f)
        self.threshold[node] = float(thr)
        self.left[node] = self._grow(X, y, idx[go_left], depth + 1, rng)
        self.right[node] = self._grow(X, y, idx[~go_left], depth + 1, rng)
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if X[i, self.feature[node]] <= self.threshold[node] \
                    else self.right[node]
            out[i] = self.prob[node]
        return out

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth, "min_leaf": self.min_leaf,
            "max_features": self.max_features,
            "feature": self.feature, "threshold": self.threshold,
            "left": self.left, "right": self.right, "prob": self.prob,
        }

    @staticmethod
    def from_dict(d: dict) -> "DecisionTree":
        tree = DecisionTree(d["max_depth"], d["min_leaf"], d["max_features"])
        tree.feature = list(d["feature"])
        tree.threshold = list(d["threshold"])
        tree.left = list(d["left"])
        tree.right = list(d["right"])
        tree.prob = list(d["prob"])
        return tree


class BaggedTrees:
    """Bootstrap-aggregated decision trees; the score is the mean leaf vote."""

    def __init__(self, n_trees: int = 25, max_depth: int = 8, min_leaf: int = 3,
                 max_features: str | int | None = "sqrt"):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.trees: list[DecisionTree] = []

    def _resolve_features(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        if self.max_features is None:
            return n_features
        return int(self.max_features)

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int) -> "BaggedTrees":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        k = self._resolve_features(X.shape[1])
        self.trees = []
        seeds = np.random.SeedSequence(seed).spawn(self.n_trees)
        for ss in seeds:
            rng = np.random.default_rng(ss)
            boot = rng.integers(0, X.shape[0], size=X.shape[0])
            tree = DecisionTree(self.max_depth, self.min_leaf, k)
            tree.fit(X[boot], y[boot], rng)
            self.trees.append(tree)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += (tree.predict_proba(X) >= 0.5).astype(np.float64)
        return votes / max(len(self.trees), 1)

    def to_dict(self) -> dict:
        return {
            "type": "bagged_trees", "n_trees": self.n_trees,
            "max_depth": self.max_depth, "min_leaf": self.min_leaf,
            "max_features": self.max_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @staticmethod
    def from_dict(d: dict) -> "BaggedTrees":
        model = BaggedTrees(d["n_trees"], d["max_depth"], d["min_leaf"], d["max_features"])
        model.trees = [DecisionTree.from_dict(t) for t in d["trees"]]
        return model


class LinearMargin:
    """L2-regularized hinge-loss linear classifier (Pegasos-style SGD).

    Features are standardized internally; training is deterministic given
    the seed.
    """

    def __init__(self, lam: float = 1e-3, epochs: int = 40):
        self.lam = lam
        self.epochs = epochs
        self.w: np.ndarray | None = None
        self.b: float = 0.0
        self.mu: np.ndarray | None = None
        self.sigma: np.ndarray | None = None

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mu) / self.sigma

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int) -> "LinearMargin":
        X = np.asarray(X, dtype=np.float64)
        yy = np.where(np.asarray(y) > 0, 1.0, -1.0)
        self.mu = X.mean(axis=0)
        self.sigma = np.maximum(X.std(axis=0), 1e-9)
        Z = self._standardize(X)
        n, d = Z.shape
        rng = np.random.default_rng(seed)
        w = np.zeros(d)
        b = 0.0
        t = 0
        for _ in range(self.epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (self.lam * t)
                margin = yy[i] * (Z[i] @ w + b)
                w *= 1.0 - eta * self.lam
                if margin < 1.0:
                    w += eta * yy[i] * Z[i]
                    b += eta * yy[i] * 0.1
        self.w, self.b = w, b
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        Z = self._standardize(np.asarray(X, dtype=np.float64))
        return Z @ self.w + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_function(X) >= 0.0).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "type": "linear_margin", "lam": self.lam, "epochs": self.epochs,
            "w": self.w.tolist(), "b": self.b,
            "mu": self.mu.tolist(), "sigma": self.sigma.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "LinearMargin":
        model = LinearMargin(d["lam"], d["epochs"])
        model.w = np.asarray(d["w"])
        model.b = float(d["b"])
        model.mu = np.asarray(d["mu"])
        model.sigma = np.asarray(d["sigma"])
        return model
