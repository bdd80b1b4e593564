"""Isolation forest: random axis-aligned splits isolate anomalies in few
steps. Scores are 2**(-E[path length]/c(psi)) in (0, 1), with the average
unsuccessful-search path c(n) = 2*H(n-1) - 2*(n-1)/n computed from exact
harmonic numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IforestConfig:
    n_trees: int = 120
    subsample: int = 256


@dataclass(frozen=True)
class IsoTree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray    # (nodes,) int64
    threshold: np.ndarray  # (nodes,) float64
    left: np.ndarray       # (nodes,) int64, -1 at leaves
    right: np.ndarray      # (nodes,) int64, -1 at leaves
    size: np.ndarray       # (nodes,) int64, points that reached the node


@dataclass(frozen=True)
class IforestParams:
    trees: tuple
    subsample: int  # actual per-tree sample count psi


def average_path_length(n: int) -> float:
    """c(n): expected path length of an unsuccessful BST search among n points."""
    if n <= 1:
        return 0.0
    harmonic = float(np.sum(1.0 / np.arange(1, n)))  # H(n-1), exact summation
    return 2.0 * harmonic - 2.0 * (n - 1) / n


def _build_tree(X: np.ndarray, indices: np.ndarray, depth_cap: int,
                rng: np.random.Generator) -> IsoTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    size: list[int] = []

    def grow(rows: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(len(rows))
        if depth >= depth_cap or len(rows) <= 1:
            return node
        sub = X[rows]
        lows = sub.min(axis=0)
        highs = sub.max(axis=0)
        splittable = np.flatnonzero(highs > lows)
        if splittable.size == 0:  # duplicate points: split range collapsed
            return node
        dim = int(rng.choice(splittable))
        value = float(rng.uniform(lows[dim], highs[dim]))
        go_left = sub[:, dim] < value
        if not go_left.any() or go_left.all():
            return node
        feature[node] = dim
        threshold[node] = value
        left[node] = grow(rows[go_left], depth + 1)
        right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(indices, 0)
    return IsoTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(size, dtype=np.int64),
    )


def fit(X: np.ndarray, config: IforestConfig = IforestConfig(),
        rng: np.random.Generator | None = None) -> IforestParams:
    """Grow n_trees isolation trees on subsamples of min(subsample, n) points,
    each depth-capped at ceil(log2(psi))."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    rng = np.random.default_rng(0) if rng is None else rng
    psi = min(config.subsample, n)
    depth_cap = max(1, math.ceil(math.log2(psi)))
    trees = tuple(
        _build_tree(X, rng.choice(n, size=psi, replace=False), depth_cap, rng)
        for _ in range(config.n_trees)
    )
    return IforestParams(trees, psi)


def _path_length(tree: IsoTree, x: np.ndarray) -> float:
    node = 0
    depth = 0
    while tree.feature[node] >= 0:
        node = tree.left[node] if x[tree.feature[node]] < tree.threshold[node] else tree.right[node]
        depth += 1
    return depth + average_path_length(int(tree.size[node]))


def score(params: IforestParams, x: np.ndarray) -> float:
    """Anomaly score in (0, 1); shorter average isolation paths score higher."""
    x = np.asarray(x, dtype=np.float64)
    mean_path = float(np.mean([_path_length(tree, x) for tree in params.trees]))
    return float(2.0 ** (-mean_path / average_path_length(params.subsample)))
