"""Random-forest hashing functions, one forest per code bit.

Every tree is grown on a bootstrap sample with split tests of the form
``descriptor[a] > descriptor[b]`` over randomly drawn element pairs,
choosing at each node the candidate pair with the largest information
gain. A forest predicts a bit by averaging its trees' leaf fractions and
thresholding at 0.5 (exact 0.5 rounds to 1). Training is deterministic
given the seed, regardless of thread schedule.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .util import worker_count


@dataclass(frozen=True)
class ForestParams:
    trees: int = 100
    max_depth: int = 10
    min_gain: float = math.exp(-10)
    candidate_pairs: int = 128
    bag_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.trees < 1:
            raise ConfigError("trees must be >= 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.min_gain < 0:
            raise ConfigError("min_gain must be >= 0")
        if self.candidate_pairs < 1:
            raise ConfigError("candidate_pairs must be >= 1")
        if not 0 < self.bag_fraction <= 1:
            raise ConfigError("bag_fraction must be in (0, 1]")


def entropy(count0: int, count1: int) -> float:
    """Shannon entropy (base 2) of a two-label multiset, in [0, 1]."""
    total = count0 + count1
    if total < 1:
        raise ValueError("entropy of an empty set is undefined")
    value = 0.0
    for count in (count0, count1):
        if count > 0:
            p = count / total
            value -= p * math.log2(p)
    return value


def info_gain(parent, left, right) -> float:
    """Entropy reduction of splitting ``parent`` into ``left`` and ``right``."""
    parent = np.asarray(parent)
    left = np.asarray(left)
    right = np.asarray(right)
    if parent.size == 0:
        raise ValueError("cannot split an empty set")
    if left.size + right.size != parent.size:
        raise ValueError("left and right must partition the parent")

    def _ent(labels):
        if labels.size == 0:
            return 0.0
        ones = int(np.sum(labels))
        return entropy(labels.size - ones, ones)

    weighted = (left.size * _ent(left) + right.size * _ent(right)) / parent.size
    return _ent(parent) - weighted


def _entropy_counts(c0, c1):
    """Vectorized two-label entropy; empty sets map to 0."""
    total = c0 + c1
    safe = np.maximum(total, 1)
    out = np.zeros_like(total, dtype=np.float64)
    for c in (c0, c1):
        p = c / safe
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(c > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        out += term
    return out


@dataclass
class Tree:
    """Binary decision tree in breadth-first array layout.

    ``left``/``right`` hold child node indices, -1 at leaves. ``alpha`` is
    the node's fraction of label-1 training points (meaningful for
    prediction at leaves, recorded everywhere).
    """

    feat_a: np.ndarray  # (nodes,) uint16
    feat_b: np.ndarray  # (nodes,) uint16
    left: np.ndarray  # (nodes,) int32
    right: np.ndarray  # (nodes,) int32
    alpha: np.ndarray  # (nodes,) float64

    @property
    def n_nodes(self) -> int:
        return len(self.alpha)

    def node_depths(self) -> np.ndarray:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.left[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return depths

    @property
    def depth(self) -> int:
        return int(self.node_depths().max())

    def leaf_alpha(self, x: np.ndarray) -> float:
        node = 0
        while self.left[node] >= 0:
            node = self.right[node] if x[self.feat_a[node]] > x[self.feat_b[node]] else self.left[node]
        return float(self.alpha[node])


def _draw_pairs(rng: np.random.Generator, dim: int, count: int):
    a = rng.integers(0, dim, size=count)
    b = rng.integers(0, dim, size=count)
    clash = a == b
    while clash.any():
        b[clash] = rng.integers(0, dim, size=int(clash.sum()))
        clash = a == b
    return a, b


def train_tree(data: np.ndarray, bits: np.ndarray, params: ForestParams, rng: np.random.Generator) -> Tree:
    """Grow one tree on (descriptor, bit) pairs.

    Nodes become leaves when they are pure, the depth limit is reached, or
    no candidate pair clears the minimum gain (an empty-child split has
    gain 0, so it never survives a positive threshold).
    """
    data = np.asarray(data, dtype=np.float64)
    bits = np.asarray(bits, dtype=np.float64)
    n, dim = data.shape
    if n < 1:
        raise DataError("cannot train a tree on an empty sample")

    feat_a, feat_b, left, right, alpha = [], [], [], [], []

    def new_node():
        feat_a.append(0)
        feat_b.append(0)
        left.append(-1)
        right.append(-1)
        alpha.append(0.0)
        return len(alpha) - 1

    queue = deque()
    queue.append((new_node(), np.arange(n), 0))
    while queue:
        node, idx, depth = queue.popleft()
        n_idx = len(idx)
        ones = float(bits[idx].sum())
        alpha[node] = ones / n_idx
        if depth >= params.max_depth or ones == 0.0 or ones == float(n_idx):
            continue

        cand_a, cand_b = _draw_pairs(rng, dim, params.candidate_pairs)
        goes_right = (data[np.ix_(idx, cand_a)] > data[np.ix_(idx, cand_b)]).astype(np.float64)
        n_right = goes_right.sum(axis=0)
        ones_right = bits[idx] @ goes_right
        n_left = n_idx - n_right
        ones_left = ones - ones_right
        parent_entropy = entropy(int(n_idx - ones), int(ones))
        child_entropy = (
            n_left * _entropy_counts(n_left - ones_left, ones_left)
            + n_right * _entropy_counts(n_right - ones_right, ones_right)
        ) / n_idx
        gains = parent_entropy - child_entropy
        best = int(np.argmax(gains))
        if gains[best] < params.min_gain:
            continue
        if n_left[best] == 0 or n_right[best] == 0:
            continue

        mask = goes_right[:, best].astype(bool)
        feat_a[node] = int(cand_a[best])
        feat_b[node] = int(cand_b[best])
        left[node] = new_node()
        right[node] = new_node()
        queue.append((left[node], idx[~mask], depth + 1))
        queue.append((right[node], idx[mask], depth + 1))

    return Tree(
        feat_a=np.asarray(feat_a, dtype=np.uint16),
        feat_b=np.asarray(feat_b, dtype=np.uint16),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        alpha=np.asarray(alpha, dtype=np.float64),
    )


@dataclass
class Forest:
    """Tree ensemble answering a single code bit."""

    trees: list[Tree]
    dim: int
    _packed: dict = field(default=None, repr=False, compare=False)

    def _pack(self):
        if self._packed is None:
            offsets = np.cumsum([0] + [t.n_nodes for t in self.trees])
            self._packed = {
                "feat_a": np.concatenate([t.feat_a for t in self.trees]).astype(np.intp),
                "feat_b": np.concatenate([t.feat_b for t in self.trees]).astype(np.intp),
                "left": np.concatenate(
                    [np.where(t.left < 0, t.left, t.left + off) for t, off in zip(self.trees, offsets)]
                ),
                "right": np.concatenate(
                    [np.where(t.right < 0, t.right, t.right + off) for t, off in zip(self.trees, offsets)]
                ),
                "alpha": np.concatenate([t.alpha for t in self.trees]),
                "roots": offsets[:-1].astype(np.int64),
                "depth": max(t.depth for t in self.trees),
            }
        return self._packed

    def mean_alpha(self, x: np.ndarray) -> float:
        """Average of per-tree leaf fractions for one descriptor."""
        p = self._pack()
        cur = p["roots"].copy()
        for _ in range(p["depth"]):
            interior = p["left"][cur] >= 0
            go_right = x[p["feat_a"][cur]] > x[p["feat_b"][cur]]
            step = np.where(go_right, p["right"][cur], p["left"][cur])
            cur = np.where(interior, step, cur)
        return float(p["alpha"][cur].mean())


def hash_bit(forest: Forest, x: np.ndarray) -> int:
    """Forest vote for one bit: 0 below 0.5 mean response, 1 otherwise."""
    return 0 if forest.mean_alpha(np.asarray(x, dtype=np.float64)) < 0.5 else 1


def train_forest_for_bit(
    data: np.ndarray,
    bit_column: np.ndarray,
    params: ForestParams,
    *,
    bit_index: int = 0,
) -> Forest:
    """Train one forest: every tree gets its own bootstrap sample and RNG
    stream derived from (seed, bit_index, tree index)."""
    data = np.asarray(data, dtype=np.float64)
    bit_column = np.asarray(bit_column)
    n = data.shape[0]
    if n < 1:
        raise DataError("cannot train a forest on an empty sample")
    tree_seeds = np.random.SeedSequence([params.seed, bit_index]).spawn(params.trees)
    draws = max(1, round(params.bag_fraction * n))

    def grow(seed_seq):
        rng = np.random.default_rng(seed_seq)
        sample = rng.integers(0, n, size=draws)
        return train_tree(data[sample], bit_column[sample], params, rng)

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(grow, tree_seeds))
    else:
        trees = [grow(s) for s in tree_seeds]
    return Forest(trees=trees, dim=data.shape[1])


@dataclass
class HashForest:
    """All per-bit forests plus a packed table for fast batch encoding."""

    forests: list[Forest]
    _packed: dict = field(default=None, repr=False, compare=False)

    @property
    def bits(self) -> int:
        return len(self.forests)

    @property
    def dim(self) -> int:
        return self.forests[0].dim

    @property
    def trees_per_forest(self) -> int:
        return len(self.forests[0].trees)

    def _pack(self):
        if self._packed is None:
            all_trees = [t for f in self.forests for t in f.trees]
            offsets = np.cumsum([0] + [t.n_nodes for t in all_trees])
            self._packed = {
                "feat_a": np.concatenate([t.feat_a for t in all_trees]).astype(np.intp),
                "feat_b": np.concatenate([t.feat_b for t in all_trees]).astype(np.intp),
                "left": np.concatenate(
                    [np.where(t.left < 0, t.left, t.left + off) for t, off in zip(all_trees, offsets)]
                ),
                "right": np.concatenate(
                    [np.where(t.right < 0, t.right, t.right + off) for t, off in zip(all_trees, offsets)]
                ),
                "alpha": np.concatenate([t.alpha for t in all_trees]),
                "roots": offsets[:-1].astype(np.int64),
                "depth": max(t.depth for t in all_trees),
            }
        return self._packed

    def encode(self, x: np.ndarray) -> np.ndarray:
        """m-bit code of one descriptor, bit i from forest i."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DataError(f"descriptor shape {x.shape} does not match ({self.dim},)")
        return self.encode_batch(x[None, :])[0]

    def encode_batch(self, xs: np.ndarray, chunk: int = 128) -> np.ndarray:
        """Codes for a stack of descriptors, vectorized across all trees."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise DataError(f"descriptor batch shape {xs.shape} does not match (*, {self.dim})")
        p = self._pack()
        t_per = self.trees_per_forest
        out = np.empty((xs.shape[0], self.bits), dtype=np.uint8)
        for start in range(0, xs.shape[0], chunk):
            block = xs[start : start + chunk]
            cur = np.broadcast_to(p["roots"], (block.shape[0], len(p["roots"]))).copy()
            for _ in range(p["depth"]):
                interior = p["left"][cur] >= 0
                va = np.take_along_axis(block, p["feat_a"][cur], axis=1)
                vb = np.take_along_axis(block, p["feat_b"][cur], axis=1)
                step = np.where(va > vb, p["right"][cur], p["left"][cur])
                cur = np.where(interior, step, cur)
            alphas = p["alpha"][cur].reshape(block.shape[0], self.bits, t_per)
            out[start : start + chunk] = (alphas.mean(axis=2) >= 0.5).astype(np.uint8)
        return out


def encode(hash_forest: HashForest, x: np.ndarray) -> np.ndarray:
    return hash_forest.encode(x)


def train_hash_forest(data: np.ndarray, codes: np.ndarray, params: ForestParams) -> HashForest:
    """One forest per code column, trained against the inferred bits."""
    data = np.asarray(data, dtype=np.float64)
    codes = np.asarray(codes)
    if codes.shape[0] != data.shape[0]:
        raise DataError(
            f"{data.shape[0]} descriptors but {codes.shape[0]} code rows"
        )
    forests = [
        train_forest_for_bit(data, codes[:, i], params, bit_index=i)
        for i in range(codes.shape[1])
    ]
    return HashForest(forests=forests)
