"""Label-supervised inference of binary codes for training images.

Each image receives an m-bit code. Bits are assigned one at a time: bit r
is the column minimizing a pairwise quadratic hinge loss on the running
(prefix) Hamming distance, pushing same-scene pairs to distance 0 and
cross-scene pairs past a margin of half the total code length. Columns are
found by seeded random init plus greedy single-flip coordinate descent, so
results are deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class InferenceParams:
    bits: int = 64
    sweeps: int = 20
    seed: int = 0
    pair_budget: int | None = None

    def __post_init__(self):
        if self.bits < 1:
            raise ConfigError("bits must be >= 1")
        if self.sweeps < 1:
            raise ConfigError("sweeps must be >= 1")
        if self.pair_budget is not None and self.pair_budget < 1:
            raise ConfigError("pair_budget must be >= 1 when set")


@dataclass
class BitTrace:
    """Optimization record for one bit column."""

    bit: int
    init_objective: float
    objectives: list[float]  # objective after each sweep
    sweeps: int
    flips: int

    @property
    def final_objective(self) -> float:
        return self.objectives[-1] if self.objectives else self.init_objective


@dataclass
class InferenceReport:
    seed: int
    bits: list[BitTrace] = field(default_factory=list)

    @property
    def total_objective(self) -> float:
        return sum(t.final_objective for t in self.bits)

    @property
    def final_bit_objective(self) -> float:
        return self.bits[-1].final_objective if self.bits else 0.0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "total_objective": self.total_objective,
            "final_bit_objective": self.final_bit_objective,
            "per_bit": [
                {
                    "bit": t.bit,
                    "init_objective": t.init_objective,
                    "final_objective": t.final_objective,
                    "sweeps": t.sweeps,
                    "flips": t.flips,
                }
                for t in self.bits
            ],
        }


def validate_labels(labels) -> np.ndarray:
    arr = np.asarray(labels, dtype=np.int64)
    if arr.ndim != 1:
        raise DataError(f"labels must be 1-d, got shape {arr.shape}")
    return arr


def pair_loss(bit_i: int, bit_j: int, same_scene: int, d_prev: int, total_bits: int) -> float:
    """Quadratic hinge loss of one training pair at the current bit.

    ``d_prev`` is the pair's Hamming distance over the already-fixed bits.
    Same-scene pairs pay the squared distance; cross-scene pairs pay the
    squared shortfall from the margin of half the total code length.
    """
    dist = d_prev + (1 if bit_i != bit_j else 0)
    if same_scene:
        return float(dist * dist)
    shortfall = 0.5 * total_bits - dist
    return float(shortfall * shortfall) if shortfall > 0 else 0.0


def prefix_distances(codes: np.ndarray | None, r: int) -> np.ndarray:
    """Pairwise Hamming distances over the first ``r`` code columns."""
    if r == 0 or codes is None:
        n = 0 if codes is None else codes.shape[0]
        return np.zeros((n, n), dtype=np.int64)
    prefix = np.asarray(codes[:, :r], dtype=np.uint8)
    return (prefix[:, None, :] != prefix[None, :, :]).sum(axis=2, dtype=np.int64)


def _loss_matrix(dist, same, total_bits):
    margin = 0.5 * total_bits
    shortfall = np.maximum(margin - dist, 0.0)
    return np.where(same, dist.astype(np.float64) ** 2, shortfall**2)


def bit_objective(
    column,
    codes: np.ndarray | None,
    r: int,
    labels,
    total_bits: int,
    pair_mask: np.ndarray | None = None,
    d_prev: np.ndarray | None = None,
) -> float:
    """Sum of pair losses over all ordered pairs i != j for one bit column."""
    col = np.asarray(column, dtype=np.uint8)
    lab = validate_labels(labels)
    n = len(lab)
    if d_prev is None:
        d_prev = prefix_distances(codes, r)
        if d_prev.shape[0] != n:
            d_prev = np.zeros((n, n), dtype=np.int64)
    dist = d_prev + (col[:, None] != col[None, :])
    same = lab[:, None] == lab[None, :]
    losses = _loss_matrix(dist, same, total_bits)
    np.fill_diagonal(losses, 0.0)
    if pair_mask is not None:
        losses = losses * pair_mask
    return float(losses.sum())


def sample_pair_mask(labels: np.ndarray, pair_budget: int, rng: np.random.Generator) -> np.ndarray | None:
    """Symmetric participation mask keeping all same-scene pairs.

    Cross-scene pairs are subsampled uniformly to ``pair_budget`` unordered
    pairs; returns None when no subsampling is needed.
    """
    lab = validate_labels(labels)
    n = len(lab)
    iu, ju = np.triu_indices(n, k=1)
    cross = lab[iu] != lab[ju]
    n_cross = int(cross.sum())
    if n_cross <= pair_budget:
        return None
    keep = rng.choice(n_cross, size=pair_budget, replace=False)
    mask = lab[:, None] == lab[None, :]
    ci, cj = iu[cross][keep], ju[cross][keep]
    mask[ci, cj] = True
    mask[cj, ci] = True
    np.fill_diagonal(mask, False)
    return mask


def _flip_weights(d_prev, same, total_bits, pair_mask):
    """Per-pair cost change of turning an agreeing pair into a disagreeing one.

    Same-scene pairs: (d+1)^2 - d^2. Cross-scene: hinge(d+1) - hinge(d),
    which is <= 0. The sweep uses sign flips of these constants, so they
    are computed once per bit.
    """
    margin = 0.5 * total_bits
    h_now = np.maximum(margin - d_prev, 0.0) ** 2
    h_next = np.maximum(margin - (d_prev + 1), 0.0) ** 2
    weights = np.where(same, 2.0 * d_prev + 1.0, h_next - h_now)
    np.fill_diagonal(weights, 0.0)
    if pair_mask is not None:
        weights = weights * pair_mask
    return weights


def optimize_bit(
    codes: np.ndarray | None,
    r: int,
    labels,
    params: InferenceParams,
    *,
    d_prev: np.ndarray | None = None,
    pair_mask: np.ndarray | None = None,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, BitTrace]:
    """Greedy coordinate descent for the column of bit ``r``.

    Starts from a seeded uniform-random column (or ``init``), then sweeps
    images in index order, flipping any bit whose flip strictly lowers the
    objective. Stops after a flip-free sweep or ``params.sweeps`` sweeps.
    """
    lab = validate_labels(labels)
    n = len(lab)
    if d_prev is None:
        d_prev = prefix_distances(codes, r)
        if d_prev.shape[0] != n:
            d_prev = np.zeros((n, n), dtype=np.int64)
    same = lab[:, None] == lab[None, :]

    if init is not None:
        column = np.asarray(init, dtype=np.uint8).copy()
    else:
        rng = np.random.default_rng(np.random.SeedSequence([params.seed, r]))
        column = rng.integers(0, 2, size=n, dtype=np.uint8)

    weights = _flip_weights(d_prev, same, params.bits, pair_mask)
    row_sums = weights.sum(axis=1)

    def objective(col):
        return bit_objective(col, None, 0, lab, params.bits, pair_mask=pair_mask, d_prev=d_prev)

    init_objective = objective(column)
    trace = BitTrace(bit=r, init_objective=init_objective, objectives=[], sweeps=0, flips=0)

    signed = 1.0 - 2.0 * column.astype(np.float64)
    for _ in range(params.sweeps):
        flips = 0
        for i in range(n):
            # Doubling for ordered pairs preserves the sign of the change.
            delta = signed[i] * (row_sums[i] - 2.0 * weights[i] @ column)
            if delta < 0.0:
                column[i] ^= 1
                signed[i] = -signed[i]
                flips += 1
        trace.sweeps += 1
        trace.flips += flips
        trace.objectives.append(objective(column))
        if flips == 0:
            break
    return column, trace


def infer_codes(labels, params: InferenceParams) -> tuple[np.ndarray, InferenceReport]:
    """Assign an m-bit code to every training image.

    Bits are optimized in order; each bit sees the prefix distances left by
    the previous ones. Returns the (n, m) 0/1 matrix and the per-bit report.
    """
    lab = validate_labels(labels)
    n = len(lab)
    if n < 2:
        raise DataError(f"need at least 2 training images, got {n}")

    pair_mask = None
    if params.pair_budget is not None:
        mask_rng = np.random.default_rng(np.random.SeedSequence([params.seed, params.bits]))
        pair_mask = sample_pair_mask(lab, params.pair_budget, mask_rng)

    codes = np.zeros((n, params.bits), dtype=np.uint8)
    d_prev = np.zeros((n, n), dtype=np.int64)
    report = InferenceReport(seed=params.seed)
    for r in range(params.bits):
        column, trace = optimize_bit(
            codes, r, lab, params, d_prev=d_prev, pair_mask=pair_mask
        )
        codes[:, r] = column
        d_prev += column[:, None] != column[None, :]
        report.bits.append(trace)
    return codes, report
