"""In-memory retrieval index: packed codes, Hamming scan, ranked queries.

Codes are packed into little-endian 64-bit words so a query is one XOR
plus popcount pass over the whole table. Ranking is total and
deterministic: ascending distance, ties broken by ascending entry id.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .codes import InferenceParams
from .descriptor import PyramidConfig, extract
from .errors import DataError
from .forest import ForestParams, HashForest
from .images import load_and_prepare

_BITWISE_COUNT = getattr(np, "bitwise_count", None)
if _BITWISE_COUNT is None:  # numpy < 2.0
    _BYTE_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def _popcount(words: np.ndarray) -> np.ndarray:
    if _BITWISE_COUNT is not None:
        return _BITWISE_COUNT(words)
    return _BYTE_POPCOUNT[words.view(np.uint8)].reshape(*words.shape, 8).sum(axis=-1)


def words_per_code(bits: int) -> int:
    return (bits + 63) // 64


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack 0/1 arrays (..., m) into (..., ceil(m/64)) uint64 words.

    Bit i lands in word i // 64 at position i % 64 (little-endian).
    """
    bits = np.asarray(bits, dtype=np.uint8)
    m = bits.shape[-1]
    width = words_per_code(m) * 64
    padded = np.zeros(bits.shape[:-1] + (width,), dtype=np.uint8)
    padded[..., :m] = bits
    packed = np.packbits(padded, axis=-1, bitorder="little")
    return packed.view(np.dtype("<u8")).reshape(bits.shape[:-1] + (width // 64,))


def unpack_bits(words: np.ndarray, m: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.dtype("<u8"))
    as_bytes = words.view(np.uint8).reshape(words.shape[:-1] + (words.shape[-1] * 8,))
    bits = np.unpackbits(as_bytes, axis=-1, bitorder="little")
    return bits[..., :m]


def hamming(code_a: np.ndarray, code_b: np.ndarray) -> int:
    """Hamming distance between two packed codes of equal word width."""
    a = np.atleast_1d(np.asarray(code_a, dtype=np.uint64))
    b = np.atleast_1d(np.asarray(code_b, dtype=np.uint64))
    if a.shape != b.shape:
        raise DataError(f"code widths differ: {a.shape} vs {b.shape}")
    return int(_popcount(a ^ b).sum())


@dataclass(frozen=True)
class IndexEntry:
    id: int
    code: np.ndarray  # packed uint64 words
    video_id: str
    frame_idx: int
    scene_id: int


@dataclass
class QueryResult:
    """Ranked retrieval outcome plus per-stage timing in microseconds."""

    ids: np.ndarray
    distances: np.ndarray
    scene_ids: np.ndarray
    descriptor_us: float
    encode_us: float
    search_us: float

    @property
    def total_us(self) -> float:
        return self.descriptor_us + self.encode_us + self.search_us

    def to_dict(self) -> dict:
        return {
            "results": [
                {"id": int(i), "distance": int(d), "scene_id": int(s)}
                for i, d, s in zip(self.ids, self.distances, self.scene_ids)
            ],
            "timing_us": {
                "descriptor": self.descriptor_us,
                "encode": self.encode_us,
                "search": self.search_us,
                "total": self.total_us,
            },
        }

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class RetargetModel:
    """Trained pipeline state: descriptor geometry, hash forests, and the
    indexed code table with per-entry metadata."""

    pyramid: PyramidConfig
    inference: InferenceParams
    forest_params: ForestParams
    hash_forest: HashForest
    codes: np.ndarray  # (entries, words) uint64
    video_ids: list[str]
    frame_idx: np.ndarray  # (entries,) int64
    scene_ids: np.ndarray  # (entries,) int64

    def __post_init__(self):
        n = self.codes.shape[0]
        if not (len(self.video_ids) == len(self.frame_idx) == len(self.scene_ids) == n):
            raise DataError("entry metadata arrays must all match the code table length")
        if self.hash_forest.bits != self.inference.bits:
            raise DataError(
                f"forest bit count {self.hash_forest.bits} does not match "
                f"configured {self.inference.bits}"
            )
        if self.codes.shape[1] != words_per_code(self.inference.bits):
            raise DataError("code table width does not match the bit count")

    @property
    def bits(self) -> int:
        return self.inference.bits

    @property
    def num_entries(self) -> int:
        return self.codes.shape[0]

    def entry(self, i: int) -> IndexEntry:
        return IndexEntry(
            id=i,
            code=self.codes[i].copy(),
            video_id=self.video_ids[i],
            frame_idx=int(self.frame_idx[i]),
            scene_id=int(self.scene_ids[i]),
        )

    def config_dict(self) -> dict:
        return {
            "pyramid": {
                "canonical_size": self.pyramid.canonical_size,
                "patch_sizes": list(self.pyramid.patch_sizes),
                "grid_sizes": list(self.pyramid.grid_sizes),
                "stride_regions": self.pyramid.stride_regions,
            },
            "inference": {
                "bits": self.inference.bits,
                "sweeps": self.inference.sweeps,
                "seed": self.inference.seed,
                "pair_budget": self.inference.pair_budget,
            },
            "forest": {
                "trees": self.forest_params.trees,
                "max_depth": self.forest_params.max_depth,
                "min_gain": self.forest_params.min_gain,
                "candidate_pairs": self.forest_params.candidate_pairs,
                "bag_fraction": self.forest_params.bag_fraction,
                "seed": self.forest_params.seed,
            },
        }


def search(model: RetargetModel, code: np.ndarray, k: int | None) -> tuple[np.ndarray, np.ndarray]:
    """Linear popcount scan; returns (ids, distances) of the top-k entries."""
    if model.num_entries == 0:
        raise DataError("cannot query an empty index")
    dists = _popcount(model.codes ^ code[None, :]).sum(axis=1)
    order = np.argsort(dists, kind="stable")
    if k is not None:
        order = order[: max(k, 0)]
    return order.astype(np.int64), dists[order].astype(np.int64)


def query(
    model: RetargetModel,
    image_bytes: bytes,
    k: int | None = None,
    crop_rect: tuple[int, int, int, int] | None = None,
    rotation: int = 0,
) -> QueryResult:
    """Full retrieval: prepare, extract, encode, scan, rank."""
    t0 = time.perf_counter_ns()
    img = load_and_prepare(image_bytes, crop_rect, model.pyramid.canonical_size, rotation)
    descriptor = extract(img, model.pyramid)
    t1 = time.perf_counter_ns()
    code = pack_bits(model.hash_forest.encode(descriptor))
    t2 = time.perf_counter_ns()
    ids, dists = search(model, code, k)
    t3 = time.perf_counter_ns()
    return QueryResult(
        ids=ids,
        distances=dists,
        scene_ids=model.scene_ids[ids],
        descriptor_us=(t1 - t0) / 1000.0,
        encode_us=(t2 - t1) / 1000.0,
        search_us=(t3 - t2) / 1000.0,
    )
