"""Versioned binary model file, see docs/MODEL_FORMAT.md for the layout.

Magic "RTH1", format version, a section table (CONF / FRST / ENTR), and a
trailing CRC32. Integers are little-endian, reals IEEE-754 binary64; tree
nodes are fixed-width records in breadth-first order. Serialization is
deterministic, so save(load(f)) reproduces f byte for byte.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .codes import InferenceParams
from .descriptor import PyramidConfig
from .errors import (
    BadMagicError,
    ChecksumError,
    ModelIOError,
    TruncatedModelError,
    UnsupportedVersionError,
)
from .forest import Forest, ForestParams, HashForest, Tree
from .index import RetargetModel, words_per_code
from .util import atomic_write_bytes, canonical_json

MAGIC = b"RTH1"
VERSION = 1

# feat_a, feat_b, left, right, alpha: 20-byte packed little-endian record
_NODE_DTYPE = np.dtype(
    [("feat_a", "<u2"), ("feat_b", "<u2"), ("left", "<i4"), ("right", "<i4"), ("alpha", "<f8")]
)
_SECTION = struct.Struct("<4sQQ")


def _forest_payload(model: RetargetModel) -> bytes:
    out = bytearray()
    hf = model.hash_forest
    out += struct.pack("<III", hf.bits, hf.trees_per_forest, hf.dim)
    for forest in hf.forests:
        for tree in forest.trees:
            out += struct.pack("<I", tree.n_nodes)
            nodes = np.empty(tree.n_nodes, dtype=_NODE_DTYPE)
            nodes["feat_a"] = tree.feat_a
            nodes["feat_b"] = tree.feat_b
            nodes["left"] = tree.left
            nodes["right"] = tree.right
            nodes["alpha"] = tree.alpha
            out += nodes.tobytes()
    return bytes(out)


def _entries_payload(model: RetargetModel) -> bytes:
    out = bytearray()
    n = model.num_entries
    out += struct.pack("<III", n, model.codes.shape[1], model.bits)
    out += np.ascontiguousarray(model.codes, dtype="<u8").tobytes()
    out += np.ascontiguousarray(model.frame_idx, dtype="<i8").tobytes()
    out += np.ascontiguousarray(model.scene_ids, dtype="<i8").tobytes()
    for vid in model.video_ids:
        raw = vid.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ModelIOError(f"video id longer than 65535 bytes: {vid[:40]}...")
        out += struct.pack("<H", len(raw))
        out += raw
    return bytes(out)


def serialize(model: RetargetModel) -> bytes:
    sections = [
        (b"CONF", canonical_json(model.config_dict()).encode("utf-8")),
        (b"FRST", _forest_payload(model)),
        (b"ENTR", _entries_payload(model)),
    ]
    header_len = 4 + 2 + 4 + _SECTION.size * len(sections)
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", VERSION)
    out += struct.pack("<I", len(sections))
    offset = header_len
    for name, payload in sections:
        out += _SECTION.pack(name, offset, len(payload))
        offset += len(payload)
    for _, payload in sections:
        out += payload
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def save(model: RetargetModel, path) -> None:
    atomic_write_bytes(path, serialize(model))


class _Reader:
    def __init__(self, buf: memoryview, what: str):
        self.buf = buf
        self.pos = 0
        self.what = what

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise TruncatedModelError(f"file ends inside {self.what}")
        view = self.buf[self.pos : self.pos + n]
        self.pos += n
        return view

    def unpack(self, layout: struct.Struct):
        return layout.unpack(self.take(layout.size))

    def array(self, dtype, count):
        dtype = np.dtype(dtype)
        raw = self.take(dtype.itemsize * count)
        return np.frombuffer(raw, dtype=dtype, count=count).copy()


def _parse_config(payload: memoryview) -> tuple[PyramidConfig, InferenceParams, ForestParams]:
    try:
        conf = json.loads(bytes(payload).decode("utf-8"))
        pyramid = PyramidConfig(
            canonical_size=conf["pyramid"]["canonical_size"],
            patch_sizes=tuple(conf["pyramid"]["patch_sizes"]),
            grid_sizes=tuple(conf["pyramid"]["grid_sizes"]),
            stride_regions=conf["pyramid"]["stride_regions"],
        )
        inference = InferenceParams(**conf["inference"])
        forest = ForestParams(**conf["forest"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelIOError(f"malformed config section: {exc}") from exc
    return pyramid, inference, forest


def _parse_forests(payload: memoryview) -> HashForest:
    reader = _Reader(payload, "forest section")
    bits, trees_per_forest, dim = reader.unpack(struct.Struct("<III"))
    forests = []
    for _ in range(bits):
        trees = []
        for _ in range(trees_per_forest):
            (n_nodes,) = reader.unpack(struct.Struct("<I"))
            nodes = reader.array(_NODE_DTYPE, n_nodes)
            trees.append(Tree(
                feat_a=nodes["feat_a"].astype(np.uint16),
                feat_b=nodes["feat_b"].astype(np.uint16),
                left=nodes["left"].astype(np.int32),
                right=nodes["right"].astype(np.int32),
                alpha=nodes["alpha"].astype(np.float64),
            ))
        forests.append(Forest(trees=trees, dim=dim))
    if reader.pos != len(payload):
        raise ModelIOError("trailing bytes in forest section")
    return HashForest(forests=forests)


def _parse_entries(payload: memoryview, expected_bits: int):
    reader = _Reader(payload, "entries section")
    count, words, bits = reader.unpack(struct.Struct("<III"))
    if bits != expected_bits or words != words_per_code(bits):
        raise ModelIOError(
            f"entries declare {bits} bits x {words} words, expected {expected_bits}"
        )
    codes = reader.array("<u8", count * words).reshape(count, words)
    frame_idx = reader.array("<i8", count)
    scene_ids = reader.array("<i8", count)
    video_ids = []
    for _ in range(count):
        (length,) = reader.unpack(struct.Struct("<H"))
        video_ids.append(bytes(reader.take(length)).decode("utf-8"))
    if reader.pos != len(payload):
        raise ModelIOError("trailing bytes in entries section")
    return codes, video_ids, frame_idx, scene_ids


def deserialize(blob: bytes) -> RetargetModel:
    if len(blob) < len(MAGIC):
        raise TruncatedModelError(f"file of {len(blob)} bytes is too short for the magic")
    if blob[:4] != MAGIC:
        raise BadMagicError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 10:
        raise TruncatedModelError("file ends inside the header")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"format version {version}, this build reads {VERSION}")
    (section_count,) = struct.unpack_from("<I", blob, 6)
    table_end = 10 + _SECTION.size * section_count
    if table_end > len(blob):
        raise TruncatedModelError("file ends inside the section table")
    sections = {}
    for i in range(section_count):
        name, offset, length = _SECTION.unpack_from(blob, 10 + i * _SECTION.size)
        if offset + length > len(blob) - 4:
            raise TruncatedModelError(
                f"section {name!r} extends past the end of the file"
            )
        sections[name] = memoryview(blob)[offset : offset + length]

    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    actual_crc = zlib.crc32(blob[:-4])
    if stored_crc != actual_crc:
        raise ChecksumError(f"crc32 mismatch: stored {stored_crc:#x}, computed {actual_crc:#x}")

    for required in (b"CONF", b"FRST", b"ENTR"):
        if required not in sections:
            raise ModelIOError(f"missing section {required!r}")

    pyramid, inference, forest_params = _parse_config(sections[b"CONF"])
    hash_forest = _parse_forests(sections[b"FRST"])
    codes, video_ids, frame_idx, scene_ids = _parse_entries(sections[b"ENTR"], inference.bits)
    return RetargetModel(
        pyramid=pyramid,
        inference=inference,
        forest_params=forest_params,
        hash_forest=hash_forest,
        codes=codes,
        video_ids=video_ids,
        frame_idx=frame_idx,
        scene_ids=scene_ids,
    )


def load(path) -> RetargetModel:
    try:
        with open(path, "rb") as handle:
            blob = handle.read()
    except OSError as exc:
        raise ModelIOError(f"cannot read model file {path}: {exc}") from exc
    return deserialize(blob)
