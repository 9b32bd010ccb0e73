"""End-to-end training: manifest -> descriptors -> codes -> forests -> index."""

from __future__ import annotations

import time

import numpy as np

from .clustering import cluster_scenes, smooth_temporal
from .codes import InferenceParams, infer_codes
from .descriptor import PyramidConfig, extract
from .errors import DataError
from .forest import ForestParams, train_hash_forest
from .images import GrayImage, load_and_prepare
from .index import RetargetModel, pack_bits
from .manifest import ManifestRecord, read_image_bytes


def load_canonical_images(records, base_dir, pyramid: PyramidConfig) -> list[GrayImage]:
    return [
        load_and_prepare(
            read_image_bytes(rec, base_dir), None, pyramid.canonical_size, rec.rotation
        )
        for rec in records
    ]


def compute_descriptors(images, pyramid: PyramidConfig) -> np.ndarray:
    return np.stack([extract(img, pyramid) for img in images])


def resolve_labels(
    records, images, clusters: int | None, seed: int, temporal_smooth: int | None = None
) -> tuple[np.ndarray, dict | None]:
    """Labels from the manifest when present, otherwise by scene clustering.

    ``temporal_smooth`` (off by default) majority-filters cluster labels
    along each video's frame order, since raw k-means can split a scene
    that is temporally one run.
    """
    labeled = [rec.scene_label is not None for rec in records]
    if all(labeled):
        return np.array([rec.scene_label for rec in records], dtype=np.int64), None
    if any(labeled):
        raise DataError("manifest mixes labeled and unlabeled records")
    if clusters is None:
        raise DataError("unlabeled manifest requires a cluster count")
    labels = cluster_scenes(images, clusters, seed)
    if temporal_smooth:
        by_video = {}
        for i, rec in enumerate(records):
            by_video.setdefault(rec.video_id, []).append(i)
        for indices in by_video.values():
            ordered = sorted(indices, key=lambda i: records[i].frame_idx)
            labels[ordered] = smooth_temporal(labels[ordered], temporal_smooth)
    sizes = np.bincount(labels, minlength=clusters)
    return labels, {
        "k": clusters,
        "seed": seed,
        "temporal_smooth": temporal_smooth,
        "sizes": sizes.tolist(),
    }


def train_model(
    records: list[ManifestRecord],
    base_dir,
    pyramid: PyramidConfig,
    inference: InferenceParams,
    forest_params: ForestParams,
    clusters: int | None = None,
    cluster_seed: int = 0,
    temporal_smooth: int | None = None,
) -> tuple[RetargetModel, dict, dict]:
    """Train the full pipeline on one manifest.

    Returns (model, training report, per-stage wall seconds). The report
    is fully deterministic given the seeds; timings are returned
    separately so callers can print them without polluting report files.
    """
    if not records:
        raise DataError("training manifest is empty")
    if len(records) < 2:
        raise DataError("training needs at least 2 images")
    stages = {}

    t = time.perf_counter()
    images = load_canonical_images(records, base_dir, pyramid)
    descriptors = compute_descriptors(images, pyramid)
    stages["descriptors_s"] = time.perf_counter() - t

    t = time.perf_counter()
    labels, cluster_info = resolve_labels(records, images, clusters, cluster_seed, temporal_smooth)
    stages["labels_s"] = time.perf_counter() - t

    t = time.perf_counter()
    code_matrix, inference_report = infer_codes(labels, inference)
    stages["codes_s"] = time.perf_counter() - t

    t = time.perf_counter()
    hash_forest = train_hash_forest(descriptors, code_matrix, forest_params)
    stages["forests_s"] = time.perf_counter() - t

    t = time.perf_counter()
    encoded = hash_forest.encode_batch(descriptors)
    stages["encode_s"] = time.perf_counter() - t

    model = RetargetModel(
        pyramid=pyramid,
        inference=inference,
        forest_params=forest_params,
        hash_forest=hash_forest,
        codes=pack_bits(encoded),
        video_ids=[rec.video_id for rec in records],
        frame_idx=np.array([rec.frame_idx for rec in records], dtype=np.int64),
        scene_ids=labels.astype(np.int64),
    )
    report = {
        "config": model.config_dict(),
        "n_images": len(records),
        "clustering": cluster_info,
        "inference": inference_report.to_dict(),
        "train_bit_agreement": float(np.mean(encoded == code_matrix)),
    }
    return model, report, stages


def append_entries(model: RetargetModel, records, base_dir) -> RetargetModel:
    """Encode more images with an already-trained model and extend its index."""
    if not records:
        raise DataError("no records to append")
    images = load_canonical_images(records, base_dir, model.pyramid)
    descriptors = compute_descriptors(images, model.pyramid)
    encoded = model.hash_forest.encode_batch(descriptors)
    return RetargetModel(
        pyramid=model.pyramid,
        inference=model.inference,
        forest_params=model.forest_params,
        hash_forest=model.hash_forest,
        codes=np.concatenate([model.codes, pack_bits(encoded)]),
        video_ids=model.video_ids + [rec.video_id for rec in records],
        frame_idx=np.concatenate(
            [model.frame_idx, np.array([rec.frame_idx for rec in records], dtype=np.int64)]
        ),
        scene_ids=np.concatenate(
            [
                model.scene_ids,
                np.array(
                    [-1 if rec.scene_label is None else rec.scene_label for rec in records],
                    dtype=np.int64,
                ),
            ]
        ),
    )
