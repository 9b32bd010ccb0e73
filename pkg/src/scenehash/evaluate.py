"""Evaluation protocol: train on a diagnosis video, query with frames from
a surveillance video, score retrieval quality and latency.

Relevance is scene identity: a retrieved entry counts iff its scene id
equals the query's ground-truth label, which the test manifest must carry.
Metric results are deterministic given the seeds; only the latency block
varies run to run, so report serialization keeps it in a separate
document.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import InferenceParams
from .descriptor import PyramidConfig
from .errors import DataError
from .forest import ForestParams
from .index import RetargetModel, query
from .manifest import ManifestRecord, augment_rotations, read_image_bytes
from .metrics import average_precision, latency_stats, mean_pr_curve, precision_at_k
from .pipeline import train_model


@dataclass(frozen=True)
class ProtocolParams:
    pyramid: PyramidConfig = PyramidConfig()
    inference: InferenceParams = InferenceParams()
    forest: ForestParams = ForestParams()
    clusters: int | None = None
    queries: int = 50
    neighbors: int = 50
    seed: int = 0
    sanity_self_query: bool = False
    augment_angles: tuple[int, ...] | None = None
    temporal_smooth: int | None = None

    def protocol_dict(self) -> dict:
        return {
            "clusters": self.clusters,
            "queries": self.queries,
            "neighbors": self.neighbors,
            "seed": self.seed,
            "sanity_self_query": self.sanity_self_query,
            "augment_angles": list(self.augment_angles) if self.augment_angles else None,
            "temporal_smooth": self.temporal_smooth,
        }


@dataclass
class EvalReport:
    precision_at_1: float
    precision_at_k: float
    neighbors: int
    mean_ap: float
    per_query: list[dict]
    pr_curve: list[tuple[float, float]]
    latency: dict
    config: dict
    index_entries: int

    def metrics_dict(self) -> dict:
        """Deterministic part of the report (no wall-clock content)."""
        return {
            "precision_at_1": self.precision_at_1,
            f"precision_at_{self.neighbors}": self.precision_at_k,
            "mean_ap": self.mean_ap,
            "num_queries": len(self.per_query),
            "index_entries": self.index_entries,
            "per_query": self.per_query,
            "pr_curve": [{"recall": r, "precision": p} for r, p in self.pr_curve],
            "config": self.config,
        }

    def timing_dict(self) -> dict:
        return self.latency

    def pr_csv(self) -> str:
        lines = ["recall,precision"]
        lines += [f"{r},{p}" for r, p in self.pr_curve]
        return "\n".join(lines) + "\n"


def _check_protocol_inputs(train_records, test_records, params):
    if not test_records:
        raise DataError("test manifest is empty")
    missing = [r.path for r in test_records if r.scene_label is None]
    if missing:
        raise DataError(
            f"{len(missing)} test records lack ground-truth scene labels "
            f"(first: {missing[0]})"
        )
    if train_records is not None and not params.sanity_self_query:
        train_videos = {r.video_id for r in train_records}
        test_videos = {r.video_id for r in test_records}
        overlap = train_videos & test_videos
        if overlap:
            raise DataError(
                f"train and test share videos {sorted(overlap)}; "
                "use sanity_self_query to allow this deliberately"
            )


def run_protocol(
    train_records: list[ManifestRecord] | None,
    test_records: list[ManifestRecord],
    params: ProtocolParams,
    train_base_dir=None,
    test_base_dir=None,
    model: RetargetModel | None = None,
) -> EvalReport:
    """Train (unless a model is supplied), sample queries, score retrieval.

    Training only ever sees the train manifest; test frames are loaded
    after the model is finished.
    """
    _check_protocol_inputs(train_records, test_records, params)
    if model is None:
        if train_records is None:
            raise DataError("need either a trained model or a train manifest")
        if params.augment_angles:
            train_records = augment_rotations(train_records, params.augment_angles)
        model, _, _ = train_model(
            train_records,
            train_base_dir,
            params.pyramid,
            params.inference,
            params.forest,
            clusters=params.clusters,
            cluster_seed=params.seed,
            temporal_smooth=params.temporal_smooth,
        )

    rng = np.random.default_rng(np.random.SeedSequence([params.seed, len(test_records)]))
    n_queries = min(params.queries, len(test_records))
    chosen = np.sort(rng.choice(len(test_records), size=n_queries, replace=False))

    per_query = []
    relevance_lists = []
    relevant_counts = []
    lat_total, lat_desc, lat_enc, lat_search = [], [], [], []
    for qi in chosen:
        rec = test_records[int(qi)]
        result = query(
            model,
            read_image_bytes(rec, test_base_dir),
            k=None,
            rotation=rec.rotation,
        )
        relevance = (result.scene_ids == rec.scene_label).astype(np.int64)
        n_relevant = int(np.sum(model.scene_ids == rec.scene_label))
        if n_relevant == 0:
            raise DataError(
                f"query {rec.path} has scene {rec.scene_label} with no indexed entries"
            )
        ap = average_precision(relevance, n_relevant)
        per_query.append(
            {
                "path": rec.path,
                "video_id": rec.video_id,
                "frame_idx": rec.frame_idx,
                "rotation": rec.rotation,
                "scene_label": rec.scene_label,
                "ap": ap,
                "p_at_1": precision_at_k(relevance, 1),
                "rank1_id": int(result.ids[0]),
                "rank1_distance": int(result.distances[0]),
            }
        )
        relevance_lists.append(relevance)
        relevant_counts.append(n_relevant)
        lat_total.append(result.total_us)
        lat_desc.append(result.descriptor_us)
        lat_enc.append(result.encode_us)
        lat_search.append(result.search_us)

    report = EvalReport(
        precision_at_1=float(np.mean([q["p_at_1"] for q in per_query])),
        precision_at_k=float(
            np.mean([precision_at_k(rel, params.neighbors) for rel in relevance_lists])
        ),
        neighbors=params.neighbors,
        mean_ap=float(np.mean([q["ap"] for q in per_query])),
        per_query=per_query,
        pr_curve=mean_pr_curve(relevance_lists, relevant_counts),
        latency={
            "total": latency_stats(lat_total),
            "descriptor": latency_stats(lat_desc),
            "encode": latency_stats(lat_enc),
            "search": latency_stats(lat_search),
        },
        config={"model": model.config_dict(), "protocol": params.protocol_dict()},
        index_entries=model.num_entries,
    )
    return report
