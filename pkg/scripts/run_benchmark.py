#!/usr/bin/env python3
"""Run the synthetic retargeting benchmark end to end and print a summary.

Generates the dataset (unless the output directory already has one),
trains the full pipeline, evaluates retrieval quality and latency, and
optionally repeats the evaluation with shuffled training labels as a
chance control.

Example:
    python3 scripts/run_benchmark.py --out /tmp/bench --seed 7 --control
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from scenehash.codes import InferenceParams
from scenehash.descriptor import PyramidConfig
from scenehash.evaluate import ProtocolParams, run_protocol
from scenehash.forest import ForestParams
from scenehash.manifest import ManifestRecord, load_manifest
from scenehash.synth import SynthConfig, generate


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="benchmark working directory")
    parser.add_argument("--scenes", type=int, default=20)
    parser.add_argument("--views", type=int, default=30)
    parser.add_argument("--test-views", type=int, default=10)
    parser.add_argument("--bits", type=int, default=64)
    parser.add_argument("--trees", type=int, default=100)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument(
        "--control", action="store_true",
        help="also evaluate a pipeline trained on shuffled labels",
    )
    args = parser.parse_args()

    out = Path(args.out)
    train_manifest = out / "train.jsonl"
    if not train_manifest.exists():
        t0 = time.time()
        generate(out, SynthConfig(
            scenes=args.scenes, train_views=args.views,
            test_views=args.test_views, seed=args.seed,
        ))
        print(f"generated dataset in {time.time() - t0:.1f}s -> {out}")
    train_records = load_manifest(train_manifest)
    test_records = load_manifest(out / "test.jsonl")

    params = ProtocolParams(
        pyramid=PyramidConfig(),
        inference=InferenceParams(bits=args.bits, seed=args.seed),
        forest=ForestParams(trees=args.trees, seed=args.seed),
        queries=args.queries,
        neighbors=50,
        seed=args.seed,
    )

    t0 = time.time()
    report = run_protocol(
        train_records, test_records, params,
        train_base_dir=out, test_base_dir=out,
    )
    elapsed = time.time() - t0
    lat = report.latency
    print(f"\ntrain+eval: {elapsed:.1f}s  "
          f"({len(train_records)} train images, {len(report.per_query)} queries, "
          f"{args.bits}-bit codes, {args.trees} trees)")
    print(f"precision@1      {report.precision_at_1:.4f}")
    print(f"precision@{report.neighbors:<7} {report.precision_at_k:.4f}")
    print(f"mAP              {report.mean_ap:.4f}")
    print(f"query latency    mean {lat['total']['mean_us']/1000:.2f}ms  "
          f"median {lat['total']['median_us']/1000:.2f}ms  "
          f"p95 {lat['total']['p95_us']/1000:.2f}ms")
    print(f"  descriptor     mean {lat['descriptor']['mean_us']/1000:.2f}ms")
    print(f"  encode         mean {lat['encode']['mean_us']/1000:.2f}ms")
    print(f"  search         mean {lat['search']['mean_us']/1000:.2f}ms")

    if args.control:
        rng = np.random.default_rng(args.seed)
        labels = np.array([r.scene_label for r in train_records])
        rng.shuffle(labels)
        shuffled = [
            ManifestRecord(r.path, r.video_id, r.frame_idx, int(lbl))
            for r, lbl in zip(train_records, labels)
        ]
        control = run_protocol(
            shuffled, test_records, params,
            train_base_dir=out, test_base_dir=out,
        )
        print(f"\nchance control (shuffled training labels):")
        print(f"precision@1      {control.precision_at_1:.4f}")
        print(f"mAP              {control.mean_ap:.4f}")


if __name__ == "__main__":
    main()
