"""Command-line interface: train / encode / query / eval / synth.

Settings merge three layers: built-in defaults, an optional JSON config
file (--config), and explicit flags, with flags winning. Every output
carries the effective configuration. Exit codes: 0 success, 2 bad
configuration or usage, 3 bad data (manifests, labels, images), 4 IO or
model-file problems.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .codes import InferenceParams
from .descriptor import PyramidConfig
from .errors import ConfigError, DataError, ImageError, ModelIOError
from .evaluate import ProtocolParams, run_protocol
from .forest import ForestParams
from .index import query as run_query
from .manifest import augment_rotations, load_manifest
from .model_io import load as load_model
from .model_io import save as save_model
from .pipeline import append_entries, train_model
from .synth import SynthConfig, generate
from .util import atomic_write_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IO = 4


@dataclass
class RunConfig:
    """Effective settings; every field has a working default."""

    canonical_size: int = 192
    patch_sizes: tuple[int, ...] = (24, 12, 6)
    grid_sizes: tuple[int, ...] = (1, 2, 4)
    stride_regions: int = 1
    bits: int = 64
    sweeps: int = 20
    pair_budget: int | None = None
    trees: int = 100
    depth: int = 10
    min_gain: float = ForestParams().min_gain
    candidate_pairs: int = 128
    bag_fraction: float = 1.0
    clusters: int | None = None
    temporal_smooth: int | None = None
    queries: int = 50
    k: int = 50
    seed: int = 0
    augment_rotations: list[int] | None = None
    sanity_self_query: bool = False

    def pyramid(self) -> PyramidConfig:
        return PyramidConfig(
            canonical_size=self.canonical_size,
            patch_sizes=tuple(self.patch_sizes),
            grid_sizes=tuple(self.grid_sizes),
            stride_regions=self.stride_regions,
        )

    def inference(self) -> InferenceParams:
        return InferenceParams(
            bits=self.bits, sweeps=self.sweeps, seed=self.seed, pair_budget=self.pair_budget
        )

    def forest(self) -> ForestParams:
        return ForestParams(
            trees=self.trees,
            max_depth=self.depth,
            min_gain=self.min_gain,
            candidate_pairs=self.candidate_pairs,
            bag_fraction=self.bag_fraction,
            seed=self.seed,
        )

    def protocol(self) -> ProtocolParams:
        return ProtocolParams(
            pyramid=self.pyramid(),
            inference=self.inference(),
            forest=self.forest(),
            clusters=self.clusters,
            queries=self.queries,
            neighbors=self.k,
            seed=self.seed,
            sanity_self_query=self.sanity_self_query,
            augment_angles=tuple(self.augment_rotations) if self.augment_rotations else None,
            temporal_smooth=self.temporal_smooth,
        )


def _parse_angles(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad --augment-rotations value {raw!r}: {exc}") from exc


def build_config(args) -> RunConfig:
    config = RunConfig()
    valid = {f.name for f in fields(RunConfig)}
    if getattr(args, "config", None):
        try:
            file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in file_values.items():
            if key not in valid:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(config, key, value)
    overrides = {
        "bits": "bits",
        "trees": "trees",
        "depth": "depth",
        "min_gain": "min_gain",
        "clusters": "clusters",
        "queries": "queries",
        "k": "k",
        "seed": "seed",
    }
    for arg_name, field_name in overrides.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            setattr(config, field_name, value)
    if getattr(args, "augment_rotations", None) is not None:
        config.augment_rotations = _parse_angles(args.augment_rotations)
    if getattr(args, "sanity_self_query", False):
        config.sanity_self_query = True
    return config


def _write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    config = build_config(args)
    records = load_manifest(args.manifest)
    if config.augment_rotations:
        records = augment_rotations(records, config.augment_rotations)
    base_dir = Path(args.manifest).parent
    model, report, stages = train_model(
        records,
        base_dir,
        config.pyramid(),
        config.inference(),
        config.forest(),
        clusters=config.clusters,
        cluster_seed=config.seed,
        temporal_smooth=config.temporal_smooth,
    )
    save_model(model, args.out)
    report_path = str(args.out) + ".train.json"
    _write_json(report_path, report)
    for stage, seconds in stages.items():
        print(f"{stage.removesuffix('_s')}: {seconds:.2f}s")
    print(f"model: {args.out} ({model.num_entries} entries, {model.bits} bits)")
    print(f"training report: {report_path}")
    return EXIT_OK


def cmd_encode(args) -> int:
    model = load_model(args.model)
    records = load_manifest(args.manifest)
    extended = append_entries(model, records, Path(args.manifest).parent)
    save_model(extended, args.out)
    print(f"appended {len(records)} entries -> {args.out} ({extended.num_entries} total)")
    return EXIT_OK


def cmd_query(args) -> int:
    model = load_model(args.model)
    try:
        image_bytes = Path(args.image).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read image {args.image}: {exc}") from exc
    result = run_query(model, image_bytes, k=args.k)
    print(result.to_json(indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    config = build_config(args)
    if not args.model and not args.manifest:
        raise ConfigError("eval needs --model or --manifest")
    model = load_model(args.model) if args.model else None
    train_records = load_manifest(args.manifest) if args.manifest else None
    test_records = load_manifest(args.test_manifest)
    report = run_protocol(
        train_records,
        test_records,
        config.protocol(),
        train_base_dir=Path(args.manifest).parent if args.manifest else None,
        test_base_dir=Path(args.test_manifest).parent,
        model=model,
    )
    out = str(args.out)
    _write_json(out + ".json", report.metrics_dict())
    atomic_write_text(out + "_pr.csv", report.pr_csv())
    _write_json(out + "_timing.json", report.timing_dict())
    mean_ms = report.latency["total"]["mean_us"] / 1000.0
    print(
        f"mAP={report.mean_ap:.4f} precision@1={report.precision_at_1:.4f} "
        f"precision@{report.neighbors}={report.precision_at_k:.4f} "
        f"mean_query={mean_ms:.2f}ms over {len(report.per_query)} queries"
    )
    print(f"report: {out}.json  pr: {out}_pr.csv  timing: {out}_timing.json")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        scenes=args.scenes,
        train_views=args.views,
        test_views=args.test_views,
        image_size=args.size,
        seed=args.seed if args.seed is not None else 0,
    )
    train_path, test_path = generate(args.out, cfg)
    print(f"train manifest: {train_path} ({cfg.scenes * cfg.train_views} images)")
    print(f"test manifest: {test_path} ({cfg.scenes * cfg.test_views} images)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenehash",
        description="Scene retargeting: train on a diagnosis video, "
        "retrieve matching scenes from later examinations in Hamming space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--bits", type=int, help="code length in bits")
        p.add_argument("--trees", type=int, help="trees per hashing forest")
        p.add_argument("--depth", type=int, help="maximum tree depth")
        p.add_argument("--min-gain", dest="min_gain", type=float, help="minimum split gain")
        p.add_argument("--clusters", type=int, help="scene count for unlabeled manifests")
        p.add_argument("--seed", type=int, help="global seed")
        p.add_argument(
            "--augment-rotations",
            dest="augment_rotations",
            help="comma-separated right angles, e.g. 0,90,180,270",
        )

    p_train = sub.add_parser("train", help="train a model from a manifest")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--out", required=True, help="model file to write")
    add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_encode = sub.add_parser("encode", help="append encoded images to a model's index")
    p_encode.add_argument("--model", required=True)
    p_encode.add_argument("--manifest", required=True)
    p_encode.add_argument("--out", required=True, help="extended model file to write")
    p_encode.set_defaults(func=cmd_encode)

    p_query = sub.add_parser("query", help="rank index entries for one image")
    p_query.add_argument("--model", required=True)
    p_query.add_argument("image", help="query image path")
    p_query.add_argument("--k", type=int, default=10, help="results to return")
    p_query.set_defaults(func=cmd_query)

    p_eval = sub.add_parser("eval", help="run the retrieval evaluation protocol")
    p_eval.add_argument("--manifest", help="train manifest (trains a fresh model)")
    p_eval.add_argument("--model", help="pre-trained model file (skips training)")
    p_eval.add_argument("--test-manifest", dest="test_manifest", required=True)
    p_eval.add_argument("--out", required=True, help="report path prefix")
    p_eval.add_argument("--queries", type=int, help="query sample size")
    p_eval.add_argument("--k", type=int, help="precision@k cutoff")
    p_eval.add_argument(
        "--sanity-self-query",
        dest="sanity_self_query",
        action="store_true",
        help="allow querying the training video itself",
    )
    add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate the synthetic benchmark")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--scenes", type=int, default=20)
    p_synth.add_argument("--views", type=int, default=30, help="train views per scene")
    p_synth.add_argument("--test-views", dest="test_views", type=int, default=10)
    p_synth.add_argument("--size", type=int, default=192, help="native image size")
    p_synth.add_argument("--seed", type=int)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ImageError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ModelIOError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
