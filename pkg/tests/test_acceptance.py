"""Acceptance suite: every criterion the toolkit must meet, one test each.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion; a pytest failure marks the corresponding criterion as failed.
The heavyweight fixtures (full-scale synthetic benchmark and its trained
model) are shared across criteria.
"""

import json
from itertools import product
from pathlib import Path

import numpy as np
import pytest

from scenehash.cli import main as cli_main
from scenehash.codes import InferenceParams, infer_codes, optimize_bit, pair_loss
from scenehash.descriptor import PyramidConfig, extract
from scenehash.evaluate import ProtocolParams, run_protocol
from scenehash.forest import ForestParams, entropy, info_gain
from scenehash.images import from_array
from scenehash.index import RetargetModel, hamming, pack_bits, query
from scenehash.manifest import ManifestRecord, load_manifest, read_image_bytes
from scenehash.metrics import average_precision, precision_at_k
from scenehash.model_io import deserialize, load as load_model, save as save_model, serialize
from scenehash.pipeline import train_model
from scenehash.synth import SynthConfig, generate

from conftest import small_pyramid

BENCH_SEED = 7


def _ok(criterion, detail):
    print(f"ACCEPTANCE PASS criterion {criterion}: {detail}")


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    """Full-scale synthetic benchmark: 20 scenes x 30 train / 10 test views."""
    root = tmp_path_factory.mktemp("bench")
    train_path, test_path = generate(root, SynthConfig(seed=BENCH_SEED))
    return {
        "root": root,
        "train_records": load_manifest(train_path),
        "test_records": load_manifest(test_path),
        "test_path": test_path,
    }


@pytest.fixture(scope="module")
def bench_model(bench):
    """Pipeline trained on the benchmark at the reference settings
    (64-bit codes, 100 trees, depth 10)."""
    model, report, _ = train_model(
        bench["train_records"],
        bench["root"],
        PyramidConfig(),
        InferenceParams(bits=64, seed=BENCH_SEED),
        ForestParams(trees=100, seed=BENCH_SEED),
    )
    return {"model": model, "report": report}


class TestCriterion1DescriptorShapeAndAnchors:
    def test_descriptor_shape_and_anchors(self):
        config = PyramidConfig()
        rng = np.random.default_rng(101)

        desc = extract(from_array(rng.uniform(0, 255, (192, 192))), config)
        assert desc.shape == (496,)

        uniform = extract(from_array(np.full((192, 192), 31.0)), config)
        assert np.all(uniform[0::16] == 1.0)
        rest = np.ones(496, dtype=bool)
        rest[0::16] = False
        assert np.all(uniform[rest] == 0.0)

        mismatches = 0
        for _ in range(100):
            data = rng.uniform(0, 255, (192, 192))
            a = rng.uniform(0.2, 3.0)
            b = rng.uniform(-80.0, 80.0)
            if not np.array_equal(
                extract(from_array(data), config), extract(from_array(a * data + b), config)
            ):
                mismatches += 1
        assert mismatches == 0
        _ok(1, "496-d shape, uniform delta blocks, affine invariance 100/100 bit-exact")


class TestCriterion2FormulaUnitSuite:
    TOL = 1e-6

    def test_formula_examples(self):
        # pairwise hinge loss
        assert abs(pair_loss(0, 0, 1, 0, 64) - 0.0) < self.TOL
        assert abs(pair_loss(0, 0, 0, 0, 64) - 1024.0) < self.TOL
        assert abs(pair_loss(0, 0, 0, 40, 64) - 0.0) < self.TOL
        assert abs(pair_loss(1, 1, 0, 40, 64) - 0.0) < self.TOL
        assert abs(pair_loss(0, 1, 1, 2, 64) - 9.0) < self.TOL

        # entropy
        assert abs(entropy(4, 4) - 1.0) < self.TOL
        assert abs(entropy(7, 0) - 0.0) < self.TOL
        assert abs(entropy(3, 1) - 0.811278) < self.TOL

        # information gain
        assert abs(info_gain([0, 0, 1, 1], [0, 0], [1, 1]) - 1.0) < self.TOL
        assert abs(info_gain([0, 0, 1, 1], [0, 1], [0, 1]) - 0.0) < self.TOL
        assert abs(info_gain([0, 0, 0, 1], [0, 0], [0, 1]) - 0.311278) < self.TOL

        # Hamming distance on packed codes
        code = pack_bits(np.array([1, 0, 1, 1, 0], dtype=np.uint8))
        assert hamming(code, code) == 0
        zeros = pack_bits(np.zeros(4, dtype=np.uint8))
        ones = pack_bits(np.ones(4, dtype=np.uint8))
        assert hamming(zeros, ones) == 4
        a = pack_bits(np.array([0, 1, 1, 0, 1], dtype=np.uint8))
        b = pack_bits(np.array([1, 1, 1, 0, 0], dtype=np.uint8))
        assert hamming(a, b) == 2

        # average precision
        assert abs(average_precision([1, 1, 1]) - 1.0) < self.TOL
        assert abs(average_precision([1, 0, 1]) - (1.0 + 2.0 / 3.0) / 2.0) < self.TOL
        assert abs(average_precision([0, 0, 1]) - 1.0 / 3.0) < self.TOL

        # precision@k
        assert abs(precision_at_k([1, 0, 0], 1) - 1.0) < self.TOL
        assert abs(precision_at_k([1, 0, 1, 0], 4) - 0.5) < self.TOL
        assert abs(precision_at_k([1, 1, 0], 2) - 1.0) < self.TOL
        _ok(2, "pair-loss/entropy/gain/hamming/AP/P@k examples reproduced to 1e-6")


class TestCriterion3OptimizerProperties:
    def test_traces_nonincreasing_on_50_runs(self):
        rng = np.random.default_rng(103)
        for seed in range(50):
            labels = rng.integers(0, 4, size=14)
            params = InferenceParams(bits=8, sweeps=20, seed=seed)
            _, trace = optimize_bit(None, 0, labels, params)
            values = [trace.init_objective] + trace.objectives
            assert all(a >= b for a, b in zip(values, values[1:])), f"seed {seed}"

    def test_exhaustive_oracle_match_rate(self):
        labels = np.array([0, 0, 0, 1, 1, 1])

        def naive(column):
            total = 0.0
            for i in range(6):
                for j in range(6):
                    if i != j:
                        total += pair_loss(
                            int(column[i]), int(column[j]),
                            int(labels[i] == labels[j]), 0, 1,
                        )
            return total

        optimum = min(naive(np.array(bits)) for bits in product((0, 1), repeat=6))
        hits = 0
        for seed in range(100):
            params = InferenceParams(bits=1, sweeps=20, seed=seed)
            _, trace = optimize_bit(None, 0, labels, params)
            assert trace.final_objective <= trace.init_objective + 1e-12
            if abs(trace.final_objective - optimum) < 1e-9:
                hits += 1
        assert hits >= 90
        _ok(3, f"50 nonincreasing traces; exhaustive optimum hit {hits}/100 seeds")


class TestCriterion4TwoSceneZeroLoss:
    def test_two_scene_total_loss_zero(self):
        labels = np.array([0] * 6 + [1] * 6)
        codes, report = infer_codes(labels, InferenceParams(bits=64, seed=BENCH_SEED))
        assert report.final_bit_objective == 0.0
        same_a = codes[labels == 0]
        same_b = codes[labels == 1]
        assert np.all(same_a == same_a[0]) and np.all(same_b == same_b[0])
        cross_distance = int(np.sum(same_a[0] != same_b[0]))
        assert cross_distance >= 32
        _ok(4, f"final-bit objective 0.0, cross-scene distance {cross_distance} >= 32")


class TestCriterion5ForestFidelity:
    def test_toy_set_bit_reproduction_and_depth(self, toy_dataset):
        from scenehash.pipeline import compute_descriptors, load_canonical_images

        pyramid = small_pyramid()
        images = load_canonical_images(toy_dataset["train_records"], toy_dataset["root"], pyramid)
        descriptors = compute_descriptors(images, pyramid)
        labels = np.array([r.scene_label for r in toy_dataset["train_records"]])

        code_matrix, _ = infer_codes(labels, InferenceParams(bits=64, seed=5))
        from scenehash.forest import train_hash_forest

        hf = train_hash_forest(descriptors, code_matrix, ForestParams(trees=100, max_depth=10, seed=5))
        encoded = hf.encode_batch(descriptors)
        agreement = float(np.mean(encoded == code_matrix))
        max_depth = max(t.depth for f in hf.forests for t in f.trees)
        assert agreement >= 0.9
        assert max_depth <= 10
        _ok(5, f"training-bit agreement {agreement:.3f} >= 0.9, max tree depth {max_depth} <= 10")


class TestCriterion6EndToEndBenchmark:
    def test_benchmark_beats_thresholds_and_chance(self, bench, bench_model):
        params = ProtocolParams(
            pyramid=PyramidConfig(),
            inference=InferenceParams(bits=64, seed=BENCH_SEED),
            forest=ForestParams(trees=100, seed=BENCH_SEED),
            queries=200,
            neighbors=50,
            seed=BENCH_SEED,
        )
        report = run_protocol(
            None,
            bench["test_records"],
            params,
            test_base_dir=bench["root"],
            model=bench_model["model"],
        )

        rng = np.random.default_rng(BENCH_SEED)
        labels = np.array([r.scene_label for r in bench["train_records"]])
        rng.shuffle(labels)
        shuffled = [
            ManifestRecord(r.path, r.video_id, r.frame_idx, int(lbl))
            for r, lbl in zip(bench["train_records"], labels)
        ]
        control = run_protocol(
            shuffled,
            bench["test_records"],
            params,
            train_base_dir=bench["root"],
            test_base_dir=bench["root"],
        )

        assert report.precision_at_1 >= 0.80
        assert report.mean_ap > control.mean_ap
        assert report.mean_ap > 0.5
        _ok(
            6,
            f"precision@1 {report.precision_at_1:.3f} >= 0.80; "
            f"mAP {report.mean_ap:.3f} > chance control {control.mean_ap:.3f} and > 0.5",
        )


class TestCriterion7Latency:
    def test_mean_query_latency_at_10k_entries(self, bench, bench_model, tmp_path, capsys):
        model = bench_model["model"]
        extra = 10_000 - model.num_entries
        rng = np.random.default_rng(1234)
        filler_codes = pack_bits(rng.integers(0, 2, size=(extra, model.bits), dtype=np.uint8))
        big = RetargetModel(
            pyramid=model.pyramid,
            inference=model.inference,
            forest_params=model.forest_params,
            hash_forest=model.hash_forest,
            codes=np.concatenate([model.codes, filler_codes]),
            video_ids=model.video_ids + [f"filler_{i}" for i in range(extra)],
            frame_idx=np.concatenate([model.frame_idx, np.arange(extra, dtype=np.int64)]),
            scene_ids=np.concatenate([model.scene_ids, np.full(extra, -1, dtype=np.int64)]),
        )
        assert big.num_entries == 10_000
        big_path = tmp_path / "big.rth"
        save_model(big, big_path)

        out = tmp_path / "latency"
        rc = cli_main([
            "eval",
            "--model", str(big_path),
            "--test-manifest", str(bench["test_path"]),
            "--out", str(out),
            "--queries", "200",
            "--k", "50",
            "--seed", str(BENCH_SEED),
        ])
        assert rc == 0
        timing = json.loads(Path(str(out) + "_timing.json").read_text())
        mean_ms = timing["total"]["mean_us"] / 1000.0
        assert timing["total"]["count"] >= 200
        assert mean_ms <= 50.0
        _ok(7, f"mean end-to-end query {mean_ms:.2f} ms <= 50 ms at 10,000 entries, "
               f"{timing['total']['count']} queries")


class TestCriterion8Persistence:
    def test_roundtrip_bytes_and_rankings(self, bench, bench_model, tmp_path):
        model = bench_model["model"]
        path = tmp_path / "model.rth"
        save_model(model, path)
        loaded = load_model(path)

        blob = path.read_bytes()
        assert serialize(loaded) == blob
        assert serialize(deserialize(blob)) == blob

        probes = bench["test_records"][:20]
        for rec in probes:
            image = read_image_bytes(rec, bench["root"])
            a = query(model, image, k=None)
            b = query(loaded, image, k=None)
            np.testing.assert_array_equal(a.ids, b.ids)
            np.testing.assert_array_equal(a.distances, b.distances)
        _ok(8, "byte-identical re-serialization; identical rankings on 20 probes")


class TestCriterion9Determinism:
    def test_cli_outputs_byte_identical(self, tmp_path):
        data_dir = tmp_path / "data"
        rc = cli_main([
            "synth", "--out", str(data_dir),
            "--scenes", "3", "--views", "6", "--test-views", "3",
            "--size", "56", "--seed", "21",
        ])
        assert rc == 0
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "canonical_size": 48, "patch_sizes": [12, 6], "grid_sizes": [1, 2],
            "bits": 16, "trees": 10, "seed": 21,
        }))

        model_bytes, report_bytes, eval_bytes, pr_bytes = [], [], [], []
        for run in ("one", "two"):
            model_path = tmp_path / f"model_{run}.rth"
            rc = cli_main([
                "train",
                "--manifest", str(data_dir / "train.jsonl"),
                "--out", str(model_path),
                "--config", str(config),
            ])
            assert rc == 0
            model_bytes.append(model_path.read_bytes())
            report_bytes.append(Path(str(model_path) + ".train.json").read_bytes())

            out = tmp_path / f"eval_{run}"
            rc = cli_main([
                "eval",
                "--manifest", str(data_dir / "train.jsonl"),
                "--test-manifest", str(data_dir / "test.jsonl"),
                "--out", str(out),
                "--config", str(config),
                "--queries", "5", "--k", "3",
            ])
            assert rc == 0
            eval_bytes.append(Path(str(out) + ".json").read_bytes())
            pr_bytes.append(Path(str(out) + "_pr.csv").read_bytes())

        assert model_bytes[0] == model_bytes[1]
        assert report_bytes[0] == report_bytes[1]
        assert eval_bytes[0] == eval_bytes[1]
        assert pr_bytes[0] == pr_bytes[1]
        _ok(9, "train and eval outputs byte-identical across consecutive seeded runs")
