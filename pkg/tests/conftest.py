import pytest

from scenehash.codes import InferenceParams
from scenehash.descriptor import PyramidConfig
from scenehash.forest import ForestParams
from scenehash.manifest import load_manifest
from scenehash.pipeline import train_model
from scenehash.synth import SynthConfig, generate


def small_pyramid() -> PyramidConfig:
    # 48px canonical, two levels -> 96-d descriptors; fast but realistic
    return PyramidConfig(canonical_size=48, patch_sizes=(12, 6), grid_sizes=(1, 2))


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """3 scenes x 6 train / 3 test views of synthetic textures."""
    root = tmp_path_factory.mktemp("toy_synth")
    cfg = SynthConfig(
        scenes=3, train_views=6, test_views=3, image_size=56, shift_max=4, seed=42
    )
    train_path, test_path = generate(root, cfg)
    return {
        "root": root,
        "config": cfg,
        "train_path": train_path,
        "test_path": test_path,
        "train_records": load_manifest(train_path),
        "test_records": load_manifest(test_path),
    }


@pytest.fixture(scope="session")
def toy_model(toy_dataset):
    model, report, _ = train_model(
        toy_dataset["train_records"],
        toy_dataset["root"],
        small_pyramid(),
        InferenceParams(bits=16, seed=123),
        ForestParams(trees=10, seed=123),
    )
    return {"model": model, "report": report}
