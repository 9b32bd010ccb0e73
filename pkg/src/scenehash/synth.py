"""Synthetic benchmark generator.

Stands in for unavailable clinical footage: each scene is a procedurally
generated multi-octave texture, and every view of it applies an intensity
gain/bias, a small translation, and additive Gaussian noise; these are the
nuisances the descriptor is built to absorb. Train and test views come
from disjoint draws of the same per-scene stream. Output is byte-stable
given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError
from .images import bilinear_resize
from .manifest import ManifestRecord, save_manifest

TRAIN_VIDEO = "diagnosis"
TEST_VIDEO = "surveillance"


@dataclass(frozen=True)
class SynthConfig:
    scenes: int = 20
    train_views: int = 30
    test_views: int = 10
    image_size: int = 192
    shift_max: int = 8
    gain_range: tuple[float, float] = (0.7, 1.3)
    bias_range: tuple[float, float] = (-20.0, 20.0)
    noise_sigma_max: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.scenes < 1:
            raise ConfigError("scenes must be >= 1")
        if self.train_views < 1 or self.test_views < 0:
            raise ConfigError("need at least one train view per scene")
        if self.image_size < 16:
            raise ConfigError("image_size must be >= 16")
        if self.shift_max < 0:
            raise ConfigError("shift_max must be >= 0")


def scene_texture(rng: np.random.Generator, size: int) -> np.ndarray:
    """Smooth multi-octave texture in [30, 200] with structure at the
    coarse, medium, and fine scales the descriptor pools over."""
    layers = []
    for grid, weight in ((6, 0.5), (24, 0.35), (96, 0.15)):
        coarse = rng.uniform(0.0, 1.0, size=(grid, grid))
        layers.append(weight * bilinear_resize(coarse, size, size))
    tex = sum(layers)
    lo, hi = tex.min(), tex.max()
    return 30.0 + (tex - lo) * (170.0 / max(hi - lo, 1e-9))


def render_view(base: np.ndarray, rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    """One 8-bit view: translated window, gain/bias, Gaussian noise."""
    s = cfg.shift_max
    dx = int(rng.integers(-s, s + 1)) if s else 0
    dy = int(rng.integers(-s, s + 1)) if s else 0
    window = base[s + dy : s + dy + cfg.image_size, s + dx : s + dx + cfg.image_size]
    gain = rng.uniform(*cfg.gain_range)
    bias = rng.uniform(*cfg.bias_range)
    sigma = rng.uniform(0.0, cfg.noise_sigma_max)
    noisy = gain * window + bias + rng.normal(0.0, sigma, size=window.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def generate(out_dir, cfg: SynthConfig) -> tuple[Path, Path]:
    """Write scene images plus train/test manifests; returns their paths."""
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)

    train_records, test_records = [], []
    frame_counters = {TRAIN_VIDEO: 0, TEST_VIDEO: 0}
    base_size = cfg.image_size + 2 * cfg.shift_max

    root_seq = np.random.SeedSequence([cfg.seed, cfg.scenes, cfg.image_size])
    scene_seqs = root_seq.spawn(cfg.scenes)
    for scene, seq in enumerate(scene_seqs):
        rng = np.random.default_rng(seq)
        base = scene_texture(rng, base_size)
        for split, count, video, records in (
            ("train", cfg.train_views, TRAIN_VIDEO, train_records),
            ("test", cfg.test_views, TEST_VIDEO, test_records),
        ):
            for view in range(count):
                arr = render_view(base, rng, cfg)
                name = f"{split}_s{scene:03d}_v{view:03d}.png"
                Image.fromarray(arr, mode="L").save(image_dir / name, format="PNG")
                records.append(
                    ManifestRecord(
                        path=f"images/{name}",
                        video_id=video,
                        frame_idx=frame_counters[video],
                        scene_label=scene,
                    )
                )
                frame_counters[video] += 1

    train_path = out_dir / "train.jsonl"
    test_path = out_dir / "test.jsonl"
    save_manifest(train_records, train_path)
    save_manifest(test_records, test_path)
    return train_path, test_path
