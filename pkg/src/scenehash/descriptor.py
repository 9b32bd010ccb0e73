"""Multi-scale regional binary-pattern descriptor.

A sliding 3x3-region mask turns every patch location into a 4-bit code by
comparing the average intensities of opposite regions on the ring around
the center (top-left vs bottom-right, top vs bottom, top-right vs
bottom-left, right vs left). Per-partition 16-bin code histograms are
pooled over a three-level spatial pyramid and concatenated; the default
geometry yields a 496-element vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ImageError
from .images import GrayImage, integral_image

HISTOGRAM_BINS = 16

# Ring region coordinates (row, col) in the 3x3 patch, clockwise from the
# top-left corner; bit k compares ring[k] against ring[k+4].
_RING = ((0, 0), (0, 1), (0, 2), (1, 2), (2, 2), (2, 1), (2, 0), (1, 0))


@dataclass(frozen=True)
class PyramidConfig:
    """Geometry of the descriptor pyramid.

    Each level partitions the canonical square into ``grid x grid`` cells
    and slides a ``patch x patch`` comparison mask inside every cell.
    Levels with a grid larger than 1 also get a half-cell-shifted
    ``(grid-1) x (grid-1)`` overlapped partition set.
    """

    canonical_size: int = 192
    patch_sizes: tuple[int, ...] = (24, 12, 6)
    grid_sizes: tuple[int, ...] = (1, 2, 4)
    stride_regions: int = 1

    def __post_init__(self):
        if self.canonical_size <= 0:
            raise ConfigError("canonical_size must be positive")
        if len(self.patch_sizes) != len(self.grid_sizes):
            raise ConfigError("patch_sizes and grid_sizes must pair up level by level")
        if not self.patch_sizes:
            raise ConfigError("at least one pyramid level is required")
        if self.stride_regions < 1:
            raise ConfigError("stride_regions must be >= 1")
        for patch in self.patch_sizes:
            if patch <= 0 or patch % 3 != 0:
                raise ConfigError(f"patch size {patch} must be a positive multiple of 3")
            if self.canonical_size % patch != 0:
                raise ConfigError(
                    f"canonical_size {self.canonical_size} not divisible by patch {patch}"
                )
        for grid in self.grid_sizes:
            if grid < 1:
                raise ConfigError(f"grid size {grid} must be >= 1")
            if self.canonical_size % grid != 0:
                raise ConfigError(
                    f"canonical_size {self.canonical_size} not divisible by grid {grid}"
                )
            if grid > 1 and (self.canonical_size // grid) % 2 != 0:
                raise ConfigError(
                    f"cell size for grid {grid} must be even to place the shifted partitions"
                )

    @property
    def num_partitions(self) -> int:
        return sum(g * g + (g - 1) * (g - 1) for g in self.grid_sizes)

    @property
    def dim(self) -> int:
        return HISTOGRAM_BINS * self.num_partitions

    def partitions(self) -> list[tuple[int, int, int, int, int]]:
        """All (x0, y0, width, height, patch_px) rects in descriptor order.

        Order is level-major; within a level the base grid comes row-major
        first, then the half-cell-shifted overlapped grid row-major.
        """
        size = self.canonical_size
        rects = []
        for patch, grid in zip(self.patch_sizes, self.grid_sizes):
            cell = size // grid
            for row in range(grid):
                for col in range(grid):
                    rects.append((col * cell, row * cell, cell, cell, patch))
            half = cell // 2
            for row in range(grid - 1):
                for col in range(grid - 1):
                    rects.append((half + col * cell, half + row * cell, cell, cell, patch))
        return rects


def _codes_for_grid(table: np.ndarray, xs: np.ndarray, ys: np.ndarray, patch_px: int) -> np.ndarray:
    """4-bit codes for every window whose top-left corner is on (ys x xs).

    All ring regions share the same area, so comparing region sums is the
    same as comparing region means.
    """
    region = patch_px // 3
    col = ys[:, None]
    row = xs[None, :]
    sums = []
    for r, c in _RING:
        y0 = col + r * region
        x0 = row + c * region
        sums.append(
            table[y0 + region, x0 + region]
            - table[y0, x0 + region]
            - table[y0 + region, x0]
            + table[y0, x0]
        )
    codes = np.zeros((len(ys), len(xs)), dtype=np.int64)
    for k in range(4):
        codes |= (sums[k] > sums[k + 4]).astype(np.int64) << k
    return codes


def patch_code(table: np.ndarray, x: int, y: int, patch_px: int) -> int:
    """Code of the single patch with top-left pixel (x, y).

    ``table`` is a summed-area table from :func:`images.integral_image`.
    """
    height = table.shape[0] - 1
    width = table.shape[1] - 1
    if patch_px <= 0 or patch_px % 3 != 0:
        raise ConfigError(f"patch size {patch_px} must be a positive multiple of 3")
    if x < 0 or y < 0 or x + patch_px > width or y + patch_px > height:
        raise ImageError(
            f"patch at ({x},{y}) size {patch_px} outside {width}x{height} image"
        )
    codes = _codes_for_grid(table, np.array([x]), np.array([y]), patch_px)
    return int(codes[0, 0])


def partition_histogram(
    table: np.ndarray,
    rect: tuple[int, int, int, int],
    patch_px: int,
    stride_regions: int = 1,
) -> tuple[np.ndarray, int]:
    """L1-normalized 16-bin code histogram of one partition.

    The mask slides inside ``rect`` (x0, y0, width, height) at a stride of
    ``stride_regions`` region widths; only fully contained windows count.
    Returns the histogram together with the window count, which is 0 for a
    rect smaller than one patch (the histogram is then all zeros).
    """
    x0, y0, w, h = rect
    height = table.shape[0] - 1
    width = table.shape[1] - 1
    if x0 < 0 or y0 < 0 or x0 + w > width or y0 + h > height:
        raise ImageError(f"partition rect {rect} outside {width}x{height} image")
    stride_px = stride_regions * (patch_px // 3)
    if w < patch_px or h < patch_px:
        return np.zeros(HISTOGRAM_BINS, dtype=np.float64), 0
    nx = (w - patch_px) // stride_px + 1
    ny = (h - patch_px) // stride_px + 1
    xs = x0 + stride_px * np.arange(nx)
    ys = y0 + stride_px * np.arange(ny)
    codes = _codes_for_grid(table, xs, ys, patch_px)
    counts = np.bincount(codes.ravel(), minlength=HISTOGRAM_BINS).astype(np.float64)
    total = nx * ny
    return counts / total, total


def extract(img: GrayImage, config: PyramidConfig) -> np.ndarray:
    """Full pyramid descriptor of a prepared canonical-size frame."""
    if img.width != config.canonical_size or img.height != config.canonical_size:
        raise ImageError(
            f"image {img.width}x{img.height} does not match canonical size "
            f"{config.canonical_size}"
        )
    table = integral_image(img)
    parts = []
    for x0, y0, w, h, patch in config.partitions():
        hist, _ = partition_histogram(table, (x0, y0, w, h), patch, config.stride_regions)
        parts.append(hist)
    return np.concatenate(parts)
