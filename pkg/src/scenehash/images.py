"""Image ingest and pixel-level plumbing.

Frames enter as 8-bit PNG/PPM/PGM files and are converted to real-valued
grayscale arrays. All downstream descriptor math stays in float64 so that
strict comparisons of region means are exactly preserved under positive
affine intensity maps.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageError

# Luma weights applied to RGB sources (ITU-R 601).
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class GrayImage:
    """Real-valued grayscale frame with row-major pixel data."""

    width: int
    height: int
    data: np.ndarray  # (height, width) float64

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ImageError(f"invalid image size {self.width}x{self.height}")
        if self.data.shape != (self.height, self.width):
            raise ImageError(
                f"data shape {self.data.shape} does not match "
                f"{self.height}x{self.width}"
            )


def from_array(data: np.ndarray) -> GrayImage:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ImageError(f"expected a nonempty 2-d array, got shape {arr.shape}")
    return GrayImage(width=arr.shape[1], height=arr.shape[0], data=arr)


def decode_image(image_bytes: bytes) -> GrayImage:
    """Decode PNG/PPM/PGM bytes into a real-valued grayscale frame.

    Color sources are reduced with the 0.299/0.587/0.114 luma weights; the
    result is kept unrounded.
    """
    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            img.load()
            if img.mode in ("L", "I", "I;16", "F"):
                arr = np.asarray(img, dtype=np.float64)
            else:
                rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
                arr = rgb @ np.asarray(LUMA_WEIGHTS)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageError(f"cannot decode image: {exc}") from exc
    if arr.ndim != 2 or arr.size == 0:
        raise ImageError(f"decoded image has unusable shape {arr.shape}")
    return from_array(arr)


def crop(img: GrayImage, rect: tuple[int, int, int, int]) -> GrayImage:
    """Crop to (x0, y0, width, height). The rect must lie inside the frame."""
    x0, y0, w, h = rect
    if w <= 0 or h <= 0:
        raise ImageError(f"empty crop rect {rect}")
    if x0 < 0 or y0 < 0 or x0 + w > img.width or y0 + h > img.height:
        raise ImageError(
            f"crop rect {rect} outside {img.width}x{img.height} frame"
        )
    return GrayImage(width=w, height=h, data=img.data[y0 : y0 + h, x0 : x0 + w])


def bilinear_resize(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel-center alignment and edge clamping.

    Linear in the input intensities, so resize(a*I + b) == a*resize(I) + b
    up to float rounding.
    """
    if out_h <= 0 or out_w <= 0:
        raise ImageError(f"zero-area resize target {out_h}x{out_w}")
    in_h, in_w = data.shape
    if (in_h, in_w) == (out_h, out_w):
        return data.astype(np.float64, copy=True)

    src_y = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    src_x = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)

    y0 = np.minimum(src_y.astype(np.int64), in_h - 2) if in_h > 1 else np.zeros(out_h, np.int64)
    x0 = np.minimum(src_x.astype(np.int64), in_w - 2) if in_w > 1 else np.zeros(out_w, np.int64)
    wy = (src_y - y0)[:, None]
    wx = (src_x - x0)[None, :]
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)

    top = data[np.ix_(y0, x0)] * (1.0 - wx) + data[np.ix_(y0, x1)] * wx
    bot = data[np.ix_(y1, x0)] * (1.0 - wx) + data[np.ix_(y1, x1)] * wx
    return top * (1.0 - wy) + bot * wy


def rotate_right_angle(img: GrayImage, degrees: int) -> GrayImage:
    """Rotate counter-clockwise by a multiple of 90 degrees, losslessly."""
    if degrees % 90 != 0:
        raise ImageError(f"rotation {degrees} is not a multiple of 90 degrees")
    k = (degrees // 90) % 4
    if k == 0:
        return img
    data = np.rot90(img.data, k=k).copy()
    return GrayImage(width=data.shape[1], height=data.shape[0], data=data)


def load_and_prepare(
    image_bytes: bytes,
    crop_rect: tuple[int, int, int, int] | None,
    canonical_size: int,
    rotation: int = 0,
) -> GrayImage:
    """Decode, crop, resize to the canonical square, then rotate.

    Rotation happens after the resize so right-angle turns stay exact on the
    square canvas.
    """
    img = decode_image(image_bytes)
    if crop_rect is not None:
        img = crop(img, crop_rect)
    resized = bilinear_resize(img.data, canonical_size, canonical_size)
    prepared = GrayImage(width=canonical_size, height=canonical_size, data=resized)
    if rotation % 360 != 0:
        prepared = rotate_right_angle(prepared, rotation)
    return prepared


def integral_image(img: GrayImage) -> np.ndarray:
    """Summed-area table with a zero border row/column.

    Shape is (height+1, width+1); any rectangle sum costs 4 lookups.
    """
    table = np.zeros((img.height + 1, img.width + 1), dtype=np.float64)
    np.cumsum(img.data, axis=0, out=table[1:, 1:])
    np.cumsum(table[1:, 1:], axis=1, out=table[1:, 1:])
    return table


def region_sum(table: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> float:
    """Sum of pixels in [x0, x1) x [y0, y1) via the summed-area table."""
    return table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]
