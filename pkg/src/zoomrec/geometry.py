"""Bounding-box arithmetic and crop-local/global coordinate transforms.

Boxes live in continuous (sub-pixel) pixel coordinates, x right, y down.
Rasterization happens only in :func:`crop_resample`; everything else is
exact float arithmetic so no rounding accumulates across zoom steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle (x0, y0) top-left, (x1, y1) bottom-right.

    Invariants: x1 > x0 and y1 > y0, so the area is strictly positive.
    """

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate box: {self.as_list()}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0

    def contains(self, other: "Box", tol: float = 1e-9) -> bool:
        """True if `other` lies entirely inside this box (tol slack per edge)."""
        return (
            other.x0 >= self.x0 - tol
            and other.y0 >= self.y0 - tol
            and other.x1 <= self.x1 + tol
            and other.y1 <= self.y1 + tol
        )

    def union(self, other: "Box") -> "Box":
        """Smallest box containing both."""
        return Box(
            min(self.x0, other.x0),
            min(self.y0, other.y0),
            max(self.x1, other.x1),
            max(self.y1, other.y1),
        )

    def as_list(self) -> list[float]:
        """JSON form: [x0, y0, x1, y1]."""
        return [float(self.x0), float(self.y0), float(self.x1), float(self.y1)]

    @classmethod
    def from_list(cls, coords) -> "Box":
        x0, y0, x1, y1 = (float(c) for c in coords)
        return cls(x0, y0, x1, y1)


@dataclass(frozen=True)
class ImageSize:
    """Image extent in whole pixels."""

    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"image size must be >= 1x1, got {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return float(self.w) * float(self.h)

    def full_box(self) -> Box:
        return Box(0.0, 0.0, float(self.w), float(self.h))


@dataclass(frozen=True)
class NormBox:
    """Box as unitless fractions of a crop: 0 <= u0 < u1 <= 1, same for v."""

    u0: float
    v0: float
    u1: float
    v1: float

    def __post_init__(self):
        if not (0.0 <= self.u0 < self.u1 <= 1.0 and 0.0 <= self.v0 < self.v1 <= 1.0):
            raise ValueError(
                f"invalid normalized box: ({self.u0}, {self.v0}, {self.u1}, {self.v1})"
            )


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0 when disjoint.

    Box validity (positive area) is enforced by the Box constructor, so a
    degenerate input cannot reach this function without raising first.
    """
    ix0 = max(a.x0, b.x0)
    iy0 = max(a.y0, b.y0)
    ix1 = min(a.x1, b.x1)
    iy1 = min(a.y1, b.y1)
    iw = max(0.0, ix1 - ix0)
    ih = max(0.0, iy1 - iy0)
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def area_ratio(b: Box, img: ImageSize, tol: float = 1e-9) -> float:
    """|b| / (W*H). Raises if the box sticks out of the image."""
    if b.x0 < -tol or b.y0 < -tol or b.x1 > img.w + tol or b.y1 > img.h + tol:
        raise ValueError(f"box {b.as_list()} outside image {img.w}x{img.h}")
    return b.area / img.area


def to_global(n: NormBox, crop: Box) -> Box:
    """Map a crop-local normalized box into the crop's global pixel frame.

    Affine per axis: x = crop.x0 + u * crop.width. The NormBox invariants
    guarantee the result is contained in `crop`, which is what makes
    predicted zoom sequences structurally nested.
    """
    return Box(
        crop.x0 + n.u0 * crop.width,
        crop.y0 + n.v0 * crop.height,
        crop.x0 + n.u1 * crop.width,
        crop.y0 + n.v1 * crop.height,
    )


def to_local(b: Box, crop: Box) -> NormBox:
    """Inverse of :func:`to_global`; `b` must lie inside `crop`."""
    u0 = (b.x0 - crop.x0) / crop.width
    v0 = (b.y0 - crop.y0) / crop.height
    u1 = (b.x1 - crop.x0) / crop.width
    v1 = (b.y1 - crop.y0) / crop.height
    # Guard float dust at the crop edges.
    u0, v0 = max(0.0, u0), max(0.0, v0)
    u1, v1 = min(1.0, u1), min(1.0, v1)
    return NormBox(u0, v0, u1, v1)


def clamp_shift(b: Box, img: ImageSize) -> Box:
    """Translate `b` by the minimal shift that puts it inside the image.

    Width and height are preserved when the box fits; an axis on which the
    box is larger than the image is clipped to the image extent instead.
    """

    def _axis(lo: float, hi: float, limit: float) -> tuple[float, float]:
        if hi - lo > limit:
            return 0.0, limit
        if lo < 0.0:
            return 0.0, hi - lo
        if hi > limit:
            return limit - (hi - lo), limit
        return lo, hi

    x0, x1 = _axis(b.x0, b.x1, float(img.w))
    y0, y1 = _axis(b.y0, b.y1, float(img.h))
    return Box(x0, y0, x1, y1)


def crop_resample(image: np.ndarray, b: Box, out_size: int) -> np.ndarray:
    """Bilinearly resample region `b` of `image` to out_size x out_size.

    `image` is (H, W) or (H, W, C); the result is float64 with the same
    channel layout. Output pixel centers are placed uniformly over the
    region, and the input is sampled in pixel-center convention (integer
    pixel p covers [p, p+1), center p + 0.5) with edge clamping.

    Raises if the region is narrower than one pixel on either axis or not
    contained in the image.
    """
    if out_size < 1:
        raise ValueError("out_size must be >= 1")
    if b.width < 1.0 or b.height < 1.0:
        raise ValueError(f"region smaller than 1 px on an axis: {b.as_list()}")
    h, w = image.shape[:2]
    if b.x0 < -1e-9 or b.y0 < -1e-9 or b.x1 > w + 1e-9 or b.y1 > h + 1e-9:
        raise ValueError(f"region {b.as_list()} outside image {w}x{h}")

    src = np.asarray(image, dtype=np.float64)
    # Sample coordinates of output pixel centers, shifted into index space.
    xs = b.x0 + (np.arange(out_size) + 0.5) * (b.width / out_size) - 0.5
    ys = b.y0 + (np.arange(out_size) + 0.5) * (b.height / out_size) - 0.5

    x0i = np.floor(xs).astype(np.int64)
    y0i = np.floor(ys).astype(np.int64)
    fx = xs - x0i
    fy = ys - y0i
    x0c = np.clip(x0i, 0, w - 1)
    x1c = np.clip(x0i + 1, 0, w - 1)
    y0c = np.clip(y0i, 0, h - 1)
    y1c = np.clip(y0i + 1, 0, h - 1)

    # Gather the four neighbors and lerp; broadcasting keeps channels intact.
    if src.ndim == 2:
        fx_r = fx[None, :]
        fy_r = fy[:, None]
    else:
        fx_r = fx[None, :, None]
        fy_r = fy[:, None, None]
    top = src[y0c][:, x0c] * (1.0 - fx_r) + src[y0c][:, x1c] * fx_r
    bot = src[y1c][:, x0c] * (1.0 - fx_r) + src[y1c][:, x1c] * fx_r
    return top * (1.0 - fy_r) + bot * fy_r
