"""Ground-truth zoom search-process generation for training data.

A search process is a nested box sequence from the full image down to the
target box. Per-step area ratios are drawn from a prior over box sizes, the
step count is chosen so the cumulative shrinkage matches the target, and
intermediate boxes are centered on the target with sizes from a geometric
zoom schedule. Each step carries a continue/stop label and a fractional
progress label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Box, ImageSize, area_ratio, clamp_shift
from .zoom_prior import RatioDistribution, sample_ratios

CONT = "CONT"
EOS = "EOS"

# Zoom factors are clipped to at least this, so box areas strictly decrease.
MIN_ZOOM = 1.0 + 1e-3
# Per-step strict area-decrease margin used when reconciling box sizes.
_AREA_MARGIN = 1.0 + 1e-6


@dataclass(frozen=True)
class GenConfig:
    """Knobs for search-process generation.

    min_edge is in pixels and applies to the second-to-last box; when it is
    not met the process is resampled with lambda2 scaled up by
    lambda2_growth, keeping the best attempt seen.
    """

    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda2_growth: float = 1.1
    min_edge: float = 450.0
    t_max: int = 8
    exponent_mode: str = "uniform"  # "uniform" or "as-printed"
    max_regen: int = 100

    def __post_init__(self):
        if self.lambda2_growth <= 1:
            raise ValueError("lambda2_growth must be > 1")
        if self.min_edge <= 0:
            raise ValueError("min_edge must be > 0")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.exponent_mode not in ("uniform", "as-printed"):
            raise ValueError(f"unknown exponent_mode {self.exponent_mode!r}")
        if self.max_regen < 1:
            raise ValueError("max_regen must be >= 1")


@dataclass(frozen=True)
class SearchProcess:
    """Nested boxes b0..bT with per-step stop labels and progress in [0,1]."""

    boxes: tuple[Box, ...]
    eos_labels: tuple[str, ...]
    progress: tuple[float, ...]

    def __post_init__(self):
        n = len(self.boxes)
        if n < 2:
            raise ValueError("a search process needs at least two boxes")
        if len(self.eos_labels) != n or len(self.progress) != n:
            raise ValueError("boxes, eos_labels and progress must align")

    @property
    def steps(self) -> int:
        return len(self.boxes) - 1


@dataclass(frozen=True)
class ExtendedSample:
    """A dataset sample plus its generated ground-truth search process."""

    sample_id: str
    image: str
    expression: str
    gt: Box
    image_size: ImageSize
    process: SearchProcess
    seed: int


def check_process(
    process: SearchProcess,
    img: ImageSize,
    gt: Box | None = None,
    min_edge: float | None = None,
) -> None:
    """Raise ValueError on any violated search-process invariant."""
    boxes = process.boxes
    t = process.steps
    full = img.full_box()
    if boxes[0] != full:
        raise ValueError(f"b0 must be the full image, got {boxes[0].as_list()}")
    for i in range(t):
        if not boxes[i].contains(boxes[i + 1]):
            raise ValueError(f"box {i + 1} not nested in box {i}")
        if not boxes[i].area > boxes[i + 1].area:
            raise ValueError(f"area not strictly decreasing at step {i + 1}")
    for b in boxes:
        if not full.contains(b):
            raise ValueError(f"box {b.as_list()} outside image")
    expect_labels = (CONT,) * t + (EOS,)
    if process.eos_labels != expect_labels:
        raise ValueError(f"bad eos labels {process.eos_labels}")
    expect_progress = tuple(j / t for j in range(t + 1))
    if process.progress != expect_progress:
        raise ValueError(f"bad progress labels {process.progress}")
    if gt is not None and boxes[-1] != gt:
        raise ValueError("final box must equal the ground-truth box exactly")
    if min_edge is not None:
        penult = boxes[t - 1]
        if min(penult.width, penult.height) < min_edge:
            raise ValueError(
                f"penultimate box edge {min(penult.width, penult.height):.1f} "
                f"below {min_edge}"
            )


def select_steps(r_star: float, r_seq) -> int:
    """Step count whose cumulative ratio product best matches the target.

    Minimizes |prod(r_1..r_T) / r_star - 1| over T in 1..len(r_seq);
    ties resolve to the smallest T.
    """
    r_seq = list(r_seq)
    if not r_seq:
        raise ValueError("empty ratio sequence")
    if not 0 < r_star <= 1:
        raise ValueError(f"target ratio {r_star} outside (0, 1]")
    best_t = 1
    best_score = math.inf
    prod = 1.0
    for t, r in enumerate(r_seq, start=1):
        prod *= r
        score = abs(prod / r_star - 1.0)
        if score < best_score:
            best_score = score
            best_t = t
    return best_t


def exp_weights(lambda1: float, lambda2: float, t_star: int) -> np.ndarray:
    """Normalized exponentially decaying weights over steps 1..t_star.

    lambda1 cancels in the normalization; it is kept in the signature for
    config transparency.
    """
    if t_star < 1:
        raise ValueError("t_star must be >= 1")
    k = np.arange(1, t_star + 1, dtype=np.float64)
    # Shift the exponent so large lambda2 cannot overflow before normalizing.
    logits = -lambda2 * (k - 1.0)
    w = np.exp(logits - logits.max())
    return w / w.sum()


def zoom_schedule(
    r_star: float,
    r_seq,
    t_star: int,
    omega: np.ndarray,
    mode: str = "uniform",
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step zoom factors and box sizes as fractions of image area.

    Returns (z, s) with len(z) == t_star and len(s) == t_star + 1.
    z[j] is the zoom factor between boxes j and j+1; s[j] is |b_j| / (W*H),
    so s[t_star] == r_star exactly and, in uniform mode without clipping,
    s[0] == 1 and prod(z) == 1 / r_star.

    mode selects the exponent e_k on each ratio inside the shared constant:
    "as-printed" uses omega_k^-1, "uniform" uses 1.
    """
    r = np.asarray(list(r_seq)[:t_star], dtype=np.float64)
    if r.size != t_star:
        raise ValueError(f"need {t_star} ratios, got {r.size}")
    if np.any(r <= 0):
        raise ValueError("ratios must be positive")
    if not 0 < r_star <= 1:
        raise ValueError(f"target ratio {r_star} outside (0, 1]")

    log_r = np.log(np.minimum(r, 1.0 - 1e-12))
    if mode == "uniform":
        exponents = np.ones(t_star)
    elif mode == "as-printed":
        with np.errstate(divide="ignore"):
            exponents = 1.0 / np.asarray(omega, dtype=np.float64)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    log_c = (math.log(1.0 / r_star) + float(np.sum(exponents * log_r))) / t_star
    with np.errstate(over="ignore", under="ignore"):
        z = np.exp(log_c - np.log(r))
    z = np.maximum(z, MIN_ZOOM)

    s = np.empty(t_star + 1, dtype=np.float64)
    s[t_star] = r_star
    for j in range(t_star - 1, -1, -1):
        s[j] = s[j + 1] * z[j]
    return z, s


def aspect_interp(img: ImageSize, s_j: float, s_penult: float) -> float:
    """Aspect factor interpolating from the image's shape to a square.

    Equals W/H when s_j is the full image area and 1 when s_j reaches the
    second-to-last box size. A box of size S then gets width a*sqrt(S) and
    height sqrt(S)/a.
    """
    wh = img.area
    if s_penult >= wh:
        raise ValueError("second-to-last box size must be below the image area")
    if s_j <= 0 or s_penult <= 0:
        raise ValueError("box sizes must be positive")
    ratio = img.w / img.h
    return ratio - (ratio - 1.0) * (wh - s_j) / (wh - s_penult)


def attach_labels(t_star: int) -> tuple[tuple[str, ...], tuple[float, ...]]:
    """Stop labels (CONT..CONT, EOS) and progress j/T for j = 0..T."""
    if t_star < 1:
        raise ValueError("t_star must be >= 1")
    labels = (CONT,) * t_star + (EOS,)
    progress = tuple(j / t_star for j in range(t_star + 1))
    return labels, progress


def _boxes_from_schedule(img: ImageSize, gt: Box, s: np.ndarray) -> tuple[Box, ...]:
    """Materialize nested boxes around the target from a size schedule.

    Boxes are centered on the target and shifted into the image. Working
    from the target outward, each box's width/height are raised to at least
    the next box's (concentric boxes with per-axis dominance stay nested
    under the minimal in-image shift) and its area to strictly above the
    next box's.
    """
    t_star = len(s) - 1
    wim, him = float(img.w), float(img.h)
    boxes: list[Box | None] = [None] * (t_star + 1)
    boxes[0] = img.full_box()
    boxes[t_star] = gt

    s_penult = float(s[t_star - 1]) * img.area if t_star >= 2 else img.area
    cx, cy = gt.center
    w_next, h_next = gt.width, gt.height
    for j in range(t_star - 1, 0, -1):
        size = float(s[j]) * img.area
        if s_penult >= img.area:
            aspect = 1.0  # degenerate interpolation anchor
        else:
            aspect = min(max(aspect_interp(img, size, s_penult), 0.05), 20.0)
        w = aspect * math.sqrt(size)
        h = math.sqrt(size) / aspect
        w = max(w, w_next)
        h = max(h, h_next)
        need = _AREA_MARGIN * w_next * h_next
        if w * h < need:
            grow = math.sqrt(need / (w * h))
            w *= grow
            h *= grow
        if w > wim:
            w = wim
            h = max(h, need / w)
        if h > him:
            h = him
            w = max(w, min(need / h, wim))
        if w >= wim and h >= him:
            raise ValueError(
                "cannot fit a strictly shrinking box chain inside the image; "
                "target box is too close to the full image"
            )
        box = clamp_shift(
            Box(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0), img
        )
        boxes[j] = box
        w_next, h_next = w, h

    return tuple(boxes)  # type: ignore[arg-type]


def build_process(sample, dist: RatioDistribution, cfg: GenConfig, seed: int) -> ExtendedSample:
    """Generate one ground-truth search process for a dataset sample.

    Deterministic in (sample, dist, cfg, seed). When the second-to-last box
    comes out smaller than cfg.min_edge on either side, lambda2 is scaled by
    cfg.lambda2_growth and the process is resampled with a fresh sub-seed,
    up to cfg.max_regen attempts; the best attempt is kept as fallback.
    """
    img: ImageSize = sample.image_size
    gt: Box = sample.gt
    r_star = area_ratio(gt, img)
    if r_star >= 1.0:
        raise ValueError("ground-truth box must be strictly smaller than the image")

    lam2 = cfg.lambda2
    best: SearchProcess | None = None
    best_edge = -math.inf
    for attempt in range(cfg.max_regen):
        rng = np.random.default_rng([seed & 0x7FFF_FFFF_FFFF_FFFF, attempt])
        r_seq = sample_ratios(dist, rng, cfg.t_max)
        t_star = select_steps(r_star, r_seq)
        omega = exp_weights(cfg.lambda1, lam2, t_star)
        _, s = zoom_schedule(r_star, r_seq, t_star, omega, cfg.exponent_mode)
        boxes = _boxes_from_schedule(img, gt, s)
        labels, progress = attach_labels(t_star)
        proc = SearchProcess(boxes=boxes, eos_labels=labels, progress=progress)
        check_process(proc, img, gt=gt)

        penult = boxes[t_star - 1]
        edge = min(penult.width, penult.height)
        if edge > best_edge:
            best_edge = edge
            best = proc
        if edge >= cfg.min_edge:
            break
        lam2 *= cfg.lambda2_growth

    assert best is not None
    return ExtendedSample(
        sample_id=sample.sample_id,
        image=sample.image,
        expression=sample.expression,
        gt=gt,
        image_size=img,
        process=best,
        seed=seed,
    )


def extend_dataset(samples, dist: RatioDistribution, cfg: GenConfig, seed: int) -> list[ExtendedSample]:
    """Build one process per sample; sub-seeds derive from sample order."""
    out = []
    for idx, sample in enumerate(samples):
        out.append(build_process(sample, dist, cfg, seed=seed * 1_000_003 + idx))
    return out


def extended_to_json(ext: ExtendedSample) -> dict:
    return {
        "id": ext.sample_id,
        "image": ext.image,
        "expression": ext.expression,
        "gt": ext.gt.as_list(),
        "image_size": [ext.image_size.w, ext.image_size.h],
        "boxes": [b.as_list() for b in ext.process.boxes],
        "eos": list(ext.process.eos_labels),
        "progress": list(ext.process.progress),
        "seed": ext.seed,
    }


def extended_from_json(obj: dict) -> ExtendedSample:
    return ExtendedSample(
        sample_id=obj["id"],
        image=obj["image"],
        expression=obj["expression"],
        gt=Box.from_list(obj["gt"]),
        image_size=ImageSize(int(obj["image_size"][0]), int(obj["image_size"][1])),
        process=SearchProcess(
            boxes=tuple(Box.from_list(b) for b in obj["boxes"]),
            eos_labels=tuple(obj["eos"]),
            progress=tuple(obj["progress"]),
        ),
        seed=int(obj["seed"]),
    )


def write_extended(samples, path) -> None:
    with open(path, "w") as fh:
        for ext in samples:
            fh.write(json.dumps(extended_to_json(ext)) + "\n")


def read_extended(path) -> list[ExtendedSample]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(extended_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                raise ValueError(f"{path}: bad record on line {lineno}: {exc}") from exc
    return out
