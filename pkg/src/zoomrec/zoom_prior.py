"""Gaussian KDE over bounding-box area ratios, with truncated sampling.

The fitted distribution stands in for the box-size statistics of whatever
corpus a localizer was originally trained on; zoom-step ratios are drawn
from it so that per-step crops look statistically like that corpus.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import area_ratio

_MAX_REJECTS = 1000


@dataclass(frozen=True)
class RatioDistribution:
    """Immutable KDE: kernel centers in (0,1] plus one shared bandwidth."""

    samples: np.ndarray
    bandwidth: float

    def __post_init__(self):
        if self.samples.size < 1:
            raise ValueError("need at least one ratio sample")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if np.any(self.samples <= 0) or np.any(self.samples > 1):
            raise ValueError("ratio samples must lie in (0, 1]")

    def density(self, x) -> np.ndarray:
        """Mixture density (untruncated) evaluated at x (scalar or array)."""
        x = np.asarray(x, dtype=np.float64)
        z = (x[..., None] - self.samples) / self.bandwidth
        k = np.exp(-0.5 * z * z) / (self.bandwidth * math.sqrt(2.0 * math.pi))
        return k.mean(axis=-1)

    def truncated_mass(self) -> float:
        """Total kernel mass inside (0, 1] — the sampler's acceptance rate."""
        h = self.bandwidth

        def cdf(v):
            return 0.5 * (1.0 + np.vectorize(math.erf)(v / math.sqrt(2.0)))

        upper = cdf((1.0 - self.samples) / h)
        lower = cdf((0.0 - self.samples) / h)
        return float(np.mean(upper - lower))


def silverman_bandwidth(ratios: np.ndarray) -> float:
    """Rule-of-thumb bandwidth 0.9 * min(std, IQR/1.34) * n^(-1/5)."""
    n = ratios.size
    std = float(np.std(ratios))
    q75, q25 = np.percentile(ratios, [75, 25])
    iqr = float(q75 - q25)
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    if spread <= 0:
        # All samples identical; fall back to a narrow kernel.
        return max(1e-3 * float(np.mean(ratios)), 1e-6)
    return 0.9 * spread * n ** (-0.2)


def fit_kde(ratios, bandwidth="auto") -> RatioDistribution:
    """Fit a Gaussian KDE to area ratios in (0,1].

    bandwidth: positive float, or "auto" for Silverman's rule.
    """
    arr = np.asarray(list(ratios), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot fit a KDE to an empty ratio list")
    if np.any(arr <= 0) or np.any(arr > 1):
        bad = arr[(arr <= 0) | (arr > 1)][0]
        raise ValueError(f"ratio {bad} outside (0, 1]")
    if bandwidth == "auto":
        bw = silverman_bandwidth(arr)
    else:
        bw = float(bandwidth)
    return RatioDistribution(samples=arr, bandwidth=bw)


def sample_ratio(dist: RatioDistribution, rng: np.random.Generator) -> float:
    """Draw one ratio: kernel center + Gaussian noise, rejected into (0,1]."""
    n = dist.samples.size
    for _ in range(_MAX_REJECTS):
        center = dist.samples[rng.integers(0, n)]
        value = center + dist.bandwidth * rng.standard_normal()
        if 0.0 < value <= 1.0:
            return float(value)
    raise RuntimeError(
        f"rejection sampling failed {_MAX_REJECTS} times; "
        f"bandwidth {dist.bandwidth} likely far too wide for (0, 1]"
    )


def sample_ratios(dist: RatioDistribution, rng: np.random.Generator, n: int) -> list[float]:
    return [sample_ratio(dist, rng) for _ in range(n)]


def ratios_from_dataset(dataset) -> list[float]:
    """Ground-truth area ratio of every sample, in input order.

    Each sample must expose `gt` (Box) and `image_size` (ImageSize).
    """
    samples = list(dataset)
    if not samples:
        raise ValueError("empty dataset")
    return [area_ratio(s.gt, s.image_size) for s in samples]


def save_prior(dist: RatioDistribution, path) -> None:
    payload = {"samples": [float(s) for s in dist.samples], "bandwidth": dist.bandwidth}
    Path(path).write_text(json.dumps(payload))


def load_prior(path) -> RatioDistribution:
    payload = json.loads(Path(path).read_text())
    return RatioDistribution(
        samples=np.asarray(payload["samples"], dtype=np.float64),
        bandwidth=float(payload["bandwidth"]),
    )
