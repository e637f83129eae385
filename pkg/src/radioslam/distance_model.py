"""Similarity -> (distance, variance) regression by binning.

Training pairs come from fingerprint pairs whose connecting odometry path is
short enough that odometry distance can serve as the label. The model stores,
per similarity bin of width r, the mean and population variance of the member
distances; queries return the containing bin or fall back to the nearest one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .se2 import path_lengths
from .similarity import FingerprintMatrix, SimilarityParams, pairwise_similarity


@dataclass(frozen=True)
class TrainingSample:
    s: float  # similarity in [0, 1]
    d: float  # odometry chord distance, meters


@dataclass(frozen=True)
class ModelBin:
    center: float
    d_hat: float
    var: float
    count: int


@dataclass(frozen=True)
class SimilarityDistanceModel:
    r: float  # bin width
    bins: tuple[ModelBin, ...]  # sorted by center, ascending
    max_training_path_m: float

    def __post_init__(self):
        if not self.bins:
            raise DataError("SimilarityDistanceModel needs at least one bin")

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.bins])

    def to_json_dict(self) -> dict:
        return {
            "r": self.r,
            "max_path_m": self.max_training_path_m,
            "bins": [
                {"center": b.center, "d": b.d_hat, "var": b.var, "n": b.count}
                for b in self.bins
            ],
        }

    @staticmethod
    def from_json_dict(obj: dict) -> "SimilarityDistanceModel":
        bins = tuple(
            ModelBin(center=b["center"], d_hat=b["d"], var=b["var"], count=b["n"])
            for b in obj["bins"]
        )
        return SimilarityDistanceModel(
            r=obj["r"], bins=bins, max_training_path_m=obj["max_path_m"]
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f)
            f.write("\n")

    @staticmethod
    def load(path) -> "SimilarityDistanceModel":
        with open(path) as f:
            return SimilarityDistanceModel.from_json_dict(json.load(f))


def bin_index(s: float, r: float) -> int:
    """Index of the width-r bin containing s; bin k spans [k*r, (k+1)*r).

    s = 1.0 would open a new bin past the similarity range when r divides 1,
    so indices clamp to the last bin that starts below 1.
    """
    return min(int(math.floor(s / r)), int(math.ceil(1.0 / r)) - 1)


def collect_training_pairs(
    fingerprints,
    poses: np.ndarray,
    params: SimilarityParams,
    max_path_m: float = 100.0,
    arc: np.ndarray | None = None,
) -> list[TrainingSample]:
    """Harvest (similarity, odometry distance) samples from one robot.

    Every index pair (i, j), i < j, whose odometry path length between the
    nodes is at most max_path_m yields one sample; the distance label is the
    straight-line distance between the two odometry poses. Output is in
    (i, j) order. arc optionally supplies cumulative path length per node
    measured on denser odometry; the default sums node-to-node chords.
    """
    fingerprints = list(fingerprints)
    poses = np.asarray(poses, dtype=float)
    if len(fingerprints) != len(poses):
        raise DataError(
            f"{len(fingerprints)} fingerprints vs {len(poses)} poses; must align"
        )
    n = len(fingerprints)
    if n < 2 or max_path_m <= 0:
        return []

    arc = path_lengths(poses) if arc is None else np.asarray(arc, dtype=float)
    if arc.shape != (n,):
        raise DataError("arc must have one entry per fingerprint")
    mat = FingerprintMatrix(fingerprints)
    sim = pairwise_similarity(mat, mat, params)

    samples = []
    for i in range(n):
        for j in range(i + 1, n):
            if arc[j] - arc[i] > max_path_m:
                break  # arc is monotone in j
            d = math.hypot(poses[j, 0] - poses[i, 0], poses[j, 1] - poses[i, 1])
            samples.append(TrainingSample(s=float(sim[i, j]), d=d))
    return samples


def fit_binned_model(
    samples, r: float = 0.05, max_path_m: float = 100.0
) -> SimilarityDistanceModel:
    """Bin samples by similarity and store per-bin mean/variance of distance.

    Samples are sorted by (s, d) before accumulation so a permuted input
    produces an identical model. Variance is the population variance.
    """
    if not 0 < r <= 1:
        raise DataError(f"bin width r must be in (0, 1], got {r}")
    samples = sorted(samples, key=lambda w: (w.s, w.d))
    if not samples:
        raise DataError("cannot fit a similarity-distance model on zero samples")

    members: dict[int, list[float]] = {}
    for w in samples:
        members.setdefault(bin_index(w.s, r), []).append(w.d)

    bins = []
    for k in sorted(members):
        ds = members[k]
        mean = sum(ds) / len(ds)
        var = sum((d - mean) ** 2 for d in ds) / len(ds)
        bins.append(
            ModelBin(center=(k + 0.5) * r, d_hat=mean, var=var, count=len(ds))
        )
    return SimilarityDistanceModel(
        r=r, bins=tuple(bins), max_training_path_m=max_path_m
    )


def predict(
    model: SimilarityDistanceModel, s: float, interpolate: bool = False
) -> tuple[float, float]:
    """Expected distance and variance for a similarity value.

    Falls back to the nearest stored bin when s lands in an empty bin (ties
    resolve to the higher-similarity bin). With interpolate=True, queries
    between two stored centers blend them linearly instead.
    """
    bins = model.bins
    centers = model.centers
    if interpolate:
        if s <= centers[0]:
            b = bins[0]
            return b.d_hat, b.var
        if s >= centers[-1]:
            b = bins[-1]
            return b.d_hat, b.var
        hi = int(np.searchsorted(centers, s, side="left"))
        lo = hi - 1
        t = (s - centers[lo]) / (centers[hi] - centers[lo])
        d0, d1 = bins[lo], bins[hi]
        return (
            (1.0 - t) * d0.d_hat + t * d1.d_hat,
            (1.0 - t) * d0.var + t * d1.var,
        )

    k = bin_index(s, model.r)
    best = None
    best_dist = math.inf
    for b in bins:
        if bin_index(b.center, model.r) == k:
            return b.d_hat, b.var
        dist = abs(b.center - s)
        if dist < best_dist or (dist == best_dist and b.center > best.center):
            best, best_dist = b, dist
    return best.d_hat, best.var


def predict_many(
    model: SimilarityDistanceModel, s: np.ndarray, interpolate: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized predict over an array of similarity values."""
    s = np.asarray(s, dtype=float)
    flat = s.reshape(-1)
    d = np.empty_like(flat)
    v = np.empty_like(flat)
    cache: dict[float, tuple[float, float]] = {}
    for idx, val in enumerate(flat):
        key = float(val)
        hit = cache.get(key)
        if hit is None:
            hit = predict(model, key, interpolate=interpolate)
            cache[key] = hit
        d[idx], v[idx] = hit
    return d.reshape(s.shape), v.reshape(s.shape)
