"""Fingerprint similarity measures.

Three measures over a fingerprint pair:

* "proposed"  — RSS likelihood of common APs, taken to the 1/H power,
  times the detection likelihood of one-sided APs, times the overlap
  fraction H / (H + M_a + M_b).
* "gaussian"  — the same without the detection-likelihood factor.
* "cosine"    — cosine of floored-and-shifted RSS vectors over the AP union.

Products are accumulated in log space so hundreds of terms cannot underflow;
per-side sums are combined commutatively so similarity(a, b) == similarity(b, a)
bit for bit. A vectorized all-pairs kernel backs constraint harvesting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fingerprint import Fingerprint, pair_decompose

MEASURES = ("proposed", "gaussian", "cosine")
TAU_SCALES = ("ratio", "count")


@dataclass(frozen=True)
class SimilarityParams:
    sigma_r: float = 6.0  # dBm; sigma_r**2 = 36
    sigma_tau: float = 4.0
    measure: str = "proposed"
    gaussian_keep_overlap: bool = True
    tau_scale: str = "ratio"
    cosine_floor_dbm: float = -100.0

    def __post_init__(self):
        if self.sigma_r <= 0:
            raise ConfigError(f"sigma_r must be > 0, got {self.sigma_r}")
        if self.sigma_tau <= 0:
            raise ConfigError(f"sigma_tau must be > 0, got {self.sigma_tau}")
        if self.measure not in MEASURES:
            raise ConfigError(f"unknown measure {self.measure!r}")
        if self.tau_scale not in TAU_SCALES:
            raise ConfigError(f"unknown tau_scale {self.tau_scale!r}")


@dataclass(frozen=True)
class SimilarityScore:
    """Similarity s in [0, 1] plus its factors (raw s_r, not its H-th root)."""

    s: float
    s_r: float
    s_tau: float
    overlap_fraction: float

    @property
    def components(self) -> tuple[float, float, float]:
        return (self.s_r, self.s_tau, self.overlap_fraction)


def log_rss_likelihood(common_pairs, sigma_r: float) -> float:
    acc = 0.0
    inv = 1.0 / (2.0 * sigma_r * sigma_r)
    for rss_a, rss_b in common_pairs:
        d = rss_a - rss_b
        acc += d * d
    return -acc * inv


def rss_likelihood(common_pairs, sigma_r: float) -> float:
    """Product of per-AP Gaussian RSS likelihoods; empty input gives 1."""
    return math.exp(log_rss_likelihood(common_pairs, sigma_r))


def log_detection_likelihood(extra_a, extra_b, sigma_tau: float) -> float:
    inv = 1.0 / (2.0 * sigma_tau * sigma_tau)
    sum_a = 0.0
    for tau in extra_a:
        sum_a += tau * tau
    sum_b = 0.0
    for tau in extra_b:
        sum_b += tau * tau
    return -(sum_a + sum_b) * inv


def detection_likelihood(extra_a, extra_b, sigma_tau: float) -> float:
    """Penalty for APs seen on only one side; no extras gives 1."""
    return math.exp(log_detection_likelihood(extra_a, extra_b, sigma_tau))


def _scaled_extras(extras, scan_count: int, tau_scale: str):
    if tau_scale == "count":
        return tuple(tau * scan_count for tau in extras)
    return extras


def similarity(a: Fingerprint, b: Fingerprint, params: SimilarityParams) -> SimilarityScore:
    """Score a fingerprint pair under the configured measure."""
    dec = pair_decompose(a, b)
    h, m_a, m_b = dec.h, dec.m_a, dec.m_b
    denom = h + m_a + m_b
    overlap = h / denom if denom > 0 else 0.0

    log_sr = log_rss_likelihood(dec.common, params.sigma_r)
    log_stau = log_detection_likelihood(
        _scaled_extras(dec.extra_a, a.scan_count, params.tau_scale),
        _scaled_extras(dec.extra_b, b.scan_count, params.tau_scale),
        params.sigma_tau,
    )
    s_r = math.exp(log_sr)
    s_tau = math.exp(log_stau)

    if params.measure == "proposed":
        s = math.exp(log_stau + log_sr / h) * overlap if h > 0 else 0.0
    elif params.measure == "gaussian":
        if h > 0:
            s = math.exp(log_sr / h)
            if params.gaussian_keep_overlap:
                s *= overlap
        else:
            s = 0.0
    else:
        s = _cosine(a, b, params.cosine_floor_dbm)

    return SimilarityScore(s=s, s_r=s_r, s_tau=s_tau, overlap_fraction=overlap)


def _cosine(a: Fingerprint, b: Fingerprint, floor_dbm: float) -> float:
    ids = sorted(a.entries.keys() | b.entries.keys())
    dot = uu = vv = 0.0
    for ap in ids:
        ua = a.entries[ap][0] - floor_dbm if ap in a.entries else 0.0
        ub = b.entries[ap][0] - floor_dbm if ap in b.entries else 0.0
        ua = ua if ua > 0.0 else 0.0
        ub = ub if ub > 0.0 else 0.0
        dot += ua * ub
        uu += ua * ua
        vv += ub * ub
    if uu == 0.0 or vv == 0.0:
        return 0.0
    s = dot / math.sqrt(uu * vv)
    return min(max(s, 0.0), 1.0)


class FingerprintMatrix:
    """Dense (fingerprints x AP-vocabulary) arrays for all-pairs scoring.

    Rows follow the input fingerprint order; the AP vocabulary is the sorted
    union over all fingerprints handed to the constructor (share one
    vocabulary across robots to compare across matrices).
    """

    def __init__(self, fingerprints, vocabulary=None):
        self.fingerprints = list(fingerprints)
        if vocabulary is None:
            vocab = set()
            for fp in self.fingerprints:
                vocab.update(fp.entries.keys())
            vocabulary = sorted(vocab)
        self.vocabulary = list(vocabulary)
        col = {ap: k for k, ap in enumerate(self.vocabulary)}
        n, m = len(self.fingerprints), len(self.vocabulary)
        self.presence = np.zeros((n, m))
        self.rss = np.zeros((n, m))
        self.tau = np.zeros((n, m))
        self.scan_counts = np.zeros(n)
        for i, fp in enumerate(self.fingerprints):
            self.scan_counts[i] = fp.scan_count
            for ap, (mean_rss, ratio) in fp.entries.items():
                k = col.get(ap)
                if k is None:
                    raise ConfigError(
                        f"fingerprint AP {ap!r} missing from the supplied vocabulary"
                    )
                self.presence[i, k] = 1.0
                self.rss[i, k] = mean_rss
                self.tau[i, k] = ratio

    @staticmethod
    def shared_vocabulary(*groups):
        vocab = set()
        for group in groups:
            for fp in group:
                vocab.update(fp.entries.keys())
        return sorted(vocab)


def pairwise_similarity(
    fa: FingerprintMatrix, fb: FingerprintMatrix, params: SimilarityParams
) -> np.ndarray:
    """All-pairs similarity matrix, rows from fa and columns from fb.

    einsum is kept unoptimized (plain C reductions, no threaded BLAS) so the
    result is bit-stable across runs; it matches the scalar path to ~1e-13.
    """
    if fa.vocabulary != fb.vocabulary:
        raise ConfigError("pairwise_similarity requires a shared AP vocabulary")
    pa, pb = fa.presence, fb.presence
    h = np.einsum("ik,jk->ij", pa, pb)
    m_a = pa.sum(axis=1)[:, None] - h
    m_b = pb.sum(axis=1)[None, :] - h
    denom = h + m_a + m_b

    if params.measure == "cosine":
        ua = np.maximum(fa.rss - params.cosine_floor_dbm, 0.0) * pa
        ub = np.maximum(fb.rss - params.cosine_floor_dbm, 0.0) * pb
        dot = np.einsum("ik,jk->ij", ua, ub)
        uu = np.einsum("ik,ik->i", ua, ua)
        vv = np.einsum("jk,jk->j", ub, ub)
        norm2 = uu[:, None] * vv[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(norm2 > 0.0, dot / np.sqrt(norm2), 0.0)
        return np.clip(s, 0.0, 1.0)

    ra2 = pa * fa.rss * fa.rss
    rb2 = pb * fb.rss * fb.rss
    rab = np.einsum("ik,jk->ij", pa * fa.rss, pb * fb.rss)
    sq = np.einsum("ik,jk->ij", ra2, pb) + np.einsum("ik,jk->ij", pa, rb2) - 2.0 * rab
    log_sr = -sq / (2.0 * params.sigma_r * params.sigma_r)

    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.where(h > 0, np.exp(log_sr / np.where(h > 0, h, 1.0)), 0.0)
        overlap = np.where(denom > 0, h / np.where(denom > 0, denom, 1.0), 0.0)

    if params.measure == "gaussian":
        return root * overlap if params.gaussian_keep_overlap else root

    tau_a = fa.tau
    tau_b = fb.tau
    if params.tau_scale == "count":
        tau_a = tau_a * fa.scan_counts[:, None]
        tau_b = tau_b * fb.scan_counts[:, None]
    ta2 = pa * tau_a * tau_a
    tb2 = pb * tau_b * tau_b
    extra_a_sq = ta2.sum(axis=1)[:, None] - np.einsum("ik,jk->ij", ta2, pb)
    extra_b_sq = tb2.sum(axis=1)[None, :] - np.einsum("ik,jk->ij", pa, tb2)
    log_stau = -(extra_a_sq + extra_b_sq) / (2.0 * params.sigma_tau * params.sigma_tau)
    return np.exp(log_stau) * root * overlap
