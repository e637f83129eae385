"""Windowed WiFi fingerprints from raw scans.

A fingerprint summarizes all scans of one robot inside a fixed time window:
for every access point seen in the window it stores the mean RSS over the
scans that contained it and the detection ratio (detections / scan count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DataError


@dataclass(frozen=True)
class ApObservation:
    """One access point sighting inside a single scan."""

    ap_id: str
    rss: float  # dBm

    def __post_init__(self):
        if not self.ap_id:
            raise DataError("ApObservation with empty ap_id")
        if not math.isfinite(self.rss):
            raise DataError(f"non-finite rss for AP {self.ap_id!r}")


@dataclass(frozen=True)
class RawScan:
    """One scan round of one device on one robot."""

    robot_id: int
    device_id: int
    timestamp: float
    observations: tuple[ApObservation, ...]

    def __post_init__(self):
        seen = set()
        for obs in self.observations:
            if obs.ap_id in seen:
                raise DataError(
                    f"duplicate AP {obs.ap_id!r} in scan at t={self.timestamp}"
                )
            seen.add(obs.ap_id)


@dataclass(frozen=True)
class Fingerprint:
    """Per-window radio signature of one robot.

    entries maps ap_id -> (mean_rss, detection_ratio); detection_ratio is in
    (0, 1] on the default ratio scale. index is the emission ordinal (empty
    windows are skipped), timestamp is the window center.
    """

    robot_id: int
    index: int
    timestamp: float
    entries: dict[str, tuple[float, float]]
    scan_count: int

    def ap_ids(self) -> list[str]:
        return list(self.entries.keys())


@dataclass(frozen=True)
class PairDecomposition:
    """AP-set split of a fingerprint pair: common vs one-sided access points."""

    common: tuple[tuple[float, float], ...]  # (rss_a, rss_b), sorted by ap_id
    extra_a: tuple[float, ...]  # detection ratios of APs only in a
    extra_b: tuple[float, ...]
    common_ids: tuple[str, ...] = field(default=(), repr=False)

    @property
    def h(self) -> int:
        return len(self.common)

    @property
    def m_a(self) -> int:
        return len(self.extra_a)

    @property
    def m_b(self) -> int:
        return len(self.extra_b)


def group_scans(scans, window_s: float, min_aps: int = 1) -> list[Fingerprint]:
    """Aggregate a time-ordered scan stream of one robot into window fingerprints.

    Windows are aligned to the first scan's timestamp, have fixed width
    window_s and do not overlap. All devices contribute to the same window;
    within a window scans are processed in (timestamp, device_id) order so the
    result does not depend on how devices were interleaved in the input.
    Windows without scans emit nothing; emitted fingerprints are indexed
    consecutively from 0.
    """
    if window_s <= 0:
        raise DataError(f"window_s must be positive, got {window_s}")
    scans = list(scans)
    if not scans:
        return []
    for prev, cur in zip(scans, scans[1:]):
        if cur.timestamp < prev.timestamp:
            raise DataError(
                f"scans not in time order: {cur.timestamp} after {prev.timestamp}"
            )
    robot_id = scans[0].robot_id
    t0 = scans[0].timestamp

    by_window: dict[int, list[RawScan]] = {}
    for scan in scans:
        if scan.robot_id != robot_id:
            raise DataError("group_scans expects scans from a single robot")
        k = int(math.floor((scan.timestamp - t0) / window_s))
        by_window.setdefault(k, []).append(scan)

    fingerprints = []
    index = 0
    for k in sorted(by_window):
        window = sorted(by_window[k], key=lambda s: (s.timestamp, s.device_id))
        scan_count = len(window)
        rss_sum: dict[str, float] = {}
        hits: dict[str, int] = {}
        for scan in window:
            for obs in scan.observations:
                ap = obs.ap_id.lower()
                rss_sum[ap] = rss_sum.get(ap, 0.0) + obs.rss
                hits[ap] = hits.get(ap, 0) + 1
        entries = {
            ap: (rss_sum[ap] / hits[ap], hits[ap] / scan_count)
            for ap in sorted(rss_sum)
        }
        if len(entries) < min_aps:
            continue
        fingerprints.append(
            Fingerprint(
                robot_id=robot_id,
                index=index,
                timestamp=t0 + (k + 0.5) * window_s,
                entries=entries,
                scan_count=scan_count,
            )
        )
        index += 1
    return fingerprints


def pair_decompose(a: Fingerprint, b: Fingerprint) -> PairDecomposition:
    """Split the AP union of two fingerprints into common and one-sided sets."""
    ids_a = a.entries.keys()
    ids_b = b.entries.keys()
    common_ids = sorted(ids_a & ids_b)
    common = tuple((a.entries[ap][0], b.entries[ap][0]) for ap in common_ids)
    extra_a = tuple(a.entries[ap][1] for ap in sorted(ids_a - ids_b))
    extra_b = tuple(b.entries[ap][1] for ap in sorted(ids_b - ids_a))
    return PairDecomposition(
        common=common,
        extra_a=extra_a,
        extra_b=extra_b,
        common_ids=tuple(common_ids),
    )
