import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radioslam.errors import DataError
from radioslam.fingerprint import (
    ApObservation,
    RawScan,
    group_scans,
    pair_decompose,
)


def scan(t, obs, robot=0, device=0):
    return RawScan(
        robot_id=robot,
        device_id=device,
        timestamp=t,
        observations=tuple(ApObservation(ap, rss) for ap, rss in obs),
    )


def fp_like(entries, robot=0, index=0, t=0.0, scan_count=1):
    fps = group_scans([scan(0.0, [(ap, rss) for ap, (rss, _r) in entries.items()])], 5.0)
    # direct construction path for arbitrary ratios
    return fps[0].__class__(
        robot_id=robot, index=index, timestamp=t, entries=dict(entries), scan_count=scan_count
    )


def test_single_scan_identity():
    fps = group_scans([scan(0.0, [("ap1", -50.0)])], 5.0)
    assert len(fps) == 1
    assert fps[0].entries == {"ap1": (-50.0, 1.0)}
    assert fps[0].scan_count == 1
    assert fps[0].index == 0


def test_two_scan_hand_average():
    fps = group_scans(
        [scan(0.0, [("ap1", -50.0)]), scan(1.0, [("ap1", -60.0), ("ap2", -70.0)])],
        5.0,
    )
    assert len(fps) == 1
    assert fps[0].entries == {"ap1": (-55.0, 1.0), "ap2": (-70.0, 0.5)}
    assert fps[0].scan_count == 2


def test_window_boundary_two_windows():
    fps = group_scans([scan(0.0, [("ap1", -50.0)]), scan(7.0, [("ap1", -51.0)])], 5.0)
    assert len(fps) == 2
    assert [f.index for f in fps] == [0, 1]
    # window centers: [0,5) -> 2.5, [5,10) -> 7.5
    assert fps[0].timestamp == 2.5
    assert fps[1].timestamp == 7.5


def test_empty_windows_skipped_and_indices_consecutive():
    fps = group_scans(
        [scan(0.0, [("a", -40.0)]), scan(17.0, [("a", -41.0)])], 5.0
    )
    assert [f.index for f in fps] == [0, 1]


def test_empty_input():
    assert group_scans([], 5.0) == []


def test_non_monotonic_rejected():
    with pytest.raises(DataError):
        group_scans([scan(5.0, [("a", -40.0)]), scan(0.0, [("a", -41.0)])], 5.0)


def test_duplicate_ap_in_scan_rejected():
    with pytest.raises(DataError):
        scan(0.0, [("a", -40.0), ("a", -42.0)])


def test_min_aps_filters_thin_fingerprints():
    fps = group_scans(
        [scan(0.0, [("a", -40.0)]), scan(6.0, [("a", -40.0), ("b", -50.0)])],
        5.0,
        min_aps=2,
    )
    assert len(fps) == 1
    assert fps[0].index == 0
    assert set(fps[0].entries) == {"a", "b"}


def test_device_interleaving_irrelevant():
    # two devices share a timestamp, so either input order is time-sorted
    s1 = scan(0.5, [("a", -40.0)], device=0)
    s2 = scan(0.5, [("a", -44.0), ("b", -60.0)], device=1)
    fps_a = group_scans([s1, s2], 5.0)
    fps_b = group_scans([s2, s1], 5.0)
    assert fps_a[0].entries == fps_b[0].entries
    assert fps_a[0].entries == {"a": (-42.0, 1.0), "b": (-60.0, 0.5)}


def test_ap_ids_lowercased():
    fps = group_scans([scan(0.0, [("AA:BB", -50.0)])], 5.0)
    assert list(fps[0].entries) == ["aa:bb"]


def test_pair_decompose_identity_and_disjoint():
    f1 = group_scans([scan(0.0, [("ap1", -50.0), ("ap2", -60.0)])], 5.0)[0]
    d = pair_decompose(f1, f1)
    assert (d.h, d.m_a, d.m_b) == (2, 0, 0)

    f2 = group_scans([scan(0.0, [("ap3", -50.0)])], 5.0)[0]
    d2 = pair_decompose(f1, f2)
    assert (d2.h, d2.m_a, d2.m_b) == (0, 2, 1)


def test_pair_decompose_hand_example():
    a = group_scans([scan(0.0, [("ap1", -50.0), ("ap2", -60.0)])], 5.0)[0]
    b = group_scans([scan(0.0, [("ap2", -61.0), ("ap3", -70.0), ("ap4", -80.0)])], 5.0)[0]
    d = pair_decompose(a, b)
    assert (d.h, d.m_a, d.m_b) == (1, 1, 2)
    assert d.common == ((-60.0, -61.0),)


ap_strategy = st.dictionaries(
    st.sampled_from([f"ap{i}" for i in range(12)]),
    st.floats(-95.0, -25.0),
    min_size=1,
    max_size=8,
)


@given(ap_strategy, ap_strategy)
@settings(max_examples=300)
def test_pair_decompose_symmetry_and_partition(ea, eb):
    a = group_scans([scan(0.0, list(ea.items()))], 5.0)[0]
    b = group_scans([scan(0.0, list(eb.items()))], 5.0)[0]
    d_ab = pair_decompose(a, b)
    d_ba = pair_decompose(b, a)
    assert d_ab.h == d_ba.h
    assert d_ab.m_a == d_ba.m_b and d_ab.m_b == d_ba.m_a
    assert d_ab.extra_a == d_ba.extra_b
    assert sorted(d_ab.common) == sorted((y, x) for x, y in d_ba.common)
    assert d_ab.h + d_ab.m_a == len(a.entries)
    assert d_ab.h + d_ab.m_b == len(b.entries)


@given(
    st.lists(
        st.tuples(
            st.floats(0.0, 49.9),
            st.integers(0, 3),
            st.dictionaries(
                st.sampled_from(["a", "b", "c", "d"]),
                st.floats(-90.0, -30.0),
                min_size=1,
                max_size=4,
            ),
        ),
        min_size=1,
        max_size=30,
    )
)
@settings(max_examples=200)
def test_group_scans_ratio_integrality(raw):
    raw.sort(key=lambda r: r[0])
    scans = [scan(t, list(obs.items()), device=dev) for t, dev, obs in raw]
    for fp in group_scans(scans, 5.0):
        assert fp.scan_count >= 1
        for ap, (rss, ratio) in fp.entries.items():
            assert 0.0 < ratio <= 1.0
            detections = ratio * fp.scan_count
            assert detections == pytest.approx(round(detections), abs=1e-9)
