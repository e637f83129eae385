import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radioslam.errors import ConfigError
from radioslam.fingerprint import Fingerprint
from radioslam.similarity import (
    FingerprintMatrix,
    SimilarityParams,
    detection_likelihood,
    pairwise_similarity,
    rss_likelihood,
    similarity,
)


def make_fp(entries, scan_count=10, robot=0, index=0, t=0.0):
    return Fingerprint(
        robot_id=robot, index=index, timestamp=t, entries=dict(entries), scan_count=scan_count
    )


# ---------------------------------------------------------------- oracle
# Naive direct evaluation: per-term products without log-space, straight from
# the measure definitions. Deliberately structured differently from the
# library (dict walks, running float products).


def oracle_similarity(a, b, params):
    ids_a, ids_b = set(a.entries), set(b.entries)
    common = sorted(ids_a & ids_b)
    only_a = sorted(ids_a - ids_b)
    only_b = sorted(ids_b - ids_a)
    h, m_a, m_b = len(common), len(only_a), len(only_b)

    if params.measure == "cosine":
        dot = nu = nv = 0.0
        for ap in sorted(ids_a | ids_b):
            ua = max(a.entries[ap][0] - params.cosine_floor_dbm, 0.0) if ap in a.entries else 0.0
            ub = max(b.entries[ap][0] - params.cosine_floor_dbm, 0.0) if ap in b.entries else 0.0
            dot += ua * ub
            nu += ua * ua
            nv += ub * ub
        if nu == 0.0 or nv == 0.0:
            return 0.0
        return min(max(dot / math.sqrt(nu * nv), 0.0), 1.0)

    if h == 0:
        return 0.0
    s_r = 1.0
    for ap in common:
        d = a.entries[ap][0] - b.entries[ap][0]
        s_r *= math.exp(-(d * d) / (2.0 * params.sigma_r**2))
    s = s_r ** (1.0 / h) * (h / (h + m_a + m_b))
    if params.measure == "proposed":
        for ap in only_a:
            tau = a.entries[ap][1]
            if params.tau_scale == "count":
                tau *= a.scan_count
            s *= math.exp(-(tau * tau) / (2.0 * params.sigma_tau**2))
        for ap in only_b:
            tau = b.entries[ap][1]
            if params.tau_scale == "count":
                tau *= b.scan_count
            s *= math.exp(-(tau * tau) / (2.0 * params.sigma_tau**2))
    return s


def random_fp(rng, max_aps=20, pool=40, robot=0, index=0):
    n = int(rng.integers(1, max_aps + 1))
    ids = rng.choice(pool, size=n, replace=False)
    scan_count = int(rng.integers(1, 26))
    entries = {}
    for ap in ids:
        rss = float(rng.uniform(-95.0, -25.0))
        detections = int(rng.integers(1, scan_count + 1))
        entries[f"ap{ap:03d}"] = (rss, detections / scan_count)
    return make_fp(entries, scan_count=scan_count, robot=robot, index=index)


# ---------------------------------------------------------------- examples


def test_rss_likelihood_examples():
    assert rss_likelihood([], 6.0) == 1.0
    assert rss_likelihood([(-50.0, -50.0)], 6.0) == 1.0
    assert rss_likelihood([(-50.0, -56.0)], 6.0) == pytest.approx(math.exp(-0.5), rel=1e-15)


def test_detection_likelihood_examples():
    assert detection_likelihood([], [], 4.0) == 1.0
    assert detection_likelihood([1.0], [], 1.0) == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert detection_likelihood([1.0], [1.0], 4.0) == pytest.approx(
        math.exp(-0.0625), rel=1e-15
    )


def test_similarity_identity_all_measures():
    f = make_fp({"ap1": (-50.0, 1.0), "ap2": (-60.0, 0.5)})
    for measure in ("proposed", "gaussian", "cosine"):
        assert similarity(f, f, SimilarityParams(measure=measure)).s == 1.0


def test_similarity_single_common_ap():
    a = make_fp({"ap1": (-50.0, 1.0)})
    b = make_fp({"ap1": (-56.0, 1.0)})
    s = similarity(a, b, SimilarityParams(sigma_r=6.0)).s
    assert s == pytest.approx(math.exp(-0.5), rel=1e-15)


def test_similarity_extra_ap_example():
    a = make_fp({"ap1": (-50.0, 1.0), "ap2": (-40.0, 1.0)})
    b = make_fp({"ap1": (-50.0, 1.0)})
    s = similarity(a, b, SimilarityParams(sigma_tau=4.0)).s
    assert s == pytest.approx(math.exp(-1.0 / 32.0) * 0.5, rel=1e-15)


def test_similarity_disjoint_zero():
    a = make_fp({"ap1": (-50.0, 1.0)})
    b = make_fp({"ap2": (-50.0, 1.0)})
    for measure in ("proposed", "gaussian", "cosine"):
        assert similarity(a, b, SimilarityParams(measure=measure)).s == 0.0


def test_cosine_below_floor_is_zero():
    a = make_fp({"ap1": (-101.0, 1.0)})
    assert similarity(a, a, SimilarityParams(measure="cosine")).s == 0.0


def test_invalid_params_rejected():
    with pytest.raises(ConfigError):
        SimilarityParams(sigma_r=0.0)
    with pytest.raises(ConfigError):
        SimilarityParams(sigma_tau=-1.0)
    with pytest.raises(ConfigError):
        SimilarityParams(measure="euclidean")
    with pytest.raises(ConfigError):
        SimilarityParams(tau_scale="percent")


# ---------------------------------------------------------------- oracle sweep


@pytest.mark.parametrize("measure", ["proposed", "gaussian", "cosine"])
@pytest.mark.parametrize("tau_scale", ["ratio", "count"])
def test_oracle_equivalence(measure, tau_scale):
    rng = np.random.default_rng(20240811)
    params = SimilarityParams(measure=measure, tau_scale=tau_scale)
    for _ in range(1500):
        a, b = random_fp(rng), random_fp(rng)
        got = similarity(a, b, params).s
        want = oracle_similarity(a, b, params)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-300)


# ---------------------------------------------------------------- properties

entry_strategy = st.dictionaries(
    st.sampled_from([f"ap{i}" for i in range(15)]),
    st.tuples(st.floats(-95.0, -25.0), st.sampled_from([0.2, 0.25, 0.5, 0.75, 1.0])),
    min_size=1,
    max_size=10,
)
fp_strategy = st.builds(make_fp, entry_strategy, scan_count=st.integers(1, 20))
measure_strategy = st.sampled_from(["proposed", "gaussian", "cosine"])


@given(fp_strategy, fp_strategy, measure_strategy)
@settings(max_examples=400)
def test_symmetry_exact(a, b, measure):
    params = SimilarityParams(measure=measure)
    assert similarity(a, b, params).s == similarity(b, a, params).s


@given(fp_strategy, fp_strategy, measure_strategy)
@settings(max_examples=400)
def test_range(a, b, measure):
    s = similarity(a, b, SimilarityParams(measure=measure)).s
    assert 0.0 <= s <= 1.0


@given(fp_strategy, measure_strategy)
@settings(max_examples=300)
def test_identity(f, measure):
    assert similarity(f, f, SimilarityParams(measure=measure)).s == 1.0


@given(fp_strategy, fp_strategy)
@settings(max_examples=300)
def test_extra_ap_strictly_decreases(a, b):
    params = SimilarityParams()
    base = similarity(a, b, params)
    if base.s == 0.0:
        return
    grown = dict(a.entries)
    grown["zz:extra"] = (-60.0, 1.0)
    a2 = make_fp(grown, scan_count=a.scan_count)
    for measure in ("proposed", "gaussian"):
        p = SimilarityParams(measure=measure)
        assert similarity(a2, b, p).s < similarity(a, b, p).s


@given(fp_strategy, fp_strategy, st.floats(1.0, 20.0))
@settings(max_examples=300)
def test_rss_gap_strictly_decreases(a, b, bump):
    params = SimilarityParams()
    dec_common = sorted(set(a.entries) & set(b.entries))
    if not dec_common:
        return
    ap = dec_common[0]
    # push a's rss further from b's on one common AP
    rss_a, ratio = a.entries[ap]
    rss_b = b.entries[ap][0]
    direction = 1.0 if rss_a >= rss_b else -1.0
    moved = dict(a.entries)
    moved[ap] = (rss_a + direction * bump, ratio)
    a2 = make_fp(moved, scan_count=a.scan_count)
    for measure in ("proposed", "gaussian"):
        p = SimilarityParams(measure=measure)
        assert similarity(a2, b, p).s < similarity(a, b, p).s


@given(fp_strategy, fp_strategy)
@settings(max_examples=400)
def test_sigma_tau_limit_is_gaussian(a, b):
    wide = similarity(a, b, SimilarityParams(measure="proposed", sigma_tau=1e6)).s
    gauss = similarity(a, b, SimilarityParams(measure="gaussian")).s
    assert abs(wide - gauss) < 1e-9


@given(fp_strategy, fp_strategy)
@settings(max_examples=200)
def test_proposed_never_exceeds_gaussian(a, b):
    p = similarity(a, b, SimilarityParams(measure="proposed")).s
    g = similarity(a, b, SimilarityParams(measure="gaussian")).s
    assert p <= g + 1e-15


# ---------------------------------------------------------------- batch kernel


def test_pairwise_matches_scalar():
    rng = np.random.default_rng(7)
    fps = [random_fp(rng, index=i) for i in range(40)]
    fm = FingerprintMatrix(fps)
    for measure in ("proposed", "gaussian", "cosine"):
        params = SimilarityParams(measure=measure)
        mat = pairwise_similarity(fm, fm, params)
        assert mat.shape == (40, 40)
        for i in range(0, 40, 7):
            for j in range(0, 40, 5):
                want = similarity(fps[i], fps[j], params).s
                assert mat[i, j] == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_pairwise_requires_shared_vocabulary():
    rng = np.random.default_rng(8)
    fps_a = [random_fp(rng) for _ in range(3)]
    fps_b = [random_fp(rng) for _ in range(3)]
    fa = FingerprintMatrix(fps_a)
    vocab_b = sorted({ap for f in fps_b for ap in f.entries} | {"zz:pad"})
    fb = FingerprintMatrix(fps_b, vocabulary=vocab_b)
    with pytest.raises(ConfigError):
        pairwise_similarity(fa, fb, SimilarityParams())


def test_matrix_rejects_uncovered_vocabulary():
    rng = np.random.default_rng(8)
    with pytest.raises(ConfigError):
        FingerprintMatrix([random_fp(rng)], vocabulary=["zz:pad"])


def test_pairwise_deterministic_rerun():
    rng = np.random.default_rng(9)
    fps = [random_fp(rng, index=i) for i in range(25)]
    fm1 = FingerprintMatrix(fps)
    fm2 = FingerprintMatrix(fps)
    params = SimilarityParams()
    m1 = pairwise_similarity(fm1, fm1, params)
    m2 = pairwise_similarity(fm2, fm2, params)
    assert np.array_equal(m1, m2)
