import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blindcomm import (
    CovarianceAccumulator,
    ExcitationSpec,
    GraphFilter,
    PParams,
    PlantedPartitionParams,
    build_planted_partition,
    c_constants,
    closed_form_spectrum,
    concentration_probe,
    estimate_p_params,
    generate_batch,
    merge,
    theoretical_covariance,
)
from blindcomm.covariance import _moments_all, c_constants_stderr, write_probe_csv
from blindcomm.graph_model import dense_laplacian, sample_adjacency


def test_single_outer_product():
    acc = CovarianceAccumulator(2).accumulate([1.0, 2.0])
    np.testing.assert_array_equal(acc.finalize(), [[1, 2], [2, 4]])


def test_two_samples():
    acc = CovarianceAccumulator(2).accumulate([1.0, 0.0]).accumulate([0.0, 1.0])
    np.testing.assert_array_equal(acc.finalize(), [[0.5, 0], [0, 0.5]])


def test_identity_filter_rademacher_converges():
    model = build_planted_partition(PlantedPartitionParams.from_gamma(10, 0.5))
    Y = generate_batch(model, GraphFilter([1.0]), ExcitationSpec("rademacher"), 10_000, 0).signals
    C = CovarianceAccumulator(10).accumulate_many(Y).finalize()
    assert np.abs(C - np.eye(10)).max() <= 0.05


def test_accumulator_errors():
    acc = CovarianceAccumulator(3)
    with pytest.raises(ValueError):
        acc.finalize()
    with pytest.raises(ValueError):
        acc.accumulate([1.0, 2.0])
    with pytest.raises(ValueError):
        merge(acc, CovarianceAccumulator(4))


def test_centering_flag():
    Y = np.array([[1.0, 3.0], [3.0, 5.0]])
    acc = CovarianceAccumulator(2).accumulate_many(Y)
    np.testing.assert_allclose(acc.finalize(center=True), np.cov(Y.T, bias=True))


def _acc(Y):
    return CovarianceAccumulator(Y.shape[1]).accumulate_many(Y)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(2, 60), split=st.floats(0, 1), seed=st.integers(0, 10_000))
def test_merge_equals_single_pass(m, split, seed):
    Y = np.random.default_rng(seed).uniform(-1, 1, (m, 6))
    cut = int(split * m)
    whole = _acc(Y).finalize()
    merged = merge(_acc(Y[:cut]), _acc(Y[cut:])).finalize() if 0 < cut < m else whole
    np.testing.assert_allclose(merged, whole, rtol=0, atol=1e-12)
    empty = merge(_acc(Y), CovarianceAccumulator(6))
    assert empty.finalize().tobytes() == whole.tobytes()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_merge_associative_and_commutative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_acc(rng.uniform(-1, 1, (rng.integers(1, 20), 5))) for _ in range(3))
    left = merge(merge(a, b), c).finalize()
    right = merge(a, merge(b, c)).finalize()
    np.testing.assert_allclose(left, right, rtol=0, atol=1e-12)
    np.testing.assert_allclose(merge(a, b).finalize(), merge(b, a).finalize(), rtol=0, atol=1e-12)


def test_finalize_is_psd():
    params = PlantedPartitionParams.from_gamma(50, 0.5)
    Y = generate_batch(build_planted_partition(params), GraphFilter([1.0, -0.05]), ExcitationSpec(), 30, 1).signals
    C = _acc(Y).finalize()
    assert np.array_equal(C, C.T)
    assert np.linalg.eigvalsh(C).min() >= -1e-10


# -- p-parameters -------------------------------------------------------------

def brute_force_moments(H):
    """Enumerate every index triple of every pattern (slow, independent oracle)."""
    n = H.shape[0]
    half = n // 2
    same = lambda i, j: (i < half) == (j < half)
    sums = np.zeros(8)
    counts = np.zeros(8)

    def add(k, v):
        sums[k] += v
        counts[k] += 1

    for i in range(n):
        add(0, H[i, i] ** 2)
        for j in range(n):
            if j == i:
                continue
            if same(i, j):
                add(1, H[i, j] ** 2)
                add(4, H[i, i] * H[j, i])
            else:
                add(2, H[i, j] ** 2)
                add(6, H[i, i] * H[j, i])
            for l in range(n):
                if l in (i, j):
                    continue
                if same(i, j) and same(i, l):
                    add(3, H[i, l] * H[j, l])
                elif same(i, j):
                    add(5, H[i, l] * H[j, l])
                else:
                    add(7, H[i, l] * H[j, l])
    return sums / counts


@pytest.mark.parametrize("n,seed", [(6, 0), (8, 1), (12, 2)])
def test_vectorized_moments_match_enumeration(n, seed):
    model = build_planted_partition(PlantedPartitionParams(n, 0.6, 0.3))
    H = GraphFilter([0.8, -0.1, 0.02]).dense(dense_laplacian(sample_adjacency(model, seed)))
    np.testing.assert_allclose(_moments_all(H, n // 2), brute_force_moments(H), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("mode", ["all", "representative", "sampled"])
def test_identity_and_zero_filters(mode):
    params = PlantedPartitionParams.from_gamma(10, 0.5)
    p = estimate_p_params(params, GraphFilter([1.0]), 3, 0, mode=mode)
    np.testing.assert_array_equal(p.values, [1, 0, 0, 0, 0, 0, 0, 0])
    assert p.p1 == 1.0 and p.p8 == 0.0
    z = estimate_p_params(params, GraphFilter([0.0]), 3, 0, mode=mode)
    np.testing.assert_array_equal(z.values, 0)


def test_p_params_preconditions():
    with pytest.raises(ValueError):
        estimate_p_params(PlantedPartitionParams(4, 0.5, 0.5), GraphFilter([1.0]), 1, 0)
    with pytest.raises(ValueError):
        estimate_p_params(PlantedPartitionParams(10, 0.5, 0.5), GraphFilter([1.0]), 0, 0)


def test_p_params_null_model_symmetry():
    params = PlantedPartitionParams(16, 0.3, 0.3)
    filt = GraphFilter([1.0, -0.1, 0.002])
    p = estimate_p_params(params, filt, 3000, 4)
    assert np.all(p.values[:3] >= 0) and np.all(p.stderr >= 0)
    for a, b in ((2, 3), (5, 7), (4, 6), (4, 8)):
        d = p.samples[:, a - 1] - p.samples[:, b - 1]
        se = d.std(ddof=1) / np.sqrt(p.trials)
        assert abs(d.mean()) <= 3 * max(se, 1e-15), (a, b)


def test_c_constants_examples():
    assert c_constants(PParams.from_values(p1=1), 10) == (0, 0, 1)
    assert c_constants(PParams.from_values(p4=1, p5=2, p6=3), 4)[0] == 10
    assert c_constants(PParams.from_values(p8=1), 4)[1] == 2
    with pytest.raises(ValueError):
        c_constants(PParams.from_values(p1=1), 5)


def test_c_constants_equal_block_averages_of_second_moment():
    """c1, c2, c3 from all-triple moments equal block averages of E[H^2] (independent route)."""
    params = PlantedPartitionParams(12, 0.5, 0.2)
    model = build_planted_partition(params)
    filt = GraphFilter([0.9, -0.15, 0.01])
    p = estimate_p_params(params, filt, 50, 6)
    H2 = np.zeros((12, 12))
    from blindcomm._rng import substream

    for t in range(50):
        H = filt.dense(dense_laplacian(sample_adjacency(model, substream(6, "pparams", t))))
        H2 += H @ H / 50
    same = np.kron(np.eye(2), np.ones((6, 6))).astype(bool)
    off = ~np.eye(12, dtype=bool)
    c1, c2, c3 = c_constants(p, 12)
    assert c1 == pytest.approx(H2[same & off].mean(), rel=1e-12)
    assert c2 == pytest.approx(H2[~same].mean(), rel=1e-12)
    assert c3 == pytest.approx(np.diag(H2).mean(), rel=1e-12)
    se = c_constants_stderr(p, 12)
    assert se.shape == (4,) and np.all(se >= 0)


# -- theoretical covariance ---------------------------------------------------

def test_theoretical_covariance_examples():
    np.testing.assert_array_equal(theoretical_covariance(0, 0, 1, 6).matrix(), np.eye(6))
    np.testing.assert_array_equal(
        theoretical_covariance(2, 1, 5, 4).matrix(),
        [[5, 2, 1, 1], [2, 5, 1, 1], [1, 1, 5, 2], [1, 1, 2, 5]],
    )
    with pytest.raises(ValueError):
        theoretical_covariance(1, 1, 1, 5)


def test_identity_filter_end_to_end_is_identity():
    params = PlantedPartitionParams.from_gamma(10, 0.4)
    p = estimate_p_params(params, GraphFilter([1.0]), 2, 0)
    np.testing.assert_array_equal(theoretical_covariance(*c_constants(p, 10), 10).matrix(), np.eye(10))


def test_three_value_structure_and_exchangeability():
    C = theoretical_covariance(0.3, -0.1, 2.0, 10).matrix()
    assert len(np.unique(C)) == 3
    perm = np.r_[np.random.default_rng(0).permutation(5), 5 + np.random.default_rng(1).permutation(5)]
    np.testing.assert_array_equal(C[np.ix_(perm, perm)], C)


def test_closed_form_spectrum_examples():
    s = closed_form_spectrum(2, 1, 5, 4)
    assert (s.mu1, s.mu2, s.mu_rest) == (9, 5, 3)
    assert s.recoverable
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(theoretical_covariance(2, 1, 5, 4).matrix())), [3, 3, 5, 9])
    s = closed_form_spectrum(0.4, 0.4, 1.0, 8)
    assert s.mu2 == s.mu_rest and not s.recoverable
    s = closed_form_spectrum(0, 0, 2.5, 8)
    assert s.mu1 == s.mu2 == s.mu_rest == 2.5


def test_spectrum_eigenvectors():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = 2 * int(rng.integers(2, 60))
        c2 = rng.uniform(-1, 1)
        c1 = abs(c2) + rng.uniform(0.01, 1)
        c3 = rng.uniform(0, 5)
        C = theoretical_covariance(c1, c2, c3, n).matrix()
        s = closed_form_spectrum(c1, c2, c3, n)
        ones = np.ones(n)
        sign = np.r_[np.ones(n // 2), -np.ones(n // 2)]
        norm = np.linalg.norm(C, 2)
        assert np.linalg.norm(C @ ones - s.mu1 * ones) <= 1e-9 * norm * np.sqrt(n)
        assert np.linalg.norm(C @ sign - s.mu2 * sign) <= 1e-9 * norm * np.sqrt(n)


def test_finite_sample_estimate_scales_with_variance():
    params = PlantedPartitionParams.from_gamma(20, 0.3)
    model = build_planted_partition(params)
    filt = GraphFilter([1.0, -0.1])
    plain = generate_batch(model, filt, ExcitationSpec("uniform", 1.0), 200, 9).signals
    scaled = generate_batch(model, filt, ExcitationSpec("uniform", 2.0), 200, 9).signals
    np.testing.assert_allclose(_acc(scaled).finalize(), 4 * _acc(plain).finalize(), rtol=1e-12)


# -- concentration ------------------------------------------------------------

def test_probe_single_point():
    model = build_planted_partition(PlantedPartitionParams.from_gamma(10, 0.5))
    res = concentration_probe(model, GraphFilter([1.0]), ExcitationSpec("rademacher"), [50], np.eye(10), 1, 0)
    assert len(res.raw) == 1 and len(res.summary) == 1
    m, t, err = res.raw[0]
    assert (m, t) == (50, 0) and err > 0


def test_probe_errors_shrink():
    model = build_planted_partition(PlantedPartitionParams.from_gamma(20, 0.5))
    res = concentration_probe(model, GraphFilter([1.0]), ExcitationSpec("rademacher"),
                              [50, 200, 800, 3200], np.eye(20), 5, 1)
    means = [s[1] for s in res.summary]
    assert all(b < a for a, b in zip(means, means[1:]))
    assert -0.65 <= res.slope <= -0.35


def test_probe_rejects_bad_grid():
    model = build_planted_partition(PlantedPartitionParams.from_gamma(10, 0.5))
    with pytest.raises(ValueError):
        concentration_probe(model, GraphFilter([1.0]), ExcitationSpec(), [100, 50], np.eye(10), 1, 0)


def test_probe_csv(tmp_path):
    model = build_planted_partition(PlantedPartitionParams.from_gamma(10, 0.5))
    res = concentration_probe(model, GraphFilter([1.0]), ExcitationSpec("rademacher"), [20, 40], np.eye(10), 2, 0)
    write_probe_csv(res, tmp_path / "raw.csv", tmp_path / "summary.csv")
    assert (tmp_path / "raw.csv").read_text().splitlines()[0] == "m,trial,spectral_error"
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines[0] == "m,mean,std,slope_fit" and len(lines) == 4
