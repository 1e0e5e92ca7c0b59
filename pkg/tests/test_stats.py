import math

import numpy as np
import pytest
import scipy.stats as ss
from hypothesis import given
from hypothesis import strategies as st

from rashomon_audit.errors import DegenerateGroups, IncompleteDesign
from rashomon_audit.stats import (
    adjust_p,
    chi_square_sf,
    dunn_pairwise,
    friedman,
    kruskal_wallis,
    normal_two_sided_p,
    rank_with_ties,
)

KW_FIXTURE = {"a": [1, 2, 3], "b": [4, 5, 6], "c": [7, 8, 9]}
# frozen from scipy.stats (kruskal, friedmanchisquare, chi2.sf) and a hand z via scipy.stats.norm
KW_P = 0.02732372244729252
FRIEDMAN_P = 0.04978706836786395
CHI2_5_P = 0.23370281981484675
DUNN_Z_AC = -2.6832815729997477
DUNN_P_AC = 0.007290358091535638


def scipy_dunn(groups):
    """Reference Dunn z and two-sided p from scipy ranks and the normal law."""
    pooled = np.concatenate(groups)
    n = len(pooled)
    ranks = ss.rankdata(pooled)
    _, t = np.unique(pooled, return_counts=True)
    var = n * (n + 1) / 12 - (t**3 - t).sum() / (12 * (n - 1))
    bounds = np.cumsum([0] + [len(g) for g in groups])
    means = [ranks[bounds[i]:bounds[i + 1]].mean() for i in range(len(groups))]
    out = {}
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            z = (means[i] - means[j]) / math.sqrt(var * (1 / len(groups[i]) + 1 / len(groups[j])))
            out[i, j] = (z, 2 * ss.norm.sf(abs(z)))
    return out


@pytest.mark.parametrize(
    "values,expected",
    [((10, 20, 30), (1, 2, 3)), ((5, 5), (1.5, 1.5)), ((3, 1, 3, 2), (3.5, 1, 3.5, 2))],
)
def test_rank_examples(values, expected):
    assert rank_with_ties(values).tolist() == list(expected)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=60))
def test_ranks_match_scipy(values):
    assert np.array_equal(rank_with_ties(values), ss.rankdata(values))


def test_kruskal_fixture():
    r = kruskal_wallis(KW_FIXTURE)
    assert r.statistic == pytest.approx(7.2, abs=1e-12)
    assert r.df == 2
    assert r.p_value == pytest.approx(KW_P, abs=1e-10)
    assert "7.2" in r.describe() and "(2)" in r.describe()


def test_kruskal_identical_groups():
    r = kruskal_wallis([[1, 2, 3], [1, 2, 3]])
    assert r.statistic == pytest.approx(0.0, abs=1e-12)
    assert r.p_value == pytest.approx(1.0)


def test_kruskal_degenerate():
    with pytest.raises(DegenerateGroups):
        kruskal_wallis([[2, 2], [2, 2, 2]])


def test_kruskal_group_validation():
    with pytest.raises(ValueError):
        kruskal_wallis([[1, 2, 3]])
    with pytest.raises(ValueError):
        kruskal_wallis([[1], []])


def test_kruskal_matches_scipy_with_ties():
    rng = np.random.default_rng(3)
    for _ in range(100):
        k = int(rng.integers(2, 6))
        groups = [rng.integers(0, 8, int(rng.integers(1, 12))).astype(float) for _ in range(k)]
        if len(np.unique(np.concatenate(groups))) == 1 or sum(map(len, groups)) < 3:
            continue
        ours = kruskal_wallis(groups)
        ref = ss.kruskal(*groups)
        assert ours.statistic == pytest.approx(ref.statistic, rel=1e-10, abs=1e-12)
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-10)


@given(st.lists(st.lists(st.integers(-50, 50), min_size=1, max_size=8), min_size=2, max_size=4))
def test_kruskal_rank_invariance(groups):
    pooled = np.concatenate(groups)
    if len(set(pooled)) == 1 or len(pooled) < 3:
        return
    a = kruskal_wallis(groups)
    b = kruskal_wallis([np.array(g, dtype=float) ** 3 + 5 * np.array(g) for g in groups])
    assert a.statistic == pytest.approx(b.statistic, abs=1e-9)


def test_friedman_fixture():
    r = friedman([[1, 2, 3], [1, 2, 3], [1, 2, 3]])
    assert (r.statistic, r.df) == (pytest.approx(6.0, abs=1e-12), 2)
    assert r.p_value == pytest.approx(FRIEDMAN_P, abs=1e-10)


def test_friedman_fully_tied():
    r = friedman([[4, 4, 4], [2, 2, 2]])
    assert (r.statistic, r.p_value) == (0.0, 1.0)


def test_friedman_df_for_six_ratios():
    rng = np.random.default_rng(0)
    assert friedman(rng.random((8, 6))).df == 5


def test_friedman_incomplete():
    with pytest.raises(IncompleteDesign):
        friedman([[1, 2, np.nan], [1, 2, 3]])
    with pytest.raises(IncompleteDesign):
        friedman([[1, 2, 3]])


def test_friedman_matches_scipy():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n, k = int(rng.integers(2, 10)), int(rng.integers(3, 7))
        b = rng.integers(0, 4, (n, k)).astype(float)
        if all(len(set(row)) == 1 for row in b):
            continue
        ours = friedman(b)
        ref = ss.friedmanchisquare(*b.T)
        assert ours.statistic == pytest.approx(ref.statistic, rel=1e-10, abs=1e-12)
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-10)


@given(st.lists(st.lists(st.integers(0, 20), min_size=3, max_size=3), min_size=2, max_size=8))
def test_friedman_within_block_transform_invariance(rows):
    b = np.array(rows, dtype=float)
    if all(len(set(r)) == 1 for r in b):
        return
    scaled = b * np.arange(1, len(b) + 1)[:, None] + np.arange(len(b))[:, None] * 10
    assert friedman(b).statistic == pytest.approx(friedman(scaled).statistic, abs=1e-9)


def test_chi_square_examples():
    assert chi_square_sf(0.0, 3) == 1.0
    assert chi_square_sf(7.2, 2) == pytest.approx(math.exp(-3.6), abs=1e-10)
    assert chi_square_sf(6.8286, 5) == pytest.approx(CHI2_5_P, abs=1e-10)
    assert abs(chi_square_sf(6.8286, 5) - 0.2337) <= 5e-4


def test_chi_square_matches_scipy_grid():
    for df in (1, 2, 3, 4, 5, 7, 10, 25, 60):
        for x in (1e-6, 0.1, 0.5, 1, 2, 5, 10, 20, 50, 100, 300):
            assert chi_square_sf(x, df) == pytest.approx(ss.chi2.sf(x, df), abs=1e-10)


@given(st.floats(0, 200), st.floats(0, 200), st.integers(1, 40))
def test_chi_square_monotone_and_bounded(x1, x2, df):
    lo, hi = sorted((x1, x2))
    a, b = chi_square_sf(lo, df), chi_square_sf(hi, df)
    assert 0 <= b <= a <= 1


@given(st.floats(0, 500))
def test_chi_square_df2_closed_form(x):
    assert chi_square_sf(x, 2) == pytest.approx(math.exp(-x / 2), abs=1e-10)


def test_chi_square_domain():
    with pytest.raises(ValueError):
        chi_square_sf(-1, 2)
    with pytest.raises(ValueError):
        chi_square_sf(1, 0)


def test_normal_p():
    assert normal_two_sided_p(0.0) == 1.0
    assert normal_two_sided_p(1.959963984540054) == pytest.approx(0.05, abs=1e-12)


def test_dunn_fixture():
    r = dunn_pairwise(KW_FIXTURE, adjustment="none")
    assert r.labels == ("a", "b", "c")
    assert r.z[0, 2] == pytest.approx(DUNN_Z_AC, abs=1e-12)
    assert r.p_raw[0, 2] == pytest.approx(DUNN_P_AC, abs=1e-12)
    assert r.p_raw[0, 2] < 0.05


def test_dunn_matches_scipy_reference():
    rng = np.random.default_rng(9)
    for _ in range(50):
        groups = [rng.integers(0, 10, int(rng.integers(2, 10))).astype(float) for _ in range(4)]
        if len(np.unique(np.concatenate(groups))) == 1:
            continue
        r = dunn_pairwise(groups, "none")
        for (i, j), (z, p) in scipy_dunn(groups).items():
            assert r.z[i, j] == pytest.approx(z, abs=1e-12)
            assert r.p_raw[i, j] == pytest.approx(p, abs=1e-12)


def test_dunn_identical_groups():
    r = dunn_pairwise([[1, 2, 3], [1, 2, 3]], "none")
    assert r.p_raw[0, 1] == pytest.approx(1.0)


def test_dunn_bonferroni_triples_raw_p():
    groups = [[1, 2, 3, 4], [3, 4, 5, 6], [6, 7, 8, 9]]
    raw = dunn_pairwise(groups, "none").p_raw
    adj = dunn_pairwise(groups, "bonferroni").p_adjusted
    for i, j in ((0, 1), (0, 2), (1, 2)):
        assert adj[i, j] == pytest.approx(min(1.0, 3 * raw[i, j]))


def test_dunn_matrix_shape():
    r = dunn_pairwise([[1, 5, 2], [8, 9, 7], [3, 4, 6], [10, 12, 11]])
    assert np.allclose(r.p_adjusted, r.p_adjusted.T)
    assert np.allclose(r.p_raw, r.p_raw.T)
    assert (np.diag(r.p_adjusted) == 1).all()
    assert ((r.p_adjusted >= 0) & (r.p_adjusted <= 1)).all()
    assert r.adjustment == "holm"


def test_dunn_degenerate_and_bad_adjustment():
    with pytest.raises(DegenerateGroups):
        dunn_pairwise([[1, 1], [1, 1]])
    with pytest.raises(ValueError):
        dunn_pairwise([[1, 2], [3, 4]], "sidak")


def test_holm_against_hand_steps():
    p = [0.01, 0.04, 0.03, 0.005]
    # sorted: 0.005*4, 0.01*3, 0.03*2, 0.04*1 -> 0.02, 0.03, 0.06, max(0.06, 0.04)
    assert adjust_p(p, "holm") == pytest.approx([0.03, 0.06, 0.06, 0.02])
    assert adjust_p(p, "bonferroni") == pytest.approx([0.04, 0.16, 0.12, 0.02])
    assert adjust_p(p, "none").tolist() == p


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_holm_bounds(p):
    holm = adjust_p(p, "holm")
    assert (holm >= np.array(p) - 1e-15).all()
    assert (holm <= adjust_p(p, "bonferroni") + 1e-15).all()
    assert (holm <= 1).all()
