import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from oglab.errors import ConfigurationError, ParseError
from oglab.evalstats import (
    PUBLISHED_TABLES,
    NormalizationBounds,
    SummaryStat,
    annotate_row,
    annotate_table,
    betainc,
    bootstrap_ci,
    denormalize,
    ingest_result_table,
    iqm,
    matches_printed,
    normalize,
    normalize_by_reference,
    parse_cell,
    performance_profile,
    published_table,
    read_references,
    render_table,
    student_t_two_sided_p,
    welch_test,
)


def t_tail_oracle(t: float, df: float) -> float:
    """Two-sided tail by numerically integrating the Student-t density."""
    log_c = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)

    def density(x):
        return math.exp(log_c - (df + 1) / 2 * math.log1p(x * x / df))

    tail, _ = integrate.quad(density, abs(t), math.inf, epsabs=1e-14, epsrel=1e-12)
    return 2 * tail


def welch_oracle(m1, s1, n1, m2, s2, n2):
    v1, v2 = s1 * s1 / n1, s2 * s2 / n2
    t = (m1 - m2) / math.sqrt(v1 + v2)
    df = (v1 + v2) ** 2 / (v1 * v1 / (n1 - 1) + v2 * v2 / (n2 - 1))
    return t, df, t_tail_oracle(t, df)


# -- normalisation ----------------------------------------------------------------------

def test_normalize_endpoints_and_midpoint():
    b = NormalizationBounds(50.0, 100.0)
    assert normalize(100.0, b) == 100.0
    assert normalize(50.0, b) == 0.0
    assert normalize(75.0, b) == 50.0


def test_normalize_endpoints_exact_for_awkward_bounds():
    b = NormalizationBounds(-16.950198723080533, -1.927627634310153)
    assert normalize(b.s_expert, b) == 100.0
    assert normalize(b.s_random, b) == 0.0


@pytest.mark.parametrize("lo,hi", [(1.0, 1.0), (0.0, math.nan), (math.inf, 1.0)])
def test_degenerate_bounds_rejected(lo, hi):
    with pytest.raises(ConfigurationError):
        NormalizationBounds(lo, hi)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e4, 1e4))
def test_denormalize_inverts_normalize(lo, hi, s):
    if abs(hi - lo) < 1e-3:
        return
    b = NormalizationBounds(lo, hi)
    scale = max(1.0, abs(s), abs(lo), abs(hi))
    assert abs(denormalize(normalize(s, b), b) - s) <= 1e-12 * scale * 1000


def test_normalize_by_reference():
    assert normalize_by_reference(7.0, 7.0) == 1.0
    assert normalize_by_reference(14.0, 7.0) == 2.0
    assert normalize_by_reference(-3.0, 6.0) == -0.5
    with pytest.raises(ConfigurationError):
        normalize_by_reference(1.0, 0.0)


# -- Student-t and incomplete beta ---------------------------------------------------------

@pytest.mark.parametrize("df", [2, 5, 10, 20, 50])
def test_t_p_values_match_integration_oracle(df):
    for t in np.arange(0.5, 10.01, 0.5):
        assert abs(student_t_two_sided_p(t, df) - t_tail_oracle(t, df)) < 1e-6


def test_t_p_values_on_dense_grid():
    for df in range(2, 51):
        for t in np.linspace(0, 10, 21):
            assert abs(student_t_two_sided_p(t, df) - t_tail_oracle(t, df)) < 1e-6


def test_t_p_value_edge_cases():
    assert student_t_two_sided_p(0.0, 7.0) == 1.0
    assert student_t_two_sided_p(math.inf, 7.0) == 0.0
    assert student_t_two_sided_p(-2.0, 7.0) == student_t_two_sided_p(2.0, 7.0)


@given(st.floats(0.1, 30), st.floats(0.1, 30), st.floats(0, 1))
@settings(max_examples=200)
def test_betainc_matches_reference(a, b, x):
    assert betainc(a, b, x) == pytest.approx(float(special.betainc(a, b, x)), abs=1e-10)


# -- Welch ---------------------------------------------------------------------------------

def test_identical_stats_are_not_significant():
    a = SummaryStat(3.0, 1.0, 10)
    r = welch_test(a, a)
    assert r.t == 0.0 and r.p == 1.0 and not r.significant


def test_published_significant_pair():
    ours, theirs = SummaryStat(12.36, 1.09, 10), SummaryStat(8.25, 0.37, 5)
    r = welch_test(ours, theirs)
    t, df, p = welch_oracle(12.36, 1.09, 10, 8.25, 0.37, 5)
    assert r.t == pytest.approx(t, rel=1e-12) and r.df == pytest.approx(df, rel=1e-12)
    assert abs(r.p - p) < 1e-6
    assert r.t == pytest.approx(10.7, abs=0.05)
    assert r.significant


def test_published_non_significant_pair():
    r = welch_test(SummaryStat(19.52, 0.26, 10), SummaryStat(19.15, 0.32, 5))
    t, df, p = welch_oracle(19.52, 0.26, 10, 19.15, 0.32, 5)
    assert abs(r.p - p) < 1e-6
    assert r.t == pytest.approx(2.24, abs=0.01) and r.df == pytest.approx(6.8, abs=0.1)
    assert not r.significant


stat_strategy = st.builds(SummaryStat, st.floats(-100, 100), st.floats(0.01, 50), st.integers(2, 30))


@given(stat_strategy, stat_strategy)
def test_welch_symmetry(a, b):
    ab, ba = welch_test(a, b), welch_test(b, a)
    assert ab.p == ba.p and ab.t == -ba.t and ab.df == ba.df
    assert 0.0 <= ab.p <= 1.0 and ab.significant == (ab.p < 0.05)


def test_zero_variance_conventions():
    assert welch_test(SummaryStat(1, 0, 5), SummaryStat(1, 0, 5)).p == 1.0
    r = welch_test(SummaryStat(2, 0, 5), SummaryStat(1, 0, 5))
    assert r.p == 0.0 and r.significant and r.t == math.inf


def test_welch_needs_two_samples():
    with pytest.raises(ConfigurationError):
        welch_test(SummaryStat(1, 1, 1), SummaryStat(1, 1, 5))


def test_summary_stat_validation():
    with pytest.raises(ConfigurationError):
        SummaryStat(1.0, -1.0, 5)
    with pytest.raises(ConfigurationError):
        SummaryStat(1.0, 1.0, 5, source="blog")
    s = SummaryStat.from_values([1.0, 3.0], ddof=1)
    assert (s.mean, s.std, s.n) == (2.0, math.sqrt(2.0), 2)


# -- annotation ------------------------------------------------------------------------------

def test_all_identical_row():
    cells = [SummaryStat(5.0, 1.0, 5, f"a{j}") for j in range(4)]
    row = annotate_row(("t", "q"), cells)
    assert row.bold == 0 and row.starred == [False, True, True, True]


def test_far_entry_is_not_starred():
    cells = [SummaryStat(10.0, 1.0, 5), SummaryStat(0.0, 1.0, 5), SummaryStat(9.5, 1.0, 5)]
    row = annotate_row(("t", "q"), cells)
    assert row.bold == 0 and row.starred == [False, False, True]
    t, df, p = welch_oracle(0.0, 1.0, 5, 10.0, 1.0, 5)
    assert p < 0.05 and abs(row.tests[1].p - p) < 1e-6


def test_cn_expert_row():
    row = annotate_row(("CN", "expert"), [SummaryStat(114.9, 2.6, 5), SummaryStat(112.0, 4.0, 5)])
    assert row.bold == 0 and row.starred == [False, True]


def test_bold_is_never_starred_and_missing_cells_skip():
    row = annotate_row(("t", "q"), [None, SummaryStat(1.0, 0.1, 5), SummaryStat(3.0, 0.1, 5)])
    assert row.bold == 2 and not row.starred[2] and row.tests[0] is None


def test_malformed_row():
    with pytest.raises(ConfigurationError):
        annotate_row(("t", "q"), [SummaryStat(1.0, 0.1, 5), None])


@given(st.lists(stat_strategy, min_size=2, max_size=6), st.floats(0.01, 1000))
def test_stars_invariant_under_common_rescaling(cells, c):
    base = annotate_row(("t", "q"), cells)
    scaled = annotate_row(("t", "q"), [SummaryStat(s.mean * c, s.std * c, s.n) for s in cells])
    assert base.bold == scaled.bold
    for j in range(len(cells)):
        if base.tests[j] is not None and abs(base.tests[j].p - 0.05) > 1e-9:
            assert base.starred[j] == scaled.starred[j]


@pytest.mark.parametrize("task,quality", [("2c_vs_64zg", "good"), ("5m_vs_6m", "good"), ("corridor", "poor")])
def test_published_smac_rows_reproduced(task, quality):
    table = published_table("smac_omiga")
    assert matches_printed(table, annotate_table(table), task, quality)


def test_published_mpe_cn_expert_reproduced():
    table = published_table("mpe_omar")
    assert matches_printed(table, annotate_table(table), "CN", "expert")


@pytest.mark.parametrize("name", PUBLISHED_TABLES)
def test_every_bundled_row_reproduced(name):
    table = published_table(name)
    annotated = annotate_table(table)
    assert all(matches_printed(table, annotated, *key) for key in table.rows)


# -- ingestion -------------------------------------------------------------------------------

def test_parse_published_cells():
    s, bold, star = parse_cell("114.90±2.60", 5, "omar")
    assert (s.mean, s.std, s.n, bold, star) == (114.9, 2.6, 5, False, False)
    s, _, _ = parse_cell("-35.92±32.53", 5, "x")
    assert s.mean == -35.92
    s, bold, star = parse_cell("**19.15±0.32***", 5, "x")
    assert bold and star and s.mean == 19.15
    assert parse_cell("Not available", 5, "x")[0] is None


def test_garbage_cell_reports_position():
    text = "task,quality,a@n=5,b@n=10\nt1,good,1.0±0.1,2.0±0.2\nt2,good,1.0±0.1,garbage\n"
    with pytest.raises(ParseError) as err:
        ingest_result_table(io.StringIO(text))
    assert (err.value.row, err.value.column) == (3, 4)


def test_header_requires_seed_counts():
    with pytest.raises(ParseError) as err:
        ingest_result_table(io.StringIO("task,quality,a@n=5,b\nt,q,1±1,2±2\n"))
    assert err.value.column == 4


def test_ingest_assigns_sources_and_n():
    text = "task,quality,lit@n=5,mine@n=10\nt,q,1±1,2±2\n"
    table = ingest_result_table(io.StringIO(text), ours=("mine",))
    assert [(c.algo, c.n, c.source) for c in table.columns] == [("lit", 5, "literature"), ("mine", 10, "ours")]
    assert table.cells[0][1].source == "ours" and table.cells[0][1].n == 10


def test_render_round_trips():
    table = published_table("smac_omiga")
    annotated = annotate_table(table)
    again = ingest_result_table(io.StringIO(render_table(annotated)))
    assert again.rows == table.rows
    assert again.printed_bold == table.printed_bold and again.printed_star == table.printed_star


def test_references_file(tmp_path):
    p = tmp_path / "refs.txt"
    p.write_text("# best published\nCN,expert,114.9\n\n5m_vs_6m,good,8.25\n")
    assert read_references(p) == {("CN", "expert"): 114.9, ("5m_vs_6m", "good"): 8.25}
    p.write_text("CN,expert,lots\n")
    with pytest.raises(ParseError):
        read_references(p)


# -- robust aggregates -------------------------------------------------------------------------

def test_iqm_examples():
    assert iqm([1, 2, 3, 4]) == 2.5
    assert iqm(range(1, 9)) == 4.5
    assert iqm([7.25]) == 7.25
    with pytest.raises(ConfigurationError):
        iqm([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40), st.randoms())
def test_iqm_permutation_invariant_and_monotone(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert iqm(shuffled) == pytest.approx(iqm(values), rel=1e-12, abs=1e-6)
    assert iqm(values + [max(values) + 1.0]) >= iqm(values) - 1e-6


def test_bootstrap_degenerate_and_deterministic():
    assert bootstrap_ci([3.0] * 8) == (3.0, 3.0)
    data = np.random.default_rng(0).normal(size=30)
    assert bootstrap_ci(data, "iqm", seed=4) == bootstrap_ci(data, "iqm", seed=4)


@pytest.mark.parametrize("statistic", ["mean", "median", "iqm"])
def test_bootstrap_widens_with_confidence(statistic):
    data = np.random.default_rng(1).normal(size=25)
    lo90, hi90 = bootstrap_ci(data, statistic, confidence=0.90, seed=2)
    lo99, hi99 = bootstrap_ci(data, statistic, confidence=0.99, seed=2)
    assert lo99 <= lo90 and hi99 >= hi90


def test_bootstrap_rejects_bad_arguments():
    with pytest.raises(ConfigurationError):
        bootstrap_ci([1.0])
    with pytest.raises(ConfigurationError):
        bootstrap_ci([1.0, 2.0], "mode")


def test_performance_profile():
    curve = performance_profile([0.2, 0.5, 0.8], [0.1, 0.4, 0.5, 0.9])
    assert curve.fractions == (1.0, 2 / 3, 1 / 3, 0.0)
    with pytest.raises(ConfigurationError):
        performance_profile([0.2], [0.5, 0.1])


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.lists(st.floats(-20, 20), min_size=1, max_size=30))
def test_profile_non_increasing(scores, taus):
    curve = performance_profile(scores, sorted(taus))
    assert all(a >= b for a, b in zip(curve.fractions, curve.fractions[1:]))
    assert all(0.0 <= f <= 1.0 for f in curve.fractions)
