import json
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats as sps

from decohere import stats as sx
from decohere.stats import TrialFormatError, TrialRecord

HEADER = "run_id,group,cell_count,caspase_per_cell\n"
values = st.lists(st.floats(-100, 100), min_size=3, max_size=12)


def fixture_text():
    return sx.dump_trials(sx.hl60_fixture())


# --- ingestion ----------------------------------------------------------------------------

def test_load_twenty_rows(tmp_path):
    path = tmp_path / "trials.csv"
    path.write_text(fixture_text())
    recs = sx.load_trials(path)
    assert len(recs) == 20
    assert {r.group for r in recs} == set(sx.GROUPS)


def test_unknown_group_names_line():
    text = HEADER + "1,Tplus,10,0.1\n1,X,10,0.1\n"
    with pytest.raises(TrialFormatError, match="line 3"):
        sx.parse_trials(text)


def test_empty_file_gives_empty_list(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert sx.load_trials(path) == []


def test_duplicate_pair_rejected():
    with pytest.raises(TrialFormatError, match="duplicate"):
        sx.parse_trials(HEADER + "1,C1,1,1\n1,C1,2,2\n")


@pytest.mark.parametrize("row", ["1,C1,abc,1", "1,C1,1", "x,C1,1,1", "1,C1,-3,1"])
def test_malformed_rows(row):
    with pytest.raises(TrialFormatError, match="line 2"):
        sx.parse_trials(HEADER + row + "\n")


def test_bad_header():
    with pytest.raises(TrialFormatError, match="header"):
        sx.parse_trials("run,group,a,b\n")


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(FileNotFoundError):
        sx.load_trials(tmp_path / "missing.csv")


def test_round_trip():
    recs = sx.hl60_fixture()
    assert sx.parse_trials(sx.dump_trials(recs)) == recs


# --- paired t -------------------------------------------------------------------------------

def test_identical_arms():
    res = sx.paired_t_one_tailed([1, 2, 3], [1, 2, 3])
    assert res.t_stat == 0 and res.p_one_tailed == 0.5


def test_constant_positive_difference_limit():
    res = sx.paired_t_one_tailed([2, 3, 4, 5, 6], [1, 2, 3, 4, 5], "greater")
    assert math.isinf(res.t_stat) and res.p_one_tailed == 0.0
    assert sx.paired_t_one_tailed([2, 3, 4, 5, 6], [1, 2, 3, 4, 5], "less").p_one_tailed == 1.0


def test_textbook_pairs_match_reference():
    a, b = [30, 31, 34, 36, 39], [28, 30, 33, 34, 36]
    res = sx.paired_t_one_tailed(a, b, "greater")
    ref = sps.ttest_rel(a, b, alternative="greater")
    assert res.t_stat == pytest.approx(ref.statistic, abs=1e-10)
    assert res.p_one_tailed == pytest.approx(ref.pvalue, abs=1e-10)
    assert res.df == 4


def test_t_tail_matches_reference():
    for t in (-7.5, -1.0, 0.0, 0.3, 2.2, 40.0):
        for df in (1, 4, 30):
            assert sx.student_t_sf(t, df) == pytest.approx(sps.t.sf(t, df), abs=1e-13)


def test_paired_input_validation():
    with pytest.raises(ValueError):
        sx.paired_t_one_tailed([1], [2])
    with pytest.raises(ValueError):
        sx.paired_t_one_tailed([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        sx.paired_t_one_tailed([1, 2], [1, 2], "two-sided")


@given(values, st.integers(0, 2**32 - 1), st.sampled_from(["greater", "less"]))
def test_matches_scipy_on_random_pairs(a, seed, direction):
    a = np.array(a)
    b = a + np.random.default_rng(seed).normal(size=a.size)
    res = sx.paired_t_one_tailed(a, b, direction)
    ref = sps.ttest_rel(a, b, alternative=direction)
    assert res.p_one_tailed == pytest.approx(ref.pvalue, abs=1e-10)


@given(values, st.integers(0, 2**32 - 1), st.sampled_from(["greater", "less"]))
def test_swap_and_flip_is_antisymmetric(a, seed, direction):
    a = np.array(a)
    b = a + np.random.default_rng(seed).normal(size=a.size)
    flip = "less" if direction == "greater" else "greater"
    p1 = sx.paired_t_one_tailed(a, b, direction).p_one_tailed
    p2 = sx.paired_t_one_tailed(b, a, flip).p_one_tailed
    assert abs(p1 - p2) < 1e-12


@given(values, st.integers(0, 2**32 - 1), st.floats(-50, 50))
def test_common_shift_invariance(a, seed, shift):
    a = np.array(a)
    b = a + np.random.default_rng(seed).normal(size=a.size)
    r1 = sx.paired_t_one_tailed(a, b)
    r2 = sx.paired_t_one_tailed(a + shift, b + shift)
    assert r1.t_stat == pytest.approx(r2.t_stat, rel=1e-6, abs=1e-9)
    assert r1.p_one_tailed == pytest.approx(r2.p_one_tailed, abs=1e-8)


@given(st.integers(3, 10), st.floats(-2, 2), st.floats(0.01, 2))
def test_p_monotone_in_mean_difference(n, m, step):
    z = np.arange(n) - (n - 1) / 2
    b = np.zeros(n)
    p_lo = sx.paired_t_one_tailed(m + z, b).p_one_tailed
    p_hi = sx.paired_t_one_tailed(m + step + z, b).p_one_tailed
    assert p_hi < p_lo


# --- power ---------------------------------------------------------------------------------------

def test_null_effect_power_is_alpha():
    assert sx.power_analysis(0.0, 1.0, 5).power == pytest.approx(0.05, abs=1e-6)
    assert sx.power_analysis(0.0, 2.0, 12, alpha=0.01).power == pytest.approx(0.01, abs=1e-6)


def test_moderate_power_matches_reference():
    res = sx.power_analysis(1.0, 1.0, 5)
    crit = sps.t.isf(0.05, 4)
    ref = sps.nct.sf(crit, 4, 1.0 * math.sqrt(5))
    assert res.power == pytest.approx(ref, abs=1e-6)
    assert res.power == pytest.approx(0.579737358862189, abs=1e-9)


def test_large_effect_power_saturates():
    # fixture-scale caspase gap (T+ minus controls) against its paired spread
    assert sx.power_analysis(0.22, 0.05, 5).power >= 0.999


def test_power_direction_less():
    assert sx.power_analysis(-1.0, 1.0, 5, direction="less").power == pytest.approx(
        sx.power_analysis(1.0, 1.0, 5).power, abs=1e-12)


def test_power_validation():
    for bad in (dict(sd=0.0), dict(n=1), dict(alpha=1.5)):
        kw = dict(effect=1.0, sd=1.0, n=5) | bad
        with pytest.raises(ValueError):
            sx.power_analysis(**kw)


@given(st.floats(-3, 3), st.floats(0.1, 3), st.integers(2, 40))
def test_noncentral_tail_matches_reference(delta, c, df):
    assert sx.noncentral_t_sf(c, df, delta) == pytest.approx(sps.nct.sf(c, df, delta), abs=1e-6)


@given(st.floats(0.05, 2.0), st.integers(3, 20))
def test_power_monotone(effect, n):
    p = sx.power_analysis(effect, 1.0, n).power
    assert sx.power_analysis(effect, 1.0, n + 1).power > p - 1e-12
    assert sx.power_analysis(effect * 1.2, 1.0, n).power > p - 1e-12


# --- protocol report -------------------------------------------------------------------------------

def flags(report):
    return {(c.endpoint, c.label): c.flag for c in report.comparisons}


def test_fixture_reproduces_summaries_exactly():
    rep = sx.protocol_report(sx.hl60_fixture())
    for ep, arms in sx.REPORTED.items():
        for arm, (m, se) in arms.items():
            got_m, got_se = rep.summaries[ep][arm]
            assert got_m == pytest.approx(m, rel=1e-12)
            assert got_se == pytest.approx(se, rel=1e-12)


def test_fixture_significance_categories():
    f = flags(sx.protocol_report(sx.hl60_fixture()))
    assert f[("cell_count", "Tplus vs Tminus")] == "NS"
    assert f[("cell_count", "Tplus vs controls")] != "NS"
    assert f[("cell_count", "Tminus vs controls")] != "NS"
    assert f[("cell_count", "C1 vs C2")] == "NS"
    assert f[("caspase_per_cell", "Tplus vs controls")] != "NS"
    assert f[("caspase_per_cell", "Tminus vs controls")] != "NS"
    assert f[("caspase_per_cell", "C1 vs C2")] == "NS"


def test_fixture_frozen_p_values():
    p = {(c.endpoint, c.label): c.p for c in sx.protocol_report(sx.hl60_fixture()).comparisons}
    assert p[("cell_count", "Tplus vs controls")] == pytest.approx(9.4947e-4, rel=1e-4)
    assert p[("caspase_per_cell", "Tplus vs Tminus")] == pytest.approx(0.038338, rel=1e-4)


def test_identical_arms_all_null():
    recs = [TrialRecord(r, g, 100.0 + r, 0.1 * r) for r in range(1, 6) for g in sx.GROUPS]
    rep = sx.protocol_report(recs)
    assert all(c.flag == "NS" and c.p == 0.5 for c in rep.comparisons)


def test_missing_arm_names_run():
    recs = [r for r in sx.hl60_fixture() if not (r.run_id == 3 and r.group == "C2")]
    with pytest.raises(sx.MissingArmError, match="run 3") as info:
        sx.protocol_report(recs)
    assert info.value.run_id == 3 and info.value.missing == ("C2",)


def test_significance_flag_bands():
    assert [sx.significance_flag(p) for p in (0.0005, 0.005, 0.03, 0.05, 0.5)] == ["***", "**", "*", "NS", "NS"]


def test_report_serializations():
    rep = sx.protocol_report(sx.hl60_fixture())
    payload = json.loads(rep.to_json())
    assert payload["n_runs"] == 5
    assert payload["summaries"]["cell_count"]["Tplus"]["mean"] == pytest.approx(1.3e5)
    assert len(payload["comparisons"]) == 8
    lines = rep.to_csv().splitlines()
    assert lines[0] == "endpoint,comparison,t,df,p,direction,flag" and len(lines) == 9
    assert "Tplus vs Tminus" in rep.table()


@given(st.floats(-1e3, 1e3), st.floats(0.01, 1e3), st.integers(0, 4))
def test_moment_matched_values_exact(mean, se, shift):
    v = sx.moment_matched_values(mean, se, 5, shift)
    assert np.mean(v) == pytest.approx(mean, abs=1e-9 * max(1, abs(mean), se))
    assert np.std(v, ddof=1) / math.sqrt(5) == pytest.approx(se, rel=1e-9)
