"""Paired one-tailed t-tests, power analysis and the four-arm protocol report.

Protocol arms: ``Tplus`` (treated), ``Tminus`` (coupled to the treated arm
but untreated), and two controls ``C1``, ``C2``.  Controls are pooled per
run as the mean of the two control wells before any cross-run statistic.
T-tests pair observations by ``run_id``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, special
from scipy.stats import chi2, norm

GROUPS = ("Tplus", "Tminus", "C1", "C2")
ENDPOINTS = ("cell_count", "caspase_per_cell")
FIELDS = ("run_id", "group", "cell_count", "caspase_per_cell")


class TrialFormatError(ValueError):
    pass


class MissingArmError(ValueError):
    def __init__(self, run_id: int, missing):
        super().__init__(f"run {run_id} is missing arm(s): {', '.join(missing)}")
        self.run_id = run_id
        self.missing = tuple(missing)


@dataclass(frozen=True)
class TrialRecord:
    run_id: int
    group: str
    cell_count: float
    caspase_per_cell: float

    def __post_init__(self):
        if self.group not in GROUPS:
            raise TrialFormatError(f"unknown group {self.group!r}")
        if self.cell_count < 0 or self.caspase_per_cell < 0:
            raise TrialFormatError("measurements must be non-negative")


def load_trials(path) -> list[TrialRecord]:
    """Read ``run_id,group,cell_count,caspase_per_cell`` rows from a CSV file."""
    return parse_trials(Path(path).read_text())


def parse_trials(text: str) -> list[TrialRecord]:
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        return []
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    if tuple(header) != FIELDS:
        raise TrialFormatError(f"line 1: expected header {','.join(FIELDS)}, got {','.join(header)}")
    records, seen = [], set()
    for lineno, row in enumerate(reader, start=2):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != 4:
            raise TrialFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            rec = TrialRecord(int(row[0]), row[1].strip(), float(row[2]), float(row[3]))
        except (ValueError, TrialFormatError) as exc:
            raise TrialFormatError(f"line {lineno}: {exc}") from None
        key = (rec.run_id, rec.group)
        if key in seen:
            raise TrialFormatError(f"line {lineno}: duplicate (run_id, group) = {key}")
        seen.add(key)
        records.append(rec)
    return records


def dump_trials(records) -> str:
    lines = [",".join(FIELDS)]
    for r in records:
        lines.append(f"{r.run_id},{r.group},{r.cell_count!r},{r.caspase_per_cell!r}")
    return "\n".join(lines) + "\n"


# --- tests -----------------------------------------------------------------

@dataclass(frozen=True)
class TestResult:
    t_stat: float
    df: int
    p_one_tailed: float
    direction: str

    __test__ = False  # not a pytest class


def student_t_sf(t: float, df: int) -> float:
    """Upper tail ``P(T > t)`` through the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * special.betainc(df / 2.0, 0.5, x)
    return float(tail if t >= 0 else 1.0 - tail)


def paired_t_one_tailed(a, b, direction: str = "greater") -> TestResult:
    """One-tailed paired t-test on ``d = a - b``.

    ``direction="greater"`` tests mean(d) > 0.  Zero-variance differences
    are handled as limits: t = +-inf (p = 0 or 1) for a nonzero mean, and
    t = 0 (p = 0.5) when every difference is zero.
    """
    if direction not in ("greater", "less"):
        raise ValueError("direction must be 'greater' or 'less'")
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    if sd <= 1e-14 * scale:
        t = 0.0 if abs(mean) <= 1e-14 * scale else math.copysign(math.inf, mean)
    else:
        t = mean / (sd / math.sqrt(n))
    upper = student_t_sf(t, n - 1)
    p = upper if direction == "greater" else 1.0 - upper
    return TestResult(float(t), n - 1, min(1.0, max(0.0, p)), direction)


@dataclass(frozen=True)
class PowerResult:
    power: float
    alpha: float
    effect: float
    sd: float
    n: int


def noncentral_t_sf(c: float, df: int, delta: float) -> float:
    """``P(T' > c)`` for ``T' = (Z + delta) / sqrt(V / df)``, ``V ~ chi2(df)``.

    Conditioning on ``V`` gives ``int Phi(delta - c sqrt(v/df)) f_V(v) dv``.
    """
    def integrand(v):
        return norm.cdf(delta - c * math.sqrt(v / df)) * chi2.pdf(v, df)

    hi = chi2.isf(1e-16, df)
    val, _ = integrate.quad(integrand, 0.0, hi, epsabs=1e-12, epsrel=1e-10, limit=200)
    return float(min(1.0, max(0.0, val)))


def power_analysis(effect: float, sd: float, n: int, alpha: float = 0.05,
                   direction: str = "greater") -> PowerResult:
    """Power of the one-tailed paired t-test; noncentrality ``effect / (sd / sqrt(n))``."""
    if sd <= 0 or n < 2 or not 0 < alpha < 1:
        raise ValueError("need sd > 0, n >= 2 and 0 < alpha < 1")
    if direction not in ("greater", "less"):
        raise ValueError("direction must be 'greater' or 'less'")
    df = n - 1
    crit = float(special.stdtrit(df, 1.0 - alpha))
    delta = effect / (sd / math.sqrt(n))
    if direction == "less":
        delta = -delta
    power = noncentral_t_sf(crit, df, delta)
    return PowerResult(power, alpha, effect, sd, n)


# --- protocol report ---------------------------------------------------------

# (label, arm a, arm b, direction per endpoint)
COMPARISONS = (
    ("Tplus vs Tminus", "Tplus", "Tminus", {"cell_count": "less", "caspase_per_cell": "greater"}),
    ("Tplus vs controls", "Tplus", "controls", {"cell_count": "less", "caspase_per_cell": "greater"}),
    ("Tminus vs controls", "Tminus", "controls", {"cell_count": "less", "caspase_per_cell": "greater"}),
    ("C1 vs C2", "C1", "C2", {"cell_count": "greater", "caspase_per_cell": "greater"}),
)


def significance_flag(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "NS"


@dataclass(frozen=True)
class Comparison:
    endpoint: str
    label: str
    t: float
    df: int
    p: float
    direction: str
    flag: str


@dataclass(frozen=True)
class ProtocolReport:
    n_runs: int
    summaries: dict  # endpoint -> arm -> (mean, standard error)
    comparisons: list

    def to_json(self) -> str:
        return json.dumps({
            "n_runs": self.n_runs,
            "summaries": {ep: {arm: {"mean": m, "se": se} for arm, (m, se) in arms.items()}
                          for ep, arms in self.summaries.items()},
            "comparisons": [asdict(c) for c in self.comparisons],
        }, indent=2, allow_nan=True)

    def to_csv(self) -> str:
        lines = ["endpoint,comparison,t,df,p,direction,flag"]
        for c in self.comparisons:
            lines.append(f"{c.endpoint},{c.label},{c.t!r},{c.df},{c.p!r},{c.direction},{c.flag}")
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        out = []
        for ep in ENDPOINTS:
            out.append(f"{ep}")
            for arm, (m, se) in self.summaries[ep].items():
                out.append(f"  {arm:<10} {m:>12.4g} +- {se:.3g}")
            for c in self.comparisons:
                if c.endpoint == ep:
                    out.append(f"  {c.label:<20} t={c.t:>8.3f} df={c.df} p={c.p:.4g} {c.flag}")
        return "\n".join(out)


def _arm_table(records):
    runs: dict[int, dict[str, TrialRecord]] = {}
    for r in records:
        runs.setdefault(r.run_id, {})[r.group] = r
    for run_id in sorted(runs):
        missing = [g for g in GROUPS if g not in runs[run_id]]
        if missing:
            raise MissingArmError(run_id, missing)
    return runs


def mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, float)
    return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size))


def protocol_report(records) -> ProtocolReport:
    runs = _arm_table(records)
    order = sorted(runs)
    if len(order) < 2:
        raise ValueError("protocol report needs at least two complete runs")
    summaries, comparisons = {}, []
    for ep in ENDPOINTS:
        arms = {g: np.array([getattr(runs[r][g], ep) for r in order]) for g in GROUPS}
        arms["controls"] = 0.5 * (arms["C1"] + arms["C2"])
        summaries[ep] = {g: mean_se(arms[g]) for g in ("Tplus", "Tminus", "controls", "C1", "C2")}
        for label, a, b, dirs in COMPARISONS:
            res = paired_t_one_tailed(arms[a], arms[b], dirs[ep])
            comparisons.append(Comparison(ep, label, res.t_stat, res.df, res.p_one_tailed,
                                          dirs[ep], significance_flag(res.p_one_tailed)))
    return ProtocolReport(len(order), summaries, comparisons)


# --- moment-matched fixture ----------------------------------------------------

# Reported group means and standard errors, n = 5 runs.
REPORTED = {
    "cell_count": {"Tplus": (1.3e5, 2.8e4), "Tminus": (1.2e5, 1.9e4), "controls": (2.1e5, 1.7e4)},
    "caspase_per_cell": {"Tplus": (0.32, 0.06), "Tminus": (0.17, 0.02), "controls": (0.098, 0.009)},
}
# cyclic shift of the deviation pattern per arm; sets the pairing structure
ARM_SHIFTS = {"Tplus": 0, "Tminus": 1, "controls": 0}
CONTROL_SPLIT_SHIFT = 2


def moment_matched_values(mean: float, se: float, n: int = 5, shift: int = 0) -> np.ndarray:
    """``n`` values with exactly the given mean and standard error.

    The deviations are the evenly spaced pattern ``-k..k`` scaled to unit
    sample standard deviation, rotated by ``shift`` runs.
    """
    z = np.arange(n) - (n - 1) / 2.0
    z = z / np.std(z, ddof=1)
    return mean + se * math.sqrt(n) * np.roll(z, shift)


def hl60_fixture(n: int = 5) -> list[TrialRecord]:
    """Deterministic per-run data reproducing the reported summaries.

    The two control wells are split symmetrically around the pooled control
    value, ``C1, C2 = pooled +- se_pooled * pattern``, so their per-run mean
    is the pooled value exactly and their own means coincide.
    """
    cols = {}
    for ep, arms in REPORTED.items():
        for arm, (m, se) in arms.items():
            cols[(ep, arm)] = moment_matched_values(m, se, n, ARM_SHIFTS[arm])
        pooled = cols[(ep, "controls")]
        split = REPORTED[ep]["controls"][1] * np.roll(moment_matched_values(0.0, 1.0 / math.sqrt(n), n), CONTROL_SPLIT_SHIFT)
        cols[(ep, "C1")] = pooled + split
        cols[(ep, "C2")] = pooled - split
    records = []
    for i in range(n):
        for g in GROUPS:
            records.append(TrialRecord(i + 1, g, float(cols[("cell_count", g)][i]),
                                       float(cols[("caspase_per_cell", g)][i])))
    return records
