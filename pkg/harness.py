# harness.py
"""
Competition-vs-monopoly experiments: one BoundReport per instance, rendered as
a table, CSV or JSON, and the sweep that runs them over many instances.

A report never raises on a budget overrun; whatever could not be computed turns
into "skip" verdicts carrying the reason, and everything else is still checked.
"""

import csv
import io
import itertools
import json
import logging
import multiprocessing
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

import settings
from equilibrium import compute_opt, find_pure_spe
from errors import BudgetExceeded
from instances import Instance, generate_random, instance_fingerprint, named_match
from market import DemandProfile, SellerProfile, ValuationMatrix, demand_profile
from monopoly import MonopolyAnalysis, analyze_monopoly, check_monopoly_bounds
from rationals import Verdict, check, fmt_q, skipped

log = logging.getLogger(__name__)

MONOPOLY_VERDICTS = (
    ("monopoly-worst-third-opt", ">="),
    ("monopoly-best-half-opt", ">="),
    ("monopoly-worst-demand-third", ">="),
    ("monopoly-best-demand-half", ">="),
    ("monopoly-worst-above-p2", ">="),
)

CSV_COLUMNS = (
    "label", "S", "B", "G", "p1", "p2", "c1", "opt", "monop_rev", "monop_sw_worst",
    "monop_sw_best", "spe_count", "spe_sw_min", "spe_sw_max", "ratio_max", "ratio_min", "verdicts",
)


@dataclass(frozen=True)
class SpeRecord:
    profile: SellerProfile
    sw: Fraction


@dataclass(frozen=True)
class BoundReport:
    label: str
    sellers: int
    buyers: int
    goods: int
    fingerprint: str
    dp: DemandProfile
    monopoly: Optional[MonopolyAnalysis]
    spe: Tuple[SpeRecord, ...]
    spe_searched: bool
    opt: Optional[Fraction]
    verdicts: Tuple[Verdict, ...]

    @property
    def rho(self) -> Optional[Fraction]:
        return self.dp.rho

    @property
    def spe_sw_min(self) -> Optional[Fraction]:
        return min((r.sw for r in self.spe), default=None)

    @property
    def spe_sw_max(self) -> Optional[Fraction]:
        return max((r.sw for r in self.spe), default=None)

    @property
    def ratio_max(self) -> Optional[Fraction]:
        """Best SPE welfare over the worst revenue-maximizing monopoly."""
        return _ratio(self.spe_sw_max, self.monopoly.worst_sw if self.monopoly else None)

    @property
    def ratio_min(self) -> Optional[Fraction]:
        """Worst SPE welfare over the best revenue-maximizing monopoly."""
        return _ratio(self.spe_sw_min, self.monopoly.best_sw if self.monopoly else None)

    @property
    def ratio_best(self) -> Optional[Fraction]:
        return _ratio(self.spe_sw_max, self.monopoly.best_sw if self.monopoly else None)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def failures(self) -> List[Verdict]:
        return [v for v in self.verdicts if not v.passed]

    def to_dict(self) -> dict:
        m = self.monopoly
        return {
            "label": self.label,
            "sellers": self.sellers,
            "buyers": self.buyers,
            "goods": self.goods,
            "fingerprint": self.fingerprint,
            "p1": self.dp.p1,
            "p2": self.dp.p2,
            "c1": self.dp.c1,
            "rho": fmt_q(self.rho),
            "opt": _q_or_none(self.opt),
            "monopoly": None if m is None else {
                "max_revenue": fmt_q(m.max_revenue),
                "revenue_maximizers": [p.text() for p in m.revenue_maximizers],
                "best_sw": fmt_q(m.best_sw),
                "best_witness": m.best_witness.text(),
                "worst_sw": fmt_q(m.worst_sw),
                "worst_witness": m.worst_witness.text(),
                "opt": fmt_q(m.opt),
            },
            "spe_searched": self.spe_searched,
            "spe": [{"profile": r.profile.text(), "sw": fmt_q(r.sw)} for r in self.spe],
            "ratio_max": _q_or_none(self.ratio_max),
            "ratio_min": _q_or_none(self.ratio_min),
            "ratio_best": _q_or_none(self.ratio_best),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "passed": self.passed,
        }


def _ratio(num: Optional[Fraction], den: Optional[Fraction]) -> Optional[Fraction]:
    if num is None or not den:
        return None
    return num / den


def _q_or_none(value: Optional[Fraction]) -> Optional[str]:
    return None if value is None else fmt_q(value)


def has_positive_demand(V: ValuationMatrix) -> bool:
    return bool(V.values.any(axis=1).all())


# ==========================
# VERDICTS
# ==========================

def _competition_verdicts(
    instance: Instance,
    dp: DemandProfile,
    monopoly: Optional[MonopolyAnalysis],
    spe: Sequence[SpeRecord],
    spe_skip: Optional[str],
    opt: Optional[Fraction],
    opt_skip: Optional[str],
) -> List[Verdict]:
    S, B, G = instance.sellers, instance.num_buyers, instance.num_goods
    out: List[Verdict] = []

    if opt is None:
        out.append(skipped("opt-competition-cap", "<=", opt_skip))
    elif S < 2:
        out.append(skipped("opt-competition-cap", "<=", "needs S >= 2"))
    else:
        out.append(check("opt-competition-cap", opt, "<=", Fraction(dp.c1 + min(S, B) * dp.p2, S * G)))

    no_spe = spe_skip or (None if spe else "no pure SPE found")
    sw_max = max((r.sw for r in spe), default=None)
    sw_min = min((r.sw for r in spe), default=None)

    if no_spe or opt is None:
        out.append(skipped("opt-dominates-spe", "<=", no_spe or opt_skip))
    else:
        out.append(check("opt-dominates-spe", sw_max, "<=", opt))

    floor_pre = None
    if S < 2 or B < S:
        floor_pre = "needs S >= 2 and B >= S"
    elif not has_positive_demand(instance.valuation):
        floor_pre = "needs every buyer to want some good"

    if floor_pre or no_spe or opt is None:
        out.append(skipped("spe-opt-floor", ">=", floor_pre or no_spe or opt_skip))
    else:
        out.append(check("spe-opt-floor", sw_min / opt, ">=", Fraction(1, G)))

    ceiling_pre = None if (S >= 2 and B >= 2) else "needs S >= 2 and B >= 2"
    monopoly_skip = None if monopoly else "monopoly scan over budget"
    for name, den, num, bound in (
        ("spe-vs-worst-monopoly-ceiling", "worst", sw_max, 1 + Fraction(1, S)),
        ("spe-vs-best-monopoly-ceiling", "best", sw_max, Fraction(min(S, B), S)),
    ):
        reason = ceiling_pre or monopoly_skip or no_spe
        if reason is None:
            den_sw = monopoly.worst_sw if den == "worst" else monopoly.best_sw
            reason = None if den_sw else f"{den} monopoly welfare is 0"
        if reason:
            out.append(skipped(name, "<=", reason))
        else:
            out.append(check(name, num / den_sw, "<=", bound))

    reason = floor_pre or monopoly_skip or no_spe
    if reason is None and not monopoly.best_sw:
        reason = "best monopoly welfare is 0"
    if reason:
        out.append(skipped("spe-vs-monopoly-floor", ">=", reason))
    else:
        out.append(check("spe-vs-monopoly-floor", sw_min / monopoly.best_sw, ">=", Fraction(1, G)))
    return out


def _tightness_verdicts(
    instance: Instance,
    monopoly: Optional[MonopolyAnalysis],
    spe: Sequence[SpeRecord],
) -> List[Verdict]:
    """Equalities that the named constructions are built to hit."""
    S, B, G = instance.sellers, instance.num_buyers, instance.num_goods
    name = named_match(instance)
    sw_max = max((r.sw for r in spe), default=None)
    sw_min = min((r.sw for r in spe), default=None)
    unmatched = "not a matching named construction"
    out: List[Verdict] = []

    def emit(verdict_name: str, applies: bool, lhs, rhs, missing: Optional[str] = None):
        if not applies:
            out.append(skipped(verdict_name, "==", unmatched))
        elif missing or lhs is None:
            out.append(skipped(verdict_name, "==", missing or "ratio undefined (zero denominator)"))
        else:
            out.append(check(verdict_name, lhs, "==", rhs))

    need_monopoly = None if monopoly else "monopoly scan over budget"
    need_spe = need_monopoly or (None if spe else "no pure SPE found")

    emit("third-opt-attained", name == "identity" and G == 3,
         monopoly and monopoly.worst_sw, monopoly and monopoly.opt / 3, need_monopoly)
    emit("half-opt-attained", name == "identity" and G == 2,
         monopoly and monopoly.best_sw, monopoly and monopoly.opt / 2, need_monopoly)
    emit("ceiling-attained-worst", name == "crowded-good",
         _ratio(sw_max, monopoly and monopoly.worst_sw), 1 + Fraction(1, S), need_spe)
    emit("ceiling-attained-best", name == "all-ones" and S == B and S >= 2,
         _ratio(sw_max, monopoly and monopoly.best_sw), Fraction(min(S, B), S), need_spe)
    emit("floor-attained", name == "stacked-identity",
         _ratio(sw_min, monopoly and monopoly.best_sw), Fraction(1, G), need_spe)
    return out


# ==========================
# ONE INSTANCE
# ==========================

def run_ratio_experiment(
    instance: Instance,
    *,
    budget_profiles: Optional[int] = None,
    budget_assignments: Optional[int] = None,
    max_goods: Optional[int] = None,
) -> BoundReport:
    V = instance.valuation
    dp = demand_profile(V)
    verdicts: List[Verdict] = []

    monopoly: Optional[MonopolyAnalysis] = None
    try:
        monopoly = analyze_monopoly(V, max_goods=max_goods)
        verdicts += check_monopoly_bounds(monopoly, dp)
    except BudgetExceeded as e:
        verdicts += [skipped(name, rel, str(e)) for name, rel in MONOPOLY_VERDICTS]

    opt, opt_skip = None, None
    try:
        opt = compute_opt(V, instance.sellers, budget=budget_assignments)
    except BudgetExceeded as e:
        opt_skip = str(e)

    spe: Tuple[SpeRecord, ...] = ()
    spe_skip = None
    try:
        found = find_pure_spe(
            V, instance.sellers,
            budget_profiles=budget_profiles, budget_assignments=budget_assignments,
        )
        spe = tuple(SpeRecord(o.profile, o.sw) for o in found)
    except BudgetExceeded as e:
        spe_skip = str(e)

    verdicts += _competition_verdicts(instance, dp, monopoly, spe, spe_skip, opt, opt_skip)
    verdicts += _tightness_verdicts(instance, monopoly, spe)
    report = BoundReport(
        label=instance.name,
        sellers=instance.sellers,
        buyers=instance.num_buyers,
        goods=instance.num_goods,
        fingerprint=instance_fingerprint(instance),
        dp=dp,
        monopoly=monopoly,
        spe=spe,
        spe_searched=spe_skip is None,
        opt=opt,
        verdicts=tuple(verdicts),
    )
    for v in report.failures():
        log.warning("[RATIO] %s: %s", report.label, v.describe())
    return report


# ==========================
# RENDERING
# ==========================

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return fmt_q(value)
    return str(value)


def csv_row(report: BoundReport) -> List[str]:
    m = report.monopoly
    verdicts = ";".join(f"{v.name}={v.status}" for v in report.verdicts)
    return [_cell(x) for x in (
        report.label, report.sellers, report.buyers, report.goods,
        report.dp.p1, report.dp.p2, report.dp.c1, report.opt,
        m and m.max_revenue, m and m.worst_sw, m and m.best_sw,
        len(report.spe) if report.spe_searched else None,
        report.spe_sw_min, report.spe_sw_max, report.ratio_max, report.ratio_min,
    )] + [verdicts]


def render_csv(reports: Iterable[BoundReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(csv_row(r))
    return buf.getvalue()


def render_json(reports: Iterable[BoundReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def render_table(reports: Iterable[BoundReport]) -> str:
    lines: List[str] = []
    for r in reports:
        m = r.monopoly
        lines.append(f"== {r.label}  (S={r.sellers}, B={r.buyers}, G={r.goods})")
        lines.append(f"   demand   p1={r.dp.p1} p2={r.dp.p2} c1={r.dp.c1} rho={fmt_q(r.rho)}")
        lines.append(f"   opt      {_cell(r.opt) or 'skipped'}")
        if m is not None:
            lines.append(f"   monopoly revenue={fmt_q(m.max_revenue)} over {len(m.revenue_maximizers)} partition(s)")
            lines.append(f"            worst SW={fmt_q(m.worst_sw)} at {m.worst_witness}, "
                         f"best SW={fmt_q(m.best_sw)} at {m.best_witness}")
        if not r.spe_searched:
            lines.append("   spe      search skipped")
        elif not r.spe:
            lines.append("   spe      none with pure seller strategies")
        else:
            lines.append(f"   spe      {len(r.spe)} found, SW in [{fmt_q(r.spe_sw_min)}, {fmt_q(r.spe_sw_max)}]")
            lines.append(f"   ratios   max={_cell(r.ratio_max) or '-'} min={_cell(r.ratio_min) or '-'} "
                         f"vs-best={_cell(r.ratio_best) or '-'}")
        for v in r.verdicts:
            lines.append(f"   {'ok  ' if v.passed else 'FAIL'} {v.describe()}")
    return "\n".join(lines) + "\n"


RENDERERS = {"table": render_table, "csv": render_csv, "json": render_json}


# ==========================
# SWEEP
# ==========================

def exhaustive_instances(
    sellers: Sequence[int], max_cells: int, max_buyers: int, max_goods: int
) -> Iterator[Instance]:
    """Every binary matrix with B*G <= max_cells, for each seller count."""
    for S in sellers:
        for B in range(1, max_buyers + 1):
            for G in range(1, max_goods + 1):
                if B * G > max_cells:
                    continue
                for bits in itertools.product((0, 1), repeat=B * G):
                    values = np.array(bits, dtype=np.int64).reshape(B, G)
                    code = int("".join(map(str, bits)), 2)
                    yield Instance(S, ValuationMatrix(values), f"exhaustive:S{S}-B{B}-G{G}-{code}")


def random_instances(sellers: Sequence[int], count: int, max_dim: int, seed: int) -> Iterator[Instance]:
    master = np.random.default_rng(seed)
    densities = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))
    for i in range(count):
        B = int(master.integers(1, max_dim + 1))
        G = int(master.integers(1, max_dim + 1))
        S = int(sellers[int(master.integers(0, len(sellers)))])
        density = densities[int(master.integers(0, len(densities)))]
        yield generate_random(B, G, S, density, int(master.integers(0, 2**31)), i % 2 == 0)


def _run_one(job: Tuple[Instance, Optional[int], Optional[int]]) -> BoundReport:
    instance, budget_profiles, budget_assignments = job
    return run_ratio_experiment(
        instance, budget_profiles=budget_profiles, budget_assignments=budget_assignments
    )


def sweep(
    instances: Iterable[Instance],
    *,
    workers: Optional[int] = None,
    budget_profiles: Optional[int] = None,
    budget_assignments: Optional[int] = None,
    progress: bool = False,
) -> List[BoundReport]:
    """Run every instance; reports come back in instance order whatever the worker count."""
    jobs = [(inst, budget_profiles, budget_assignments) for inst in instances]
    workers = settings.SWEEP_WORKERS if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(workers) as pool:
            reports = list(tqdm(pool.imap(_run_one, jobs, chunksize=8), total=len(jobs),
                                unit="inst", disable=not progress))
    else:
        reports = [_run_one(job) for job in tqdm(jobs, unit="inst", disable=not progress)]
    failed = sum(1 for r in reports if not r.passed)
    log.info("[SWEEP] %d instances, %d with failing verdicts", len(reports), failed)
    return reports
