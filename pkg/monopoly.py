# monopoly.py
"""
Single-seller analysis: which partitions maximize revenue (the set called
gamma-1 in reports), how much welfare they leave, and the bounds that welfare
must respect.

With one seller every buyer is at the only seller, so a partition fully
determines the outcome: revenue = sum of top2 per block / G and
SW = sum of top1 per block / G.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Tuple

import numpy as np

from errors import InputError
from market import DemandProfile, ValuationMatrix, normalize_block, demand_profile, top_two
from partitions import Partition, enumerate_partitions
from rationals import Verdict, check

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonopolyRow:
    partition: Partition
    revenue: Fraction
    sw: Fraction
    in_gamma1: bool
    in_gamma1_best: bool


@dataclass(frozen=True)
class MonopolyAnalysis:
    num_goods: int
    max_revenue: Fraction
    revenue_maximizers: Tuple[Partition, ...]
    best_sw: Fraction
    best_witness: Partition
    worst_sw: Fraction
    worst_witness: Partition
    opt: Fraction
    rows: Tuple[MonopolyRow, ...]

    @property
    def best_maximizers(self) -> Tuple[Partition, ...]:
        return tuple(r.partition for r in self.rows if r.in_gamma1_best)


def partition_outcome(V: ValuationMatrix, partition: Partition) -> Tuple[int, int]:
    """(sum of top1, sum of top2) over the blocks, every buyer present."""
    values = V.block_values(partition)
    ordered = np.sort(values, axis=0)
    top1 = int(ordered[-1].sum())
    top2 = int(ordered[-2].sum()) if V.num_buyers > 1 else 0
    return top1, top2


def analyze_monopoly(V: ValuationMatrix, *, max_goods: Optional[int] = None) -> MonopolyAnalysis:
    G = V.num_goods
    scanned: List[Tuple[Partition, int, int]] = []
    for p in enumerate_partitions(G, max_goods=max_goods):
        top1, top2 = partition_outcome(V, p)
        scanned.append((p, top2, top1))

    best_rev = max(rev for _, rev, _ in scanned)
    gamma1 = [(p, sw) for p, rev, sw in scanned if rev == best_rev]
    # max()/min() keep the first hit, i.e. the earliest partition in enumeration order
    best_p, best_sw = max(gamma1, key=lambda t: t[1])
    worst_p, worst_sw = min(gamma1, key=lambda t: t[1])

    rows = tuple(
        MonopolyRow(
            partition=p,
            revenue=Fraction(rev, G),
            sw=Fraction(sw, G),
            in_gamma1=rev == best_rev,
            in_gamma1_best=rev == best_rev and sw == best_sw,
        )
        for p, rev, sw in scanned
    )
    analysis = MonopolyAnalysis(
        num_goods=G,
        max_revenue=Fraction(best_rev, G),
        revenue_maximizers=tuple(p for p, _ in gamma1),
        best_sw=Fraction(best_sw, G),
        best_witness=best_p,
        worst_sw=Fraction(worst_sw, G),
        worst_witness=worst_p,
        opt=Fraction(demand_profile(V).p1, G),
        rows=rows,
    )
    log.debug("[MONOPOLY] %d partitions, %d revenue maximizers, SW in [%s, %s]",
              len(rows), len(gamma1), analysis.worst_sw, analysis.best_sw)
    return analysis


def check_monopoly_bounds(analysis: MonopolyAnalysis, dp: DemandProfile) -> List[Verdict]:
    G = analysis.num_goods
    if dp.p1 > G:
        raise InputError(f"demand profile counts {dp.p1} goods, analysis has {G}")
    return [
        check("monopoly-worst-third-opt", analysis.worst_sw, ">=", analysis.opt / 3),
        check("monopoly-best-half-opt", analysis.best_sw, ">=", analysis.opt / 2),
        check("monopoly-worst-demand-third", analysis.worst_sw, ">=", Fraction(dp.p1 + dp.p2, 3 * G)),
        check("monopoly-best-demand-half", analysis.best_sw, ">=", Fraction(dp.p1 + dp.p2, 2 * G)),
        check("monopoly-worst-above-p2", analysis.worst_sw, ">=", Fraction(dp.p2, G)),
    ]


# ==========================
# SPLITTING A BLOCK
# ==========================

def top_pair_split(V: ValuationMatrix, block: Iterable[int]) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Split a block into the goods its top two bidders care about and the rest.

    The top bidder is the auction winner over all buyers; the runner-up is the
    best of the others (lowest index on ties). Both keep their full block value
    inside the first part, so its second price is at least the old one.
    """
    goods = normalize_block(V, block)
    if not goods:
        raise InputError("cannot split an empty block")
    _, _, first = top_two(V, range(V.num_buyers), goods)
    pair = [first]
    if V.num_buyers > 1:
        _, _, second = top_two(V, [b for b in range(V.num_buyers) if b != first], goods)
        pair.append(second)
    wanted = tuple(g for g in goods if any(V.values[b, g] for b in pair))
    rest = tuple(g for g in goods if g not in wanted)
    return wanted, rest


def block_revenue(V: ValuationMatrix, block: Iterable[int]) -> int:
    """Second price for one block with every buyer bidding (numerator over G)."""
    return top_two(V, range(V.num_buyers), block)[1]


def split_revenue(V: ValuationMatrix, block: Iterable[int]) -> int:
    return sum(block_revenue(V, part) for part in top_pair_split(V, block) if part)
