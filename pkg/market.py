# market.py
"""
Core model of the signalling competition: valuations, strategies, and the exact
utilities that follow from them.

S sellers each hold one good whose variant g in {0..G-1} is drawn uniformly.
Seller s commits to a partition pi_s of the variants and reveals only the block
holding the realized variant; each buyer b picks one seller; each seller runs a
second-price auction per block. With binary valuations v_b^g:

    v_b(block)   = sum of v_b^g over the block
    top1/top2    = highest / second-highest v_b(block) over a buyer set
    u_b          = (1/G)   * sum over blocks of b's seller of max(v_b - top2(co-bidders incl. b), 0)
    u_s          = (1/G)   * sum over blocks of pi_s of top2(buyers at s)
    SW           = (1/SG)  * sum over sellers and blocks of top1(buyers at s)

top2 of an empty or single-buyer set is 0 (nobody to price against), and the
auction winner among tied maximizers is the lowest buyer index. Everything is a
Fraction with denominator dividing S*G.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from errors import InputError
from partitions import Partition, check_same_goods


# ==========================
# VALUATIONS
# ==========================

@dataclass(frozen=True, eq=False)
class ValuationMatrix:
    """B x G binary matrix; row b is buyer b, column g is variant g."""
    values: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.values)
        if raw.ndim != 2:
            raise InputError(f"valuation matrix must be 2-D, got {raw.ndim}-D")
        if raw.shape[0] < 1 or raw.shape[1] < 1:
            raise InputError(f"valuation matrix needs B >= 1 and G >= 1, got {raw.shape}")
        # binary check runs on the uncast values
        if raw.dtype.kind not in "biuf" or not np.isin(raw, (0, 1)).all():
            raise InputError("non-binary valuation")
        arr = raw.astype(np.int8)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int]]) -> "ValuationMatrix":
        rows = [list(r) for r in rows]
        if rows and len({len(r) for r in rows}) != 1:
            raise InputError("dimension mismatch: matrix rows have different lengths")
        return cls(np.array(rows))

    @property
    def num_buyers(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_goods(self) -> int:
        return int(self.values.shape[1])

    def rows(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(int(x) for x in row) for row in self.values)

    @cached_property
    def demand(self) -> Tuple[int, ...]:
        """Column sums: how many buyers value each variant."""
        return tuple(int(x) for x in self.values.sum(axis=0))

    @cached_property
    def row_masks(self) -> Tuple[int, ...]:
        """Each buyer's valued variants as a bitmask (bit g set iff v_b^g == 1)."""
        return tuple(sum(1 << g for g, x in enumerate(row) if x) for row in self.rows())

    def block_values(self, partition: Partition) -> np.ndarray:
        """B x k matrix of v_b(block) for every buyer and block of the partition."""
        check_same_goods([partition], self.num_goods)
        indicator = np.zeros((self.num_goods, partition.num_blocks), dtype=np.int64)
        indicator[np.arange(self.num_goods), list(partition.rgs)] = 1
        return self.values.astype(np.int64) @ indicator

    def __eq__(self, other) -> bool:
        if not isinstance(other, ValuationMatrix):
            return NotImplemented
        return self.values.shape == other.values.shape and bool((self.values == other.values).all())

    def __hash__(self) -> int:
        return hash((self.values.shape, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"ValuationMatrix({[list(r) for r in self.rows()]})"


def _check_buyer(V: ValuationMatrix, buyer: int) -> None:
    if not (0 <= buyer < V.num_buyers):
        raise InputError(f"buyer index {buyer} out of range 0..{V.num_buyers - 1}")


def normalize_block(V: ValuationMatrix, block: Iterable[int]) -> List[int]:
    goods = sorted(set(int(g) for g in block))
    for g in goods:
        if not (0 <= g < V.num_goods):
            raise InputError(f"good index {g} out of range 0..{V.num_goods - 1}")
    return goods


def block_value(V: ValuationMatrix, buyer: int, block: Iterable[int]) -> int:
    _check_buyer(V, buyer)
    goods = normalize_block(V, block)
    return int(V.values[buyer, goods].sum()) if goods else 0


def top_two(V: ValuationMatrix, buyers: Iterable[int], block: Iterable[int]) -> Tuple[int, int, Optional[int]]:
    """(top1, top2, lowest-index maximizer) of v_b(block) over `buyers`."""
    goods = normalize_block(V, block)
    bidders = sorted(set(int(b) for b in buyers))
    for b in bidders:
        _check_buyer(V, b)
    if not bidders:
        return 0, 0, None
    vals = [int(V.values[b, goods].sum()) if goods else 0 for b in bidders]
    best = max(vals)
    winner = bidders[vals.index(best)]
    rest = [v for b, v in zip(bidders, vals) if b != winner]
    return best, (max(rest) if rest else 0), winner


# ==========================
# STRATEGIES
# ==========================

@dataclass(frozen=True, order=True)
class SellerProfile:
    """One partition per seller, indexed by seller."""
    partitions: Tuple[Partition, ...]

    def __post_init__(self):
        parts = tuple(self.partitions)
        object.__setattr__(self, "partitions", parts)
        if not parts:
            raise InputError("a seller profile needs at least one seller")
        check_same_goods(parts, parts[0].num_goods)

    @property
    def num_sellers(self) -> int:
        return len(self.partitions)

    @property
    def num_goods(self) -> int:
        return self.partitions[0].num_goods

    def with_seller(self, seller: int, partition: Partition) -> "SellerProfile":
        parts = list(self.partitions)
        parts[seller] = partition
        return SellerProfile(tuple(parts))

    def text(self) -> str:
        return " / ".join(p.text() for p in self.partitions)

    def __str__(self) -> str:
        return self.text()

    @classmethod
    def parse(cls, text: str, num_goods: Optional[int] = None) -> "SellerProfile":
        chunks = [c for c in (text or "").split("/") if c.strip()]
        if not chunks:
            raise InputError(f"empty seller profile: {text!r}")
        return cls(tuple(Partition.parse(c, num_goods) for c in chunks))

    @classmethod
    def uniform(cls, partition: Partition, num_sellers: int) -> "SellerProfile":
        return cls((partition,) * num_sellers)


@dataclass(frozen=True, order=True)
class BuyerAssignment:
    """choice[b] is the seller buyer b visits."""
    choice: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choice", tuple(int(c) for c in self.choice))

    @property
    def num_buyers(self) -> int:
        return len(self.choice)

    def buyers_at(self, seller: int) -> Tuple[int, ...]:
        return tuple(b for b, s in enumerate(self.choice) if s == seller)

    def moved(self, buyer: int, seller: int) -> "BuyerAssignment":
        choice = list(self.choice)
        choice[buyer] = seller
        return BuyerAssignment(tuple(choice))

    def validate(self, num_sellers: int, num_buyers: int) -> None:
        if len(self.choice) != num_buyers:
            raise InputError(f"assignment covers {len(self.choice)} buyers, instance has {num_buyers}")
        for b, s in enumerate(self.choice):
            if not (0 <= s < num_sellers):
                raise InputError(f"buyer {b} is sent to seller {s}, valid sellers are 0..{num_sellers - 1}")

    def text(self) -> str:
        return " ".join(str(s) for s in self.choice)

    def __str__(self) -> str:
        return self.text()

    @classmethod
    def parse(cls, text: str) -> "BuyerAssignment":
        try:
            return cls(tuple(int(tok) for tok in (text or "").replace(",", " ").split()))
        except ValueError:
            raise InputError(f"bad assignment text: {text!r}") from None

    @classmethod
    def everyone_at(cls, seller: int, num_buyers: int) -> "BuyerAssignment":
        return cls((seller,) * num_buyers)


@dataclass(frozen=True)
class ContingentBuyerStrategy:
    """The buyers' full plan f: seller profile -> assignment, over a declared universe."""
    table: Mapping[SellerProfile, BuyerAssignment]
    universe: str = "unilateral"

    def assignment_for(self, profile: SellerProfile) -> BuyerAssignment:
        try:
            return self.table[profile]
        except KeyError:
            raise InputError(f"contingent table has no entry for profile '{profile.text()}'") from None

    def __contains__(self, profile: SellerProfile) -> bool:
        return profile in self.table

    def __len__(self) -> int:
        return len(self.table)


@dataclass(frozen=True)
class DemandProfile:
    p1: int   # goods with demand >= 1
    p2: int   # goods with demand >= 2
    c1: int   # goods with demand exactly 1

    @property
    def rho(self) -> Optional[Fraction]:
        return Fraction(self.p2, self.c1) if self.c1 else None


def demand_profile(V: ValuationMatrix) -> DemandProfile:
    p1 = sum(1 for d in V.demand if d >= 1)
    p2 = sum(1 for d in V.demand if d >= 2)
    return DemandProfile(p1=p1, p2=p2, c1=p1 - p2)


# ==========================
# SUBGAME EVALUATION
# ==========================

class SellerMarket(NamedTuple):
    """Auction outcome at one seller for one buyer set, summed over the seller's blocks."""
    top1: int               # sum of top1 over blocks (welfare numerator)
    top2: int               # sum of top2 over blocks (revenue numerator)
    gains: Dict[int, int]   # buyer -> sum of max(v_b - top2(co-bidders), 0)


class PartitionMarkets:
    """Auction outcomes at a seller holding one partition, cached per buyer bitmask."""

    def __init__(self, valuation: ValuationMatrix, partition: Partition):
        self.partition = partition
        self.num_buyers = valuation.num_buyers
        self._rows: List[Tuple[int, ...]] = [tuple(int(x) for x in row) for row in valuation.block_values(partition)]
        self._outcomes: Dict[int, SellerMarket] = {}

    def market(self, mask: int) -> SellerMarket:
        hit = self._outcomes.get(mask)
        if hit is not None:
            return hit
        rows = self._rows
        members = [b for b in range(self.num_buyers) if mask >> b & 1]
        top1 = top2 = 0
        gains: Dict[int, int] = {}
        if members:
            for j in range(len(rows[0])):
                winner, best, second = members[0], rows[members[0]][j], 0
                for b in members[1:]:
                    v = rows[b][j]
                    if v > best:
                        winner, best, second = b, v, best
                    elif v > second:
                        second = v
                top1 += best
                top2 += second
                if best > second:
                    gains[winner] = gains.get(winner, 0) + best - second
        out = SellerMarket(top1, top2, gains)
        self._outcomes[mask] = out
        return out


class AuctionBook:
    """One PartitionMarkets per partition for a fixed valuation matrix.

    An auction outcome depends only on the partition and the buyer set, not on
    which seller holds the partition, so every subgame of a search shares one book.
    """

    def __init__(self, valuation: ValuationMatrix):
        self.valuation = valuation
        self._pages: Dict[Partition, PartitionMarkets] = {}

    def markets(self, partition: Partition) -> PartitionMarkets:
        page = self._pages.get(partition)
        if page is None:
            page = self._pages[partition] = PartitionMarkets(self.valuation, partition)
        return page

    def __len__(self) -> int:
        return len(self._pages)


class Subgame:
    """The buyers' game SC_tau for a fixed seller profile tau.

    Auction outcomes come from an AuctionBook, cached per (partition, buyer
    bitmask); pass a shared book to reuse them across profiles.
    """

    def __init__(self, valuation: ValuationMatrix, profile: SellerProfile, book: Optional[AuctionBook] = None):
        if profile.num_goods != valuation.num_goods:
            raise InputError(
                f"profile covers {profile.num_goods} goods, valuation has {valuation.num_goods}"
            )
        if book is None:
            book = AuctionBook(valuation)
        elif book.valuation is not valuation and book.valuation != valuation:
            raise InputError("auction book was built for a different valuation matrix")
        self.valuation = valuation
        self.profile = profile
        self.num_sellers = profile.num_sellers
        self.num_buyers = valuation.num_buyers
        self.num_goods = valuation.num_goods
        self._pages = [book.markets(p) for p in profile.partitions]

    def market(self, seller: int, mask: int) -> SellerMarket:
        return self._pages[seller].market(mask)

    def masks(self, choice: Sequence[int]) -> List[int]:
        out = [0] * self.num_sellers
        for b, s in enumerate(choice):
            out[s] |= 1 << b
        return out

    # integer numerators: buyer/seller over G, welfare potential over S*G

    def gain(self, choice: Sequence[int], buyer: int, masks: Optional[List[int]] = None) -> int:
        masks = masks if masks is not None else self.masks(choice)
        s = choice[buyer]
        return self.market(s, masks[s]).gains.get(buyer, 0)

    def gain_if_moved(self, masks: List[int], buyer: int, seller: int) -> int:
        return self.market(seller, masks[seller] | (1 << buyer)).gains.get(buyer, 0)

    def revenue(self, choice: Sequence[int], seller: int, masks: Optional[List[int]] = None) -> int:
        masks = masks if masks is not None else self.masks(choice)
        return self.market(seller, masks[seller]).top2

    def potential(self, choice: Sequence[int], masks: Optional[List[int]] = None) -> int:
        masks = masks if masks is not None else self.masks(choice)
        return sum(self.market(s, m).top1 for s, m in enumerate(masks))

    def buyer_utility(self, choice: Sequence[int], buyer: int) -> Fraction:
        return Fraction(self.gain(choice, buyer), self.num_goods)

    def seller_utility(self, choice: Sequence[int], seller: int) -> Fraction:
        return Fraction(self.revenue(choice, seller), self.num_goods)

    def social_welfare(self, choice: Sequence[int]) -> Fraction:
        return Fraction(self.potential(choice), self.num_sellers * self.num_goods)

    def improving_moves(self, choice: Sequence[int]) -> List[Tuple[int, int, Fraction]]:
        """Every (buyer, seller, utility gain) unilateral move that strictly helps the buyer."""
        masks = self.masks(choice)
        out = []
        for b in range(self.num_buyers):
            here = self.gain(choice, b, masks)
            for s in range(self.num_sellers):
                if s == choice[b]:
                    continue
                delta = self.gain_if_moved(masks, b, s) - here
                if delta > 0:
                    out.append((b, s, Fraction(delta, self.num_goods)))
        return out

    def is_nash(self, choice: Sequence[int]) -> bool:
        masks = self.masks(choice)
        for b in range(self.num_buyers):
            here = self.gain(choice, b, masks)
            for s in range(self.num_sellers):
                if s != choice[b] and self.gain_if_moved(masks, b, s) > here:
                    return False
        return True


def _subgame(V: ValuationMatrix, profile: SellerProfile, assignment: BuyerAssignment) -> Subgame:
    assignment.validate(profile.num_sellers, V.num_buyers)
    return Subgame(V, profile)


def buyer_utility(V: ValuationMatrix, profile: SellerProfile, assignment: BuyerAssignment, buyer: int) -> Fraction:
    _check_buyer(V, buyer)
    return _subgame(V, profile, assignment).buyer_utility(assignment.choice, buyer)


def seller_utility(V: ValuationMatrix, profile: SellerProfile, assignment: BuyerAssignment, seller: int) -> Fraction:
    if not (0 <= seller < profile.num_sellers):
        raise InputError(f"seller index {seller} out of range 0..{profile.num_sellers - 1}")
    return _subgame(V, profile, assignment).seller_utility(assignment.choice, seller)


def social_welfare(V: ValuationMatrix, profile: SellerProfile, assignment: BuyerAssignment) -> Fraction:
    return _subgame(V, profile, assignment).social_welfare(assignment.choice)


# ==========================
# ABSENT-BUYER IDENTITY
# ==========================

def without_buyer(V: ValuationMatrix, buyer: int) -> ValuationMatrix:
    _check_buyer(V, buyer)
    if V.num_buyers == 1:
        raise InputError("cannot remove the only buyer")
    return ValuationMatrix(np.delete(V.values, buyer, axis=0))


def marginal_welfare(V: ValuationMatrix, partition: Partition, buyer: int) -> Fraction:
    """Single-seller welfare lost when `buyer` stays home; equals that buyer's utility."""
    profile = SellerProfile((partition,))
    full = social_welfare(V, profile, BuyerAssignment.everyone_at(0, V.num_buyers))
    rest = without_buyer(V, buyer)
    reduced = social_welfare(rest, profile, BuyerAssignment.everyone_at(0, rest.num_buyers))
    return full - reduced
