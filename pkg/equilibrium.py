# equilibrium.py
"""
Buyer equilibria of each subgame, pure-seller SPE search, certificate checking,
and the welfare optimum.

For a fixed seller profile the buyers' game is an exact potential game: when one
buyer switches sellers, G * (change in that buyer's utility) equals the change
in sum(top1) over all sellers and blocks, i.e. S*SW moves one-for-one with the
deviator's utility. Best-response dynamics therefore always stops, and every
subgame has a pure NE.

Which NE the buyers play is a modelling choice. On path they play the
welfare-maximal NE; after seller s deviates alone they play the NE that is
worst for s. Both pick the lexicographically first assignment among ties.
Profiles where two or more sellers deviate never enter a certificate.
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import settings
from errors import BudgetExceeded, ConvergenceError, InputError
from market import (
    AuctionBook,
    BuyerAssignment,
    ContingentBuyerStrategy,
    SellerProfile,
    Subgame,
    ValuationMatrix,
    demand_profile,
)
from partitions import Partition, all_partitions

log = logging.getLogger(__name__)

UNILATERAL_UNIVERSE = "unilateral"

POTENTIAL_MAX = "potential-max"
PUNISH = "punish"


def _require_budget(what: str, needed: int, budget: int) -> None:
    if needed > budget:
        raise BudgetExceeded(what, needed, budget)


@dataclass(frozen=True)
class SelectionRule:
    kind: str
    seller: Optional[int] = None

    @classmethod
    def potential_max(cls) -> "SelectionRule":
        return cls(POTENTIAL_MAX)

    @classmethod
    def punish(cls, seller: int) -> "SelectionRule":
        return cls(PUNISH, seller)

    @classmethod
    def parse(cls, text: str) -> "SelectionRule":
        raw = (text or "").strip().lower()
        if raw == POTENTIAL_MAX:
            return cls.potential_max()
        for sep in (":", "("):
            if raw.startswith(PUNISH + sep):
                arg = raw[len(PUNISH) + 1:].rstrip(")")
                try:
                    return cls.punish(int(arg))
                except ValueError:
                    break
        raise InputError(f"unknown selection rule {text!r} (use 'potential-max' or 'punish:<seller>')")

    def __str__(self) -> str:
        return self.kind if self.seller is None else f"{self.kind}:{self.seller}"


@dataclass(frozen=True)
class SubgameResult:
    assignment: BuyerAssignment
    is_nash: bool
    steps: int
    potential: Fraction   # S * SW at the assignment


# ==========================
# SUBGAME SOLVERS
# ==========================

def _subgame(V: ValuationMatrix, profile: SellerProfile) -> Subgame:
    return Subgame(V, profile)


def best_response_dynamics(
    V: ValuationMatrix,
    profile: SellerProfile,
    start: Optional[BuyerAssignment] = None,
    *,
    step_cap: Optional[int] = None,
) -> SubgameResult:
    """Sequential strict best responses until nobody can gain.

    Buyers are scanned in index order; a buyer moves only on a strict gain, to
    the best seller with the lowest index among ties. Every move raises the
    potential, so the loop ends; the S^B cap is a tripwire, never a limit.
    """
    game = _subgame(V, profile)
    S, B = game.num_sellers, game.num_buyers
    start = start if start is not None else BuyerAssignment.everyone_at(0, B)
    start.validate(S, B)
    cap = step_cap if step_cap is not None else S ** B
    choice = list(start.choice)
    steps = 0
    moved = S > 1
    while moved:
        moved = False
        for b in range(B):
            masks = game.masks(choice)
            here = game.gain(choice, b, masks)
            best_s, best = choice[b], here
            for s in range(S):
                if s == choice[b]:
                    continue
                g = game.gain_if_moved(masks, b, s)
                if g > best:
                    best_s, best = s, g
            if best_s != choice[b]:
                choice[b] = best_s
                steps += 1
                moved = True
                if steps > cap:
                    raise ConvergenceError(f"best-response dynamics exceeded {cap} steps on {profile.text()}")
    log.debug("[BRD] %s converged in %d steps", profile.text(), steps)
    return SubgameResult(
        assignment=BuyerAssignment(tuple(choice)),
        is_nash=game.is_nash(choice),
        steps=steps,
        potential=Fraction(game.potential(choice), game.num_goods),
    )


def is_nash_assignment(V: ValuationMatrix, profile: SellerProfile, assignment: BuyerAssignment) -> bool:
    assignment.validate(profile.num_sellers, V.num_buyers)
    return _subgame(V, profile).is_nash(assignment.choice)


def nash_violations(
    V: ValuationMatrix, profile: SellerProfile, assignment: BuyerAssignment
) -> List[Tuple[int, int, Fraction]]:
    """All (buyer, better seller, utility gain) triples; empty iff the assignment is a NE."""
    assignment.validate(profile.num_sellers, V.num_buyers)
    return _subgame(V, profile).improving_moves(assignment.choice)


def _nash_choices(game: Subgame, budget: int) -> List[Tuple[int, ...]]:
    S, B = game.num_sellers, game.num_buyers
    _require_budget("subgame assignments (S^B)", S ** B, budget)
    found = [c for c in itertools.product(range(S), repeat=B) if game.is_nash(c)]
    if not found:
        raise ConvergenceError(f"no pure NE in subgame {game.profile.text()}; the potential argument says one exists")
    return found


def enumerate_subgame_nash(
    V: ValuationMatrix, profile: SellerProfile, *, budget: Optional[int] = None
) -> List[BuyerAssignment]:
    """Every pure NE of the subgame, lexicographic order."""
    budget = settings.BUDGET_ASSIGNMENTS if budget is None else budget
    return [BuyerAssignment(c) for c in _nash_choices(_subgame(V, profile), budget)]


def _select(game: Subgame, equilibria: Sequence[Tuple[int, ...]], rule: SelectionRule) -> Tuple[int, ...]:
    if rule.kind == POTENTIAL_MAX:
        return max(equilibria, key=lambda c: (game.potential(c), [-x for x in c]))
    if rule.kind == PUNISH:
        if rule.seller is None or not (0 <= rule.seller < game.num_sellers):
            raise InputError(f"punish rule needs a seller in 0..{game.num_sellers - 1}, got {rule.seller}")
        return min(equilibria, key=lambda c: (game.revenue(c, rule.seller), c))
    raise InputError(f"unknown selection rule {rule}")


def select_buyer_equilibrium(
    V: ValuationMatrix,
    profile: SellerProfile,
    rule: SelectionRule,
    *,
    budget: Optional[int] = None,
) -> BuyerAssignment:
    budget = settings.BUDGET_ASSIGNMENTS if budget is None else budget
    game = _subgame(V, profile)
    return BuyerAssignment(_select(game, _nash_choices(game, budget), rule))


# ==========================
# PURE-SELLER SPE
# ==========================

@dataclass(frozen=True)
class SpeCertificate:
    on_path_profile: SellerProfile
    contingent: ContingentBuyerStrategy
    universe: str = UNILATERAL_UNIVERSE
    fingerprint: Optional[str] = None

    @property
    def on_path_assignment(self) -> BuyerAssignment:
        return self.contingent.assignment_for(self.on_path_profile)


class _ProfileSummaries:
    """Buyer-equilibrium summary of every seller profile in one SPE search.

    Profiles are flat indices into the grid (Bell(G),)*S of partition indices,
    in itertools.product order; assignments are flat indices into (S,)*B,
    lexicographic. Per profile it keeps the on-path NE (potential-max), its
    potential and per-seller revenue, and per seller the NE worst for that
    seller (punish) with the revenue it leaves them.
    """

    def __init__(self, parts: Sequence[Partition], num_sellers: int, num_buyers: int):
        self.parts = list(parts)
        self.num_sellers = num_sellers
        self.num_buyers = num_buyers
        self.grid = (len(self.parts),) * num_sellers
        total = len(self.parts) ** num_sellers
        self.on_path = np.zeros(total, dtype=np.int64)
        self.potential = np.zeros(total, dtype=np.int64)
        self.revenue = np.zeros((total, num_sellers), dtype=np.int64)
        self.punish = np.zeros((total, num_sellers), dtype=np.int64)
        self.punish_revenue = np.zeros((total, num_sellers), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.on_path)

    def index_of(self, flat: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.grid))

    def flat_of(self, idx: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(idx), self.grid))

    def profile_of(self, idx: Sequence[int]) -> SellerProfile:
        return SellerProfile(tuple(self.parts[i] for i in idx))

    def assignment(self, code: int) -> BuyerAssignment:
        return BuyerAssignment(tuple(int(c) for c in np.unravel_index(int(code), (self.num_sellers,) * self.num_buyers)))

    def encode(self, choice: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(choice), (self.num_sellers,) * self.num_buyers))

    def survivors(self) -> np.ndarray:
        """Flat indices of profiles where no seller gains by switching partition alone.

        A seller's best deviation includes keeping its own partition: the punishing
        NE of the on-path subgame never pays that seller more than the on-path NE.
        """
        S = self.num_sellers
        revenue = self.revenue.reshape(self.grid + (S,))
        punished = self.punish_revenue.reshape(self.grid + (S,))
        ok = np.ones(self.grid, dtype=bool)
        for s in range(S):
            best_deviation = punished[..., s].max(axis=s, keepdims=True)
            ok &= best_deviation <= revenue[..., s]
        return np.flatnonzero(ok.reshape(-1))

    def contingent(self, flat: int) -> ContingentBuyerStrategy:
        idx = self.index_of(flat)
        table = {self.profile_of(idx): self.assignment(self.on_path[flat])}
        for s in range(self.num_sellers):
            for p in range(len(self.parts)):
                if p == idx[s]:
                    continue
                dev = idx[:s] + (p,) + idx[s + 1:]
                table[self.profile_of(dev)] = self.assignment(self.punish[self.flat_of(dev), s])
        return ContingentBuyerStrategy(table, UNILATERAL_UNIVERSE)


@dataclass(frozen=True)
class SpeOutcome:
    """One pure SPE; its contingent table is only built when asked for."""
    profile: SellerProfile
    sw: Fraction
    summaries: _ProfileSummaries = field(repr=False, compare=False)
    flat: int = field(repr=False, compare=False)

    @cached_property
    def contingent(self) -> ContingentBuyerStrategy:
        return self.summaries.contingent(self.flat)

    def certificate(self, fingerprint: Optional[str] = None) -> SpeCertificate:
        return SpeCertificate(self.profile, self.contingent, UNILATERAL_UNIVERSE, fingerprint)


def _assignment_grid(S: int, B: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Every assignment with its buyer bitmasks, as positions into a table of distinct masks.

    Returns (choices (C,B), masks (C,S), moved (C,B,S), distinct masks), where
    moved[c, b, s] is seller s's buyer set once buyer b joins it and masks/moved
    hold positions into the distinct-mask array.
    """
    choices = np.stack(np.unravel_index(np.arange(S ** B), (S,) * B), axis=1)
    bits = np.left_shift(np.int64(1), np.arange(B, dtype=np.int64))
    masks = ((choices[:, :, None] == np.arange(S)) * bits[None, :, None]).sum(axis=1)
    moved = masks[:, None, :] | bits[None, :, None]
    distinct = np.unique(np.concatenate([masks.ravel(), moved.ravel()]))
    return choices, np.searchsorted(distinct, masks), np.searchsorted(distinct, moved), distinct


def _summarize_batched(
    book: AuctionBook, summaries: _ProfileSummaries, batch_cells: int
) -> None:
    """Fill every profile's summary with numpy, a batch of profiles at a time.

    Per partition the auction outcome of every distinct buyer set is looked up
    once; a profile then only gathers its sellers' rows.
    """
    S, B = summaries.num_sellers, summaries.num_buyers
    choices, mask_pos, moved_pos, distinct = _assignment_grid(S, B)
    C = len(choices)
    top1 = np.zeros((len(summaries.parts), len(distinct)), dtype=np.int64)
    top2 = np.zeros_like(top1)
    gain = np.zeros((len(summaries.parts), len(distinct), B), dtype=np.int64)
    for p, part in enumerate(summaries.parts):
        page = book.markets(part)
        for u, mask in enumerate(distinct):
            m = page.market(int(mask))
            top1[p, u], top2[p, u] = m.top1, m.top2
            for b, g in m.gains.items():
                gain[p, u, b] = g

    buyers = np.arange(B)
    own = choices[None, :, :, None]
    per_profile = max(1, C * B * S)
    step = max(1, batch_cells // per_profile)
    never = np.iinfo(np.int64).max
    for lo in range(0, len(summaries), step):
        hi = min(lo + step, len(summaries))
        idx = np.stack(np.unravel_index(np.arange(lo, hi), summaries.grid), axis=1)   # (k, S)
        k = hi - lo
        rows = np.arange(k)
        if_moved = gain[idx[:, None, None, :], moved_pos[None], buyers[None, None, :, None]]   # (k, C, B, S)
        here = np.take_along_axis(if_moved, np.broadcast_to(own, (k, C, B, 1)), axis=3)[..., 0]
        nash = (if_moved.max(axis=3) <= here).all(axis=2)                                     # (k, C)
        stuck = ~nash.any(axis=1)
        if stuck.any():
            bad = summaries.profile_of(idx[int(np.argmax(stuck))])
            raise ConvergenceError(f"no pure NE in subgame {bad.text()}; the potential argument says one exists")
        potential = top1[idx[:, None, :], mask_pos[None]].sum(axis=2)                         # (k, C)
        revenue = top2[idx[:, None, :], mask_pos[None]]                                       # (k, C, S)
        # argmax/argmin return the first hit, i.e. the lexicographically first assignment
        on_path = np.where(nash, potential, -1).argmax(axis=1)
        punish = np.where(nash[:, :, None], revenue, never).argmin(axis=1)                    # (k, S)
        summaries.on_path[lo:hi] = on_path
        summaries.potential[lo:hi] = potential[rows, on_path]
        summaries.revenue[lo:hi] = revenue[rows, on_path]
        summaries.punish[lo:hi] = punish
        summaries.punish_revenue[lo:hi] = np.take_along_axis(revenue, punish[:, None, :], axis=1)[:, 0, :]


def _summarize_each(
    V: ValuationMatrix, book: AuctionBook, summaries: _ProfileSummaries, budget: int
) -> None:
    """Profile-by-profile fallback for subgames too large to batch."""
    S = summaries.num_sellers
    for flat in range(len(summaries)):
        game = Subgame(V, summaries.profile_of(summaries.index_of(flat)), book)
        eqs = _nash_choices(game, budget)
        on_path = _select(game, eqs, SelectionRule.potential_max())
        summaries.on_path[flat] = summaries.encode(on_path)
        summaries.potential[flat] = game.potential(on_path)
        for s in range(S):
            punish = _select(game, eqs, SelectionRule.punish(s))
            summaries.revenue[flat, s] = game.revenue(on_path, s)
            summaries.punish[flat, s] = summaries.encode(punish)
            summaries.punish_revenue[flat, s] = game.revenue(punish, s)


def find_pure_spe(
    V: ValuationMatrix,
    num_sellers: int,
    *,
    budget_profiles: Optional[int] = None,
    budget_assignments: Optional[int] = None,
) -> List[SpeOutcome]:
    """Every pure seller profile that survives all unilateral seller deviations.

    The list may be empty: existence in general needs mixed seller strategies,
    which are not searched.
    """
    if num_sellers < 1:
        raise InputError(f"need at least one seller, got {num_sellers}")
    budget_profiles = settings.BUDGET_PROFILES if budget_profiles is None else budget_profiles
    budget_assignments = settings.BUDGET_ASSIGNMENTS if budget_assignments is None else budget_assignments
    S, B, G = num_sellers, V.num_buyers, V.num_goods
    parts = all_partitions(G)
    _require_budget("seller profiles (Bell(G)^S)", len(parts) ** S, budget_profiles)
    _require_budget("subgame assignments (S^B)", S ** B, budget_assignments)

    book = AuctionBook(V)
    summaries = _ProfileSummaries(parts, S, B)
    if S ** B * B * S <= settings.SPE_BATCH_CELLS:
        _summarize_batched(book, summaries, settings.SPE_BATCH_CELLS)
    else:
        _summarize_each(V, book, summaries, budget_assignments)

    found = [
        SpeOutcome(
            profile=summaries.profile_of(summaries.index_of(flat)),
            sw=Fraction(int(summaries.potential[flat]), S * G),
            summaries=summaries,
            flat=int(flat),
        )
        for flat in summaries.survivors()
    ]
    log.info("[SPE] %d of %d seller profiles are pure SPE (S=%d, B=%d, G=%d)",
             len(found), len(summaries), S, B, G)
    return found


# ==========================
# CERTIFICATE CHECKING
# ==========================

@dataclass(frozen=True)
class Violation:
    kind: str            # "buyer" or "seller"
    profile: str         # profile text of the subgame where it happens
    agent: int
    deviation: str       # seller index (buyer move) or partition text (seller move)
    delta: Fraction

    def describe(self) -> str:
        if self.kind == "buyer":
            return f"buyer {self.agent} gains {self.delta} by moving to seller {self.deviation} in [{self.profile}]"
        return f"seller {self.agent} gains {self.delta} by switching to {self.deviation} from [{self.profile}]"


@dataclass(frozen=True)
class CertificateVerdict:
    ok: bool
    violations: Tuple[Violation, ...]
    checked_profiles: int


def unilateral_universe(on_path: SellerProfile) -> List[SellerProfile]:
    parts = all_partitions(on_path.num_goods)
    out = [on_path]
    for s in range(on_path.num_sellers):
        for p in parts:
            if p != on_path.partitions[s]:
                out.append(on_path.with_seller(s, p))
    return out


def verify_spe_certificate(V: ValuationMatrix, cert: SpeCertificate) -> CertificateVerdict:
    """Check (a) every table entry is a subgame NE, (b) no seller gains by deviating alone."""
    on_path = cert.on_path_profile
    if on_path.num_goods != V.num_goods:
        raise InputError(f"certificate covers {on_path.num_goods} goods, instance has {V.num_goods}")
    universe = unilateral_universe(on_path)
    for profile in universe:
        cert.contingent.assignment_for(profile).validate(on_path.num_sellers, V.num_buyers)

    violations: List[Violation] = []
    book = AuctionBook(V)
    games: Dict[SellerProfile, Subgame] = {}
    for profile in sorted(set(cert.contingent.table) | set(universe)):
        if profile.num_sellers != on_path.num_sellers:
            raise InputError(f"table profile '{profile.text()}' has {profile.num_sellers} sellers")
        choice = cert.contingent.assignment_for(profile).choice
        game = games[profile] = Subgame(V, profile, book)
        for b, s, delta in game.improving_moves(choice):
            violations.append(Violation("buyer", profile.text(), b, str(s), delta))

    on_choice = cert.contingent.assignment_for(on_path).choice
    on_game = games[on_path]
    for profile in universe[1:]:
        s = next(i for i, (a, b) in enumerate(zip(profile.partitions, on_path.partitions)) if a != b)
        dev_rev = games[profile].revenue(cert.contingent.assignment_for(profile).choice, s)
        delta = dev_rev - on_game.revenue(on_choice, s)
        if delta > 0:
            violations.append(Violation(
                "seller", on_path.text(), s, profile.partitions[s].text(), Fraction(delta, V.num_goods)
            ))
    if violations:
        log.info("[CERT] %d violations for on-path profile %s", len(violations), on_path.text())
    return CertificateVerdict(not violations, tuple(violations), len(games))


# ==========================
# WELFARE OPTIMUM
# ==========================

def optimal_assignment(
    V: ValuationMatrix, num_sellers: int, *, budget: Optional[int] = None
) -> Tuple[Fraction, BuyerAssignment]:
    """Best SW over all assignments with every seller fully disclosing.

    Full disclosure suffices: refining one seller's partition never lowers SW
    for a fixed assignment. Sellers are interchangeable then, so buyer 0 is
    pinned to seller 0.
    """
    if num_sellers < 1:
        raise InputError(f"need at least one seller, got {num_sellers}")
    budget = settings.BUDGET_ASSIGNMENTS if budget is None else budget
    S, B, G = num_sellers, V.num_buyers, V.num_goods
    _require_budget("welfare optimum assignments (S^B)", S ** B, budget)
    dp = demand_profile(V)
    ceiling = dp.c1 + min(S, B) * dp.p2
    masks = V.row_masks
    best, best_choice = -1, (0,) * B
    for rest in itertools.product(range(S), repeat=B - 1):
        choice = (0,) + rest
        cover = [0] * S
        for b, s in enumerate(choice):
            cover[s] |= masks[b]
        total = sum(bin(c).count("1") for c in cover)
        if total > best:
            best, best_choice = total, choice
            if best == ceiling:
                break
    return Fraction(best, S * G), BuyerAssignment(best_choice)


def compute_opt(V: ValuationMatrix, num_sellers: int, *, budget: Optional[int] = None) -> Fraction:
    return optimal_assignment(V, num_sellers, budget=budget)[0]
