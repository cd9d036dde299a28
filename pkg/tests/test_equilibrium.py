"""Tests for equilibrium.py: best-response dynamics, subgame NE enumeration and
selection, pure-seller SPE search, certificate checking, and the welfare optimum.

The brute-force oracle at the top recomputes buyer utility straight from the
per-block formula (no caching, no Subgame), so agreement with it is an
independent check of the cached evaluator.

Run from repo root:  python tests/test_equilibrium.py
"""

import itertools
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO))

import settings  # noqa: E402
from equilibrium import (  # noqa: E402
    SelectionRule,
    SpeCertificate,
    best_response_dynamics,
    compute_opt,
    enumerate_subgame_nash,
    find_pure_spe,
    is_nash_assignment,
    nash_violations,
    optimal_assignment,
    select_buyer_equilibrium,
    unilateral_universe,
    verify_spe_certificate,
)
from errors import BudgetExceeded, ConvergenceError, InputError  # noqa: E402
from instances import all_ones, crowded_good, identity, stacked_identity  # noqa: E402
from market import (  # noqa: E402
    AuctionBook,
    BuyerAssignment,
    ContingentBuyerStrategy,
    SellerProfile,
    Subgame,
    ValuationMatrix,
)
from partitions import Partition, all_partitions  # noqa: E402

CROWDED = crowded_good(2).valuation
STACKED3 = stacked_identity(3).valuation


def _raises(fn, exc=InputError):
    try:
        fn()
    except exc:
        return
    raise AssertionError(f"expected {exc.__name__}")


def _finest(G, S):
    return SellerProfile.uniform(Partition.finest(G), S)


def _trivial(G, S):
    return SellerProfile.uniform(Partition.trivial(G), S)


# ---- brute-force oracle ----

def _raw_utility(V, profile, choice, b):
    rows = V.rows()
    s = choice[b]
    co = [x for x in range(len(choice)) if choice[x] == s]
    total = 0
    for block in profile.partitions[s].blocks:
        vals = sorted((sum(rows[x][g] for g in block) for x in co), reverse=True)
        second = vals[1] if len(vals) > 1 else 0
        total += max(sum(rows[b][g] for g in block) - second, 0)
    return Fraction(total, V.num_goods)


def _oracle_nash(V, profile, choice):
    S = profile.num_sellers
    for b in range(len(choice)):
        here = _raw_utility(V, profile, choice, b)
        for s in range(S):
            moved = list(choice)
            moved[b] = s
            if _raw_utility(V, profile, moved, b) > here:
                return False
    return True


def _random_game(rng, max_buyers=4, max_goods=3, sellers=(2, 3)):
    B = int(rng.integers(1, max_buyers + 1))
    G = int(rng.integers(1, max_goods + 1))
    S = int(sellers[int(rng.integers(0, len(sellers)))])
    V = ValuationMatrix(rng.integers(0, 2, size=(B, G)))
    parts = all_partitions(G)
    profile = SellerProfile(tuple(parts[int(rng.integers(0, len(parts)))] for _ in range(S)))
    return V, profile


# ---- best-response dynamics ----

def test_single_seller_dynamics_do_nothing():
    V = identity(3).valuation
    start = BuyerAssignment.everyone_at(0, 3)
    result = best_response_dynamics(V, SellerProfile((Partition.trivial(3),)), start)
    assert result.assignment == start
    assert result.steps == 0 and result.is_nash


def test_stacked_identity_full_disclosure_splits_copies():
    result = best_response_dynamics(STACKED3, _finest(3, 2), BuyerAssignment.everyone_at(0, 6))
    assert result.is_nash
    assert result.assignment.choice == (1, 1, 1, 0, 0, 0)
    assert result.steps == 3
    assert result.potential == 2, "potential is S*SW"
    assert result.assignment in enumerate_subgame_nash(STACKED3, _finest(3, 2))


def test_dynamics_default_start_is_everyone_at_seller_zero():
    result = best_response_dynamics(CROWDED, _finest(2, 2))
    assert result.is_nash
    assert Subgame(CROWDED, _finest(2, 2)).social_welfare(result.assignment.choice) == Fraction(3, 4)


def test_dynamics_terminate_at_nash_on_random_games():
    rng = np.random.default_rng(42)
    for _ in range(60):
        V, profile = _random_game(rng)
        start = BuyerAssignment(tuple(int(x) for x in rng.integers(0, profile.num_sellers, size=V.num_buyers)))
        result = best_response_dynamics(V, profile, start)
        assert result.is_nash and is_nash_assignment(V, profile, result.assignment)
        assert result.steps <= profile.num_sellers ** V.num_buyers


def test_step_cap_is_a_hard_stop():
    _raises(lambda: best_response_dynamics(STACKED3, _finest(3, 2), step_cap=1), ConvergenceError)


# ---- Nash checks and enumeration ----

def test_prescribed_pooled_split_is_nash():
    split = BuyerAssignment((0, 0, 0, 1, 1, 1))
    assert is_nash_assignment(STACKED3, _trivial(3, 2), split)
    crowd = BuyerAssignment.everyone_at(0, 6)
    assert not is_nash_assignment(STACKED3, _trivial(3, 2), crowd)
    moves = nash_violations(STACKED3, _trivial(3, 2), crowd)
    assert (0, 1, Fraction(1, 3)) in moves


def test_single_seller_has_one_nash():
    V = identity(2).valuation
    assert enumerate_subgame_nash(V, SellerProfile((Partition.trivial(2),))) == [BuyerAssignment((0, 0))]


def test_crowded_good_nash_contains_the_split():
    eqs = enumerate_subgame_nash(CROWDED, _finest(2, 2))
    assert BuyerAssignment((0, 1, 1)) in eqs
    assert BuyerAssignment((1, 0, 0)) in eqs
    assert eqs == sorted(eqs), "lexicographic order"


def test_enumeration_budget():
    _raises(lambda: enumerate_subgame_nash(CROWDED, _finest(2, 2), budget=7), BudgetExceeded)


def test_nash_sets_agree_with_raw_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(120):
        V, profile = _random_game(rng, max_buyers=5)
        S, B = profile.num_sellers, V.num_buyers
        if S ** B > 4096:
            continue
        oracle = [BuyerAssignment(c) for c in itertools.product(range(S), repeat=B) if _oracle_nash(V, profile, c)]
        assert oracle, "every subgame has a pure NE"
        assert enumerate_subgame_nash(V, profile) == oracle
        result = best_response_dynamics(V, profile)
        assert result.assignment in oracle
        checked += 1
    assert checked > 50


# ---- selection rules ----

def test_potential_max_on_crowded_good():
    chosen = select_buyer_equilibrium(CROWDED, _finest(2, 2), SelectionRule.potential_max())
    assert chosen == BuyerAssignment((0, 1, 0))
    assert Subgame(CROWDED, _finest(2, 2)).social_welfare(chosen.choice) == Fraction(3, 4)


def test_single_seller_selection_is_unique():
    V = identity(3).valuation
    solo = SellerProfile((Partition.finest(3),))
    for rule in (SelectionRule.potential_max(), SelectionRule.punish(0)):
        assert select_buyer_equilibrium(V, solo, rule) == BuyerAssignment((0, 0, 0))


def test_punish_starves_a_deviating_pooler():
    deviated = _trivial(3, 2).with_seller(0, Partition.finest(3))
    chosen = select_buyer_equilibrium(STACKED3, deviated, SelectionRule.punish(0))
    assert Subgame(STACKED3, deviated).seller_utility(chosen.choice, 0) == 0


def test_selection_rule_parsing():
    assert SelectionRule.parse("potential-max") == SelectionRule.potential_max()
    assert SelectionRule.parse("punish:1") == SelectionRule.punish(1)
    assert SelectionRule.parse("punish(0)") == SelectionRule.punish(0)
    assert str(SelectionRule.punish(2)) == "punish:2"
    _raises(lambda: SelectionRule.parse("kindest"))
    _raises(lambda: select_buyer_equilibrium(CROWDED, _finest(2, 2), SelectionRule.punish(5)))


# ---- SPE search ----

def _by_profile(found):
    return {o.profile.text(): o for o in found}


def test_stacked_identity_pooling_is_an_spe():
    found = _by_profile(find_pure_spe(STACKED3, 2))
    pooled = found.get("0,1,2 / 0,1,2")
    assert pooled is not None, f"pooling profile missing from {sorted(found)}"
    assert pooled.sw == Fraction(1, 3)


def test_crowded_good_full_disclosure_is_an_spe():
    found = _by_profile(find_pure_spe(CROWDED, 2))
    assert found["0|1 / 0|1"].sw == Fraction(3, 4)


def test_all_ones_full_disclosure_is_an_spe():
    found = _by_profile(find_pure_spe(all_ones(2, 2).valuation, 2))
    assert found["0|1 / 0|1"].sw == 1


def test_every_found_spe_verifies():
    for inst in (crowded_good(2), stacked_identity(2), all_ones(2, 2), identity(3)):
        found = find_pure_spe(inst.valuation, inst.sellers)
        assert found, f"{inst.label}: no pure SPE"
        for outcome in found:
            cert = outcome.certificate()
            verdict = verify_spe_certificate(inst.valuation, cert)
            assert verdict.ok, f"{inst.label} {outcome.profile}: {[v.describe() for v in verdict.violations]}"
            assert len(cert.contingent) == len(unilateral_universe(outcome.profile))


def test_single_seller_spe_are_revenue_maximizers():
    found = find_pure_spe(identity(2).valuation, 1)
    assert [o.profile.text() for o in found] == ["0,1"]
    assert found[0].sw == Fraction(1, 2)


def test_spe_search_budgets():
    _raises(lambda: find_pure_spe(STACKED3, 2, budget_profiles=24), BudgetExceeded)
    _raises(lambda: find_pure_spe(STACKED3, 2, budget_assignments=63), BudgetExceeded)


def _spe_rows(V, S, batch_cells):
    saved = settings.SPE_BATCH_CELLS
    settings.SPE_BATCH_CELLS = batch_cells
    try:
        return [(o.profile, o.sw, dict(o.contingent.table)) for o in find_pure_spe(V, S)]
    finally:
        settings.SPE_BATCH_CELLS = saved


def test_batched_search_matches_profile_by_profile():
    rng = np.random.default_rng(31)
    cases = [(CROWDED, 2), (STACKED3, 2), (all_ones(3, 2).valuation, 3)]
    for _ in range(12):
        B, G, S = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(2, 4))
        cases.append((ValuationMatrix(rng.integers(0, 2, size=(B, G))), S))
    for V, S in cases:
        one_each = _spe_rows(V, S, batch_cells=1)
        whole = _spe_rows(V, S, batch_cells=1 << 22)
        single = _spe_rows(V, S, batch_cells=S ** V.num_buyers * V.num_buyers * S)
        assert whole == one_each, f"{V} S={S}"
        assert single == one_each, f"{V} S={S}"


def test_contingent_table_is_built_on_demand():
    outcome = _by_profile(find_pure_spe(STACKED3, 2))["0,1,2 / 0,1,2"]
    assert "contingent" not in vars(outcome)
    table = outcome.contingent.table
    assert "contingent" in vars(outcome)
    assert table[outcome.profile] == BuyerAssignment((0, 0, 0, 1, 1, 1))
    assert len(table) == len(unilateral_universe(outcome.profile))


def test_summaries_use_one_auction_book():
    book = AuctionBook(CROWDED)
    Subgame(CROWDED, _finest(2, 2), book)
    Subgame(CROWDED, SellerProfile((Partition.trivial(2), Partition.finest(2))), book)
    assert len(book) == 2, "pages are keyed by partition, not by seller"
    _raises(lambda: Subgame(STACKED3, _finest(3, 2), book))


# ---- certificate checking ----

def test_tampered_on_path_assignment_fails():
    outcome = _by_profile(find_pure_spe(STACKED3, 2))["0,1,2 / 0,1,2"]
    table = dict(outcome.contingent.table)
    table[outcome.profile] = BuyerAssignment.everyone_at(0, 6)
    cert = SpeCertificate(outcome.profile, ContingentBuyerStrategy(table))
    verdict = verify_spe_certificate(STACKED3, cert)
    assert not verdict.ok
    buyer_moves = [v for v in verdict.violations if v.kind == "buyer" and v.profile == "0,1,2 / 0,1,2"]
    assert buyer_moves and all(v.delta > 0 for v in buyer_moves)


def test_single_seller_certificate():
    V = identity(2).valuation
    universe = [SellerProfile((p,)) for p in all_partitions(2)]
    table = {p: BuyerAssignment((0, 0)) for p in universe}
    good = SpeCertificate(SellerProfile((Partition.trivial(2),)), ContingentBuyerStrategy(table))
    assert verify_spe_certificate(V, good).ok
    bad = SpeCertificate(SellerProfile((Partition.finest(2),)), ContingentBuyerStrategy(table))
    verdict = verify_spe_certificate(V, bad)
    assert [(v.kind, v.deviation, v.delta) for v in verdict.violations] == [("seller", "0,1", Fraction(1, 2))]


def test_incomplete_certificate_is_an_input_error():
    on_path = _finest(2, 2)
    cert = SpeCertificate(on_path, ContingentBuyerStrategy({on_path: BuyerAssignment((0, 1, 1))}))
    try:
        verify_spe_certificate(CROWDED, cert)
    except InputError as e:
        assert "0,1 / 0|1" in str(e) or "0|1 / 0,1" in str(e), str(e)
    else:
        raise AssertionError("expected InputError for the missing deviation profile")


# ---- welfare optimum ----

def test_opt_examples():
    assert compute_opt(identity(3).valuation, 1) == 1
    assert compute_opt(STACKED3, 2) == 1
    assert compute_opt(ValuationMatrix(np.zeros((2, 3), dtype=int)), 2) == 0
    assert compute_opt(CROWDED, 2) == Fraction(3, 4)


def test_opt_single_seller_is_served_demand():
    rng = np.random.default_rng(3)
    for _ in range(30):
        V = ValuationMatrix(rng.integers(0, 2, size=(3, 4)))
        served = sum(1 for d in V.demand if d)
        assert compute_opt(V, 1) == Fraction(served, 4)


def test_opt_dominates_every_assignment_and_respects_the_cap():
    rng = np.random.default_rng(13)
    for _ in range(30):
        V, profile = _random_game(rng)
        S, B, G = profile.num_sellers, V.num_buyers, V.num_goods
        opt, witness = optimal_assignment(V, S)
        game = Subgame(V, profile)
        for choice in itertools.product(range(S), repeat=B):
            assert game.social_welfare(choice) <= opt
        assert Subgame(V, _finest(G, S)).social_welfare(witness.choice) == opt
        p1 = sum(1 for d in V.demand if d >= 1)
        p2 = sum(1 for d in V.demand if d >= 2)
        assert opt <= Fraction((p1 - p2) + min(S, B) * p2, S * G)


def test_opt_budget():
    _raises(lambda: compute_opt(STACKED3, 2, budget=10), BudgetExceeded)


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
                print(f"PASS {name}")
            except AssertionError as e:
                failures += 1
                print(f"FAIL {name}: {e}")
            except Exception as e:
                failures += 1
                print(f"ERROR {name}: {type(e).__name__}: {e}")
    print(f"\n{'ALL PASSED' if not failures else f'{failures} FAILED'}")
    sys.exit(1 if failures else 0)
