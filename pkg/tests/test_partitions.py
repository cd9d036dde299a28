"""Tests for the seller strategy space in partitions.py: enumeration order and
counts, canonical text forms, and the refinement order.

Run from repo root:  python tests/test_partitions.py
"""

import itertools
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO))

from errors import BudgetExceeded, InputError  # noqa: E402
from partitions import (  # noqa: E402
    Partition,
    all_partitions,
    bell_number,
    enumerate_partitions,
    is_refinement,
)

BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]


def _raises(fn, exc=InputError):
    try:
        fn()
    except exc:
        return
    raise AssertionError(f"expected {exc.__name__}")


# ---- enumeration ----

def test_bell_numbers():
    assert [bell_number(n) for n in range(len(BELL))] == BELL


def test_single_good_has_one_partition():
    parts = all_partitions(1)
    assert [p.text() for p in parts] == ["0"]


def test_three_goods_in_lexicographic_rgs_order():
    texts = [p.text() for p in all_partitions(3)]
    assert texts == ["0,1,2", "0,1|2", "0,2|1", "0|1,2", "0|1|2"], texts


def test_counts_match_bell_and_are_distinct():
    for G in range(1, 8):
        parts = all_partitions(G)
        assert len(parts) == BELL[G], f"G={G}: {len(parts)} partitions"
        assert len(set(parts)) == len(parts), f"G={G}: duplicates"
        assert [p.rgs for p in parts] == sorted(p.rgs for p in parts), "not lexicographic"


def test_enumeration_starts_trivial_and_ends_finest():
    parts = all_partitions(5)
    assert parts[0] == Partition.trivial(5)
    assert parts[-1] == Partition.finest(5)


def test_enumerator_len_without_walking():
    assert len(enumerate_partitions(12)) == 4213597


def test_enumeration_guard():
    _raises(lambda: enumerate_partitions(13), BudgetExceeded)
    assert len(enumerate_partitions(13, max_goods=13)) == 27644437
    _raises(lambda: enumerate_partitions(0))


# ---- canonical forms ----

def test_parse_is_canonical():
    p = Partition.parse("2|1,0")
    assert p.text() == "0,1|2"
    assert p == Partition.from_blocks([[0, 1], [2]])
    assert p.rgs == (0, 0, 1)


def test_blocks_are_sorted_by_smallest_element():
    p = Partition.from_blocks([[3], [1, 4], [0, 2]])
    assert p.blocks == ((0, 2), (1, 4), (3,))
    assert p.num_blocks == 3


def test_invalid_partitions_are_rejected():
    _raises(lambda: Partition((1, 0)))
    _raises(lambda: Partition((0, 2)))
    _raises(lambda: Partition(()))
    _raises(lambda: Partition.from_blocks([[0, 1], [1, 2]]))
    _raises(lambda: Partition.from_blocks([[0], [2]]))
    _raises(lambda: Partition.from_blocks([[0], []]))
    _raises(lambda: Partition.parse("0,a|1"))
    _raises(lambda: Partition.parse("0|1", num_goods=3))


# ---- refinement ----

def _contained(fine, coarse):
    """Oracle: every block of `fine` is a subset of some block of `coarse`."""
    return all(any(set(f) <= set(c) for c in coarse.blocks) for f in fine.blocks)


def test_finest_refines_everything():
    for p in all_partitions(4):
        assert is_refinement(Partition.finest(4), p)
        assert is_refinement(p, Partition.trivial(4))


def test_coarser_does_not_refine_finer():
    assert not is_refinement(Partition.parse("0,1|2"), Partition.finest(3))


def test_refinement_matches_containment_oracle():
    parts = all_partitions(4)
    for a, b in itertools.product(parts, repeat=2):
        assert is_refinement(a, b) == _contained(a, b), f"{a} vs {b}"


def test_refinement_is_a_partial_order():
    for G in range(1, 5):
        parts = all_partitions(G)
        for a in parts:
            assert is_refinement(a, a)
        for a, b in itertools.product(parts, repeat=2):
            if a != b:
                assert not (is_refinement(a, b) and is_refinement(b, a)), f"{a} and {b}"
        for a, b, c in itertools.product(parts, repeat=3):
            if is_refinement(a, b) and is_refinement(b, c):
                assert is_refinement(a, c), f"{a} <= {b} <= {c}"


def test_refinement_needs_same_goods():
    _raises(lambda: is_refinement(Partition.finest(2), Partition.finest(3)))


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
