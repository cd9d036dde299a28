# partitions.py
"""
The seller strategy space: every partition of the good set {0..G-1}.

A partition is stored as its restricted-growth sequence (RGS): rgs[g] is the
block label of good g, labels are assigned in order of first appearance, so
rgs[0] == 0 and rgs[i] <= max(rgs[:i]) + 1. The encoding is unique, which makes
equality and hashing O(G) and lets partitions key the SPE tables directly.

Text form (used in reports and certificates): blocks as sorted comma-separated
indices joined by "|", blocks ordered by their smallest element, e.g. "0,1|2".
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import settings
from errors import BudgetExceeded, InputError


@dataclass(frozen=True, order=True)
class Partition:
    rgs: Tuple[int, ...]

    def __post_init__(self):
        rgs = self.rgs
        if not rgs:
            raise InputError("a partition needs at least one good")
        if rgs[0] != 0:
            raise InputError(f"restricted-growth sequence must start at 0, got {list(rgs)}")
        top = 0
        for label in rgs[1:]:
            if label < 0 or label > top + 1:
                raise InputError(f"not a restricted-growth sequence: {list(rgs)}")
            top = max(top, label)

    @property
    def num_goods(self) -> int:
        return len(self.rgs)

    @cached_property
    def blocks(self) -> Tuple[Tuple[int, ...], ...]:
        out: List[List[int]] = []
        for good, label in enumerate(self.rgs):
            if label == len(out):
                out.append([])
            out[label].append(good)
        return tuple(tuple(b) for b in out)

    @property
    def num_blocks(self) -> int:
        return max(self.rgs) + 1

    def text(self) -> str:
        return "|".join(",".join(str(g) for g in block) for block in self.blocks)

    def __str__(self) -> str:
        return self.text()

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], num_goods: Optional[int] = None) -> "Partition":
        block_sets = [sorted(set(int(g) for g in b)) for b in blocks]
        if any(not b for b in block_sets):
            raise InputError("partition blocks must be non-empty")
        seen: List[int] = [g for b in block_sets for g in b]
        if len(seen) != len(set(seen)):
            raise InputError("partition blocks must be disjoint")
        if num_goods is None:
            num_goods = len(seen)
        if sorted(seen) != list(range(num_goods)):
            raise InputError(f"partition blocks must cover exactly the goods 0..{num_goods - 1}")
        rgs = [0] * num_goods
        for label, block in enumerate(sorted(block_sets, key=lambda b: b[0])):
            for g in block:
                rgs[g] = label
        return cls(tuple(rgs))

    @classmethod
    def parse(cls, text: str, num_goods: Optional[int] = None) -> "Partition":
        raw = (text or "").strip()
        if not raw:
            raise InputError("empty partition text")
        blocks = []
        for chunk in raw.split("|"):
            try:
                blocks.append([int(tok) for tok in chunk.split(",") if tok.strip()])
            except ValueError:
                raise InputError(f"bad partition text: {raw!r}") from None
        return cls.from_blocks(blocks, num_goods)

    @classmethod
    def finest(cls, num_goods: int) -> "Partition":
        return cls(tuple(range(num_goods)))

    @classmethod
    def trivial(cls, num_goods: int) -> "Partition":
        return cls((0,) * num_goods)


def bell_number(n: int) -> int:
    """Bell(n) via the Bell triangle."""
    if n < 0:
        raise InputError(f"Bell number of a negative size: {n}")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


class PartitionEnumerator:
    """Walks every RGS of length G in lexicographic order, trivial partition first.

    The cursor is the RGS itself plus prefix maxima, so advancing is O(G) and
    nothing but the current partition is ever held in memory.
    """

    def __init__(self, num_goods: int):
        self.num_goods = num_goods
        self._cursor: Optional[List[int]] = [0] * num_goods
        self._prefix_max = [0] * num_goods  # _prefix_max[i] == max(cursor[:i]) for i >= 1

    def __len__(self) -> int:
        return bell_number(self.num_goods)

    def __iter__(self) -> "PartitionEnumerator":
        return self

    def __next__(self) -> Partition:
        if self._cursor is None:
            raise StopIteration
        current = Partition(tuple(self._cursor))
        self._advance()
        return current

    def _advance(self) -> None:
        a, m = self._cursor, self._prefix_max
        for i in range(self.num_goods - 1, 0, -1):
            if a[i] <= m[i]:
                a[i] += 1
                top = max(m[i], a[i])
                for j in range(i + 1, self.num_goods):
                    a[j] = 0
                    m[j] = top
                return
        self._cursor = None


def enumerate_partitions(num_goods: int, *, max_goods: Optional[int] = None) -> PartitionEnumerator:
    """Stream every partition of {0..G-1} exactly once; count is Bell(G)."""
    if num_goods < 1:
        raise InputError(f"need at least one good, got {num_goods}")
    guard = settings.MAX_ENUM_GOODS if max_goods is None else max_goods
    if num_goods > guard:
        raise BudgetExceeded("partition enumeration (goods)", num_goods, guard)
    return PartitionEnumerator(num_goods)


def all_partitions(num_goods: int, *, max_goods: Optional[int] = None) -> List[Partition]:
    return list(enumerate_partitions(num_goods, max_goods=max_goods))


def is_refinement(fine: Partition, coarse: Partition) -> bool:
    """True iff every block of `fine` sits inside some block of `coarse`."""
    if fine.num_goods != coarse.num_goods:
        raise InputError(
            f"partitions are over different good sets ({fine.num_goods} vs {coarse.num_goods} goods)"
        )
    image = {}
    for f_label, c_label in zip(fine.rgs, coarse.rgs):
        if image.setdefault(f_label, c_label) != c_label:
            return False
    return True


def check_same_goods(partitions: Sequence[Partition], num_goods: int) -> None:
    for p in partitions:
        if p.num_goods != num_goods:
            raise InputError(f"partition {p.text()} covers {p.num_goods} goods, instance has {num_goods}")
