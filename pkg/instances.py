# instances.py
"""
Instances: the text document format, the named constructions, and seeded
random generation.

Document format (one field per line, '#' starts a comment line, blank lines are
ignored):

    label: crowded-good:2      (optional)
    seed: 7                    (optional)
    sellers: 2
    buyers: 3
    goods: 2
    matrix:
    0 1
    0 1
    1 0
"""

import hashlib
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

import settings
from errors import InputError
from market import ValuationMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Instance:
    sellers: int
    valuation: ValuationMatrix
    label: Optional[str] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.sellers < 1:
            raise InputError(f"need at least one seller, got {self.sellers}", field="sellers")
        if self.label is not None and ("\n" in self.label or not self.label.strip()):
            raise InputError(f"label must be a single non-empty line, got {self.label!r}", field="label")

    @property
    def num_buyers(self) -> int:
        return self.valuation.num_buyers

    @property
    def num_goods(self) -> int:
        return self.valuation.num_goods

    @property
    def name(self) -> str:
        """Label, or a shape tag for unlabelled instances."""
        return self.label or f"S{self.sellers}-B{self.num_buyers}-G{self.num_goods}"


# ==========================
# DOCUMENT FORMAT
# ==========================

_HEADER_FIELDS = ("label", "seed", "sellers", "buyers", "goods")


def _parse_int(raw: str, field: str, line: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"expected an integer, got {raw!r}", line=line, field=field) from None


def parse_instance(text: str) -> Instance:
    header: Dict[str, Tuple[str, int]] = {}
    matrix_line: Optional[int] = None
    rows: List[Tuple[List[int], int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if matrix_line is not None and ":" not in line:
            row = [_parse_int(tok, "matrix", lineno) for tok in line.split()]
            if any(x not in (0, 1) for x in row):
                raise InputError("non-binary valuation", line=lineno, field="matrix")
            rows.append((row, lineno))
            continue
        key, sep, value = line.partition(":")
        key = key.strip().lower()
        if not sep:
            raise InputError(f"expected 'field: value', got {line!r}", line=lineno)
        if key == "matrix":
            if matrix_line is not None:
                raise InputError("duplicate field", line=lineno, field="matrix")
            if value.strip():
                raise InputError("matrix rows start on the line after 'matrix:'", line=lineno, field="matrix")
            matrix_line = lineno
            continue
        if key not in _HEADER_FIELDS:
            raise InputError(f"unknown field {key!r}", line=lineno)
        if key in header:
            raise InputError("duplicate field", line=lineno, field=key)
        header[key] = (value.strip(), lineno)

    for key in ("sellers", "buyers", "goods"):
        if key not in header:
            raise InputError("missing field", field=key)
    if matrix_line is None:
        raise InputError("missing field", field="matrix")

    sellers = _parse_int(header["sellers"][0], "sellers", header["sellers"][1])
    buyers = _parse_int(header["buyers"][0], "buyers", header["buyers"][1])
    goods = _parse_int(header["goods"][0], "goods", header["goods"][1])
    if sellers < 1 or buyers < 1 or goods < 1:
        raise InputError("sellers, buyers and goods must all be positive", line=header["sellers"][1])
    for row, lineno in rows:
        if len(row) != goods:
            raise InputError(f"dimension mismatch: row has {len(row)} entries, goods is {goods}",
                             line=lineno, field="matrix")
    if len(rows) != buyers:
        raise InputError(f"dimension mismatch: {len(rows)} matrix rows, buyers is {buyers}",
                         line=matrix_line, field="matrix")

    seed = None
    if "seed" in header:
        seed = _parse_int(header["seed"][0], "seed", header["seed"][1])
    label = header["label"][0] if "label" in header else None
    if label == "":
        raise InputError("empty label", line=header["label"][1], field="label")
    return Instance(sellers, ValuationMatrix.from_rows(r for r, _ in rows), label, seed)


def emit_instance(instance: Instance) -> str:
    lines = []
    if instance.label is not None:
        lines.append(f"label: {instance.label}")
    if instance.seed is not None:
        lines.append(f"seed: {instance.seed}")
    lines += [
        f"sellers: {instance.sellers}",
        f"buyers: {instance.num_buyers}",
        f"goods: {instance.num_goods}",
        "matrix:",
    ]
    lines += [" ".join(str(x) for x in row) for row in instance.valuation.rows()]
    return "\n".join(lines) + "\n"


def instance_fingerprint(instance: Instance) -> str:
    """sha256 over S and the matrix only; relabelling keeps the fingerprint."""
    canonical = emit_instance(Instance(instance.sellers, instance.valuation))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def read_instance(path: Path) -> Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read instance file {str(path)!r}: {e.strerror or e}") from None
    return parse_instance(text)


def load_instance(ref: str) -> Instance:
    """A file path, or '@name:args' for a named construction."""
    if ref.startswith("@"):
        return named_instance(ref[1:])
    return read_instance(Path(ref))


# ==========================
# NAMED CONSTRUCTIONS
# ==========================

def _identity_rows(G: int) -> List[List[int]]:
    return [[1 if g == b else 0 for g in range(G)] for b in range(G)]


def three_buyer_cycle() -> Instance:
    """Each buyer wants two of three goods; bundling the first two beats full disclosure for buyer 1."""
    rows = [[1, 0, 1], [1, 1, 0], [0, 1, 1]]
    return Instance(1, ValuationMatrix.from_rows(rows), "three-buyer-cycle")


def stacked_identity(G: int, S: int = 2) -> Instance:
    """S copies of the G x G identity; copy k is buyers k*G .. k*G+G-1."""
    if G < 1:
        raise InputError(f"stacked-identity needs G >= 1, got {G}")
    if S < 2:
        raise InputError(f"stacked-identity needs S >= 2, got {S}")
    label = f"stacked-identity:{G}" if S == 2 else f"stacked-identity:{G},{S}"
    return Instance(S, ValuationMatrix.from_rows(_identity_rows(G) * S), label)


def identity(G: int) -> Instance:
    if G < 1:
        raise InputError(f"identity needs G >= 1, got {G}")
    return Instance(1, ValuationMatrix.from_rows(_identity_rows(G)), f"identity:{G}")


def crowded_good(S: int) -> Instance:
    """S buyers want good 1, a single buyer wants good 0; B = S + 1, G = 2."""
    if S < 2:
        raise InputError(f"crowded-good needs S >= 2, got {S}")
    rows = [[0, 1]] * S + [[1, 0]]
    return Instance(S, ValuationMatrix.from_rows(rows), f"crowded-good:{S}")


def all_ones(S: int, G: int) -> Instance:
    """Every buyer wants every good; one buyer per seller."""
    if S < 1 or G < 1:
        raise InputError(f"all-ones needs S >= 1 and G >= 1, got S={S}, G={G}")
    return Instance(S, ValuationMatrix.from_rows([[1] * G] * S), f"all-ones:{S},{G}")


# name -> (builder, min args, max args)
NAMED: Dict[str, Tuple[Callable[..., Instance], int, int]] = {
    "three-buyer-cycle": (three_buyer_cycle, 0, 0),
    "stacked-identity": (stacked_identity, 1, 2),
    "identity": (identity, 1, 1),
    "crowded-good": (crowded_good, 1, 1),
    "all-ones": (all_ones, 2, 2),
}


def parse_named(ref: str) -> Tuple[str, Tuple[int, ...]]:
    name, _, rest = (ref or "").strip().partition(":")
    name = name.strip().lower()
    if name not in NAMED:
        raise InputError(f"unknown named instance {name!r} (known: {', '.join(sorted(NAMED))})")
    try:
        args = tuple(int(tok) for tok in rest.split(",") if tok.strip())
    except ValueError:
        raise InputError(f"named instance arguments must be integers: {ref!r}") from None
    _, lo, hi = NAMED[name]
    if not (lo <= len(args) <= hi):
        want = str(lo) if lo == hi else f"{lo}-{hi}"
        raise InputError(f"{name} takes {want} argument(s), got {len(args)}")
    return name, args


def named_instance(ref: str) -> Instance:
    name, args = parse_named(ref)
    return NAMED[name][0](*args)


def named_match(instance: Instance) -> Optional[str]:
    """Construction name when the label names one and the instance is exactly it.

    Sellers and matrix must both agree; a user document that merely borrows a
    construction's label matches nothing.
    """
    if not instance.label:
        return None
    try:
        name, args = parse_named(instance.label)
    except InputError:
        return None
    if any(a > max(instance.sellers, instance.num_buyers, instance.num_goods) for a in args):
        return None
    try:
        built = NAMED[name][0](*args)
    except InputError:
        return None
    if built.sellers != instance.sellers or built.valuation != instance.valuation:
        return None
    return name


# ==========================
# RANDOM GENERATION
# ==========================

def generate_random(
    B: int,
    G: int,
    S: int,
    density: Fraction,
    seed: int,
    require_positive_demand: bool = False,
    *,
    retries: Optional[int] = None,
) -> Instance:
    """Each entry is 1 with probability `density`, drawn from numpy's PCG64 stream for `seed`.

    The density is used exactly: an entry is 1 when a uniform draw from
    {0..den-1} falls below num. With `require_positive_demand`, an all-zero row
    is redrawn up to `retries` times, then one uniformly chosen entry is set.
    """
    if B < 1 or G < 1 or S < 1:
        raise InputError(f"buyers, goods and sellers must be positive, got B={B}, G={G}, S={S}")
    if seed < 0:
        raise InputError(f"seed must be non-negative, got {seed}", field="seed")
    density = Fraction(density)
    if not (0 <= density <= 1):
        raise InputError(f"density must lie in [0, 1], got {density}", field="density")
    retries = settings.POSITIVE_DEMAND_RETRIES if retries is None else retries
    num, den = density.numerator, density.denominator

    rng = np.random.default_rng(seed)
    values = (rng.integers(0, den, size=(B, G)) < num).astype(np.int64)
    forced = 0
    if require_positive_demand:
        for b in range(B):
            tries = 0
            while not values[b].any() and tries < retries:
                values[b] = rng.integers(0, den, size=G) < num
                tries += 1
            if not values[b].any():
                values[b, int(rng.integers(0, G))] = 1
                forced += 1
    if forced:
        log.debug("[GEN] seed=%d forced an entry in %d of %d rows", seed, forced, B)
    label = f"random:B{B}-G{G}-S{S}-d{num}/{den}" + ("-pos" if require_positive_demand else "")
    return Instance(S, ValuationMatrix(values), label, seed)
