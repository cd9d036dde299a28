# certificates.py
"""
SPE certificates on disk, and the hand-made certificates of the tight
constructions.

On-disk document (JSON, sorted keys, two-space indent, trailing newline):

    {
      "buyers": 3,
      "fingerprint": "<sha256 of the canonical instance text>",
      "format": "sigcomp-spe-certificate/1",
      "goods": 2,
      "on_path": ["0|1", "0|1"],
      "sellers": 2,
      "table": {"0,1 / 0|1": [0, 0, 1], ...},
      "universe": "unilateral"
    }

Profile keys and partition strings use the text forms from market/partitions,
so two runs on the same instance produce byte-identical files.

`certificate_to_doc` / `doc_to_certificate` are the pure transforms and are
unit-tested; `write_certificate` / `read_certificate` are the file wrappers.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Callable, Dict, List

import settings
from equilibrium import UNILATERAL_UNIVERSE, SpeCertificate, unilateral_universe
from errors import InputError
from instances import Instance, instance_fingerprint, parse_named
from market import BuyerAssignment, ContingentBuyerStrategy, SellerProfile
from partitions import Partition

log = logging.getLogger(__name__)


# ==========================
# DOCUMENT <-> CERTIFICATE
# ==========================

def certificate_to_doc(cert: SpeCertificate) -> Dict[str, Any]:
    on_path = cert.on_path_profile
    return {
        "format": settings.CERTIFICATE_FORMAT,
        "fingerprint": cert.fingerprint,
        "sellers": on_path.num_sellers,
        "buyers": cert.on_path_assignment.num_buyers,
        "goods": on_path.num_goods,
        "universe": cert.universe,
        "on_path": [p.text() for p in on_path.partitions],
        "table": {
            profile.text(): list(assignment.choice)
            for profile, assignment in sorted(cert.contingent.table.items())
        },
    }


def _require(doc: Dict[str, Any], key: str, kind: type) -> Any:
    if key not in doc:
        raise InputError("certificate is missing a key", field=key)
    value = doc[key]
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise InputError(f"expected {kind.__name__}, got {type(value).__name__}", field=key)
    return value


def doc_to_certificate(doc: Dict[str, Any]) -> SpeCertificate:
    if not isinstance(doc, dict):
        raise InputError("certificate document must be a JSON object")
    tag = doc.get("format")
    if tag != settings.CERTIFICATE_FORMAT:
        raise InputError(f"unsupported certificate format {tag!r}", field="format")
    sellers = _require(doc, "sellers", int)
    buyers = _require(doc, "buyers", int)
    goods = _require(doc, "goods", int)
    on_path_texts = _require(doc, "on_path", list)
    raw_table = _require(doc, "table", dict)
    fingerprint = doc.get("fingerprint")
    if fingerprint is not None and not isinstance(fingerprint, str):
        raise InputError("expected str", field="fingerprint")

    if len(on_path_texts) != sellers:
        raise InputError(f"on_path lists {len(on_path_texts)} partitions for {sellers} sellers", field="on_path")
    on_path = SellerProfile(tuple(Partition.parse(str(t), goods) for t in on_path_texts))

    table: Dict[SellerProfile, BuyerAssignment] = {}
    for key, choice in raw_table.items():
        profile = SellerProfile.parse(key, goods)
        if profile.num_sellers != sellers:
            raise InputError(f"profile '{key}' has {profile.num_sellers} sellers, expected {sellers}", field="table")
        if not isinstance(choice, list) or not all(isinstance(c, int) and not isinstance(c, bool) for c in choice):
            raise InputError(f"assignment for '{key}' must be a list of seller indices", field="table")
        assignment = BuyerAssignment(tuple(choice))
        assignment.validate(sellers, buyers)
        if profile in table:
            raise InputError(f"profile '{key}' appears twice", field="table")
        table[profile] = assignment

    universe = doc.get("universe", UNILATERAL_UNIVERSE)
    return SpeCertificate(on_path, ContingentBuyerStrategy(table, universe), universe, fingerprint)


def dump_certificate(cert: SpeCertificate) -> str:
    return json.dumps(certificate_to_doc(cert), indent=2, sort_keys=True) + "\n"


def write_certificate(cert: SpeCertificate, path: Path) -> None:
    """tmp file + os.replace, so readers see the old certificate or the new one."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = target.with_suffix(target.suffix + ".tmp")
    try:
        with open(tmp_path, "w", encoding="utf-8") as f:
            f.write(dump_certificate(cert))
        os.replace(tmp_path, target)
    finally:
        if tmp_path.exists():
            try:
                tmp_path.unlink()
            except OSError:
                pass
    log.info("[CERT] wrote %s (%d table entries)", target, len(cert.contingent))


def read_certificate(path: Path) -> SpeCertificate:
    source = Path(path)
    try:
        with open(source, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise InputError(f"cannot read certificate {str(source)!r}: {e.strerror or e}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"certificate is not valid JSON: {e.msg}", line=e.lineno) from None
    return doc_to_certificate(doc)


def check_fingerprint(cert: SpeCertificate, instance: Instance) -> None:
    if cert.fingerprint is not None and cert.fingerprint != instance_fingerprint(instance):
        raise InputError("certificate was issued for a different instance", field="fingerprint")


# ==========================
# PRESCRIBED CERTIFICATES
# ==========================

def _build(
    instance: Instance,
    on_path: SellerProfile,
    respond: Callable[[SellerProfile], List[int]],
) -> SpeCertificate:
    table = {profile: BuyerAssignment(tuple(respond(profile))) for profile in unilateral_universe(on_path)}
    return SpeCertificate(
        on_path,
        ContingentBuyerStrategy(table, UNILATERAL_UNIVERSE),
        UNILATERAL_UNIVERSE,
        instance_fingerprint(instance),
    )


def _deviator(profile: SellerProfile, on_path: SellerProfile) -> int:
    """Index of the one seller whose partition differs, or -1 on path."""
    for s, (a, b) in enumerate(zip(profile.partitions, on_path.partitions)):
        if a != b:
            return s
    return -1


def stacked_identity_certificate(instance: Instance) -> SpeCertificate:
    """Nobody discloses; copy k shops at seller k.

    If seller k deviates to a partition, each of its blocks keeps exactly one
    interested copy-k buyer (the lowest index) and the rest of copy k walks to
    seller k+1, so the deviator never sees two bidders for the same block.
    """
    S, G = instance.sellers, instance.num_goods
    if instance.num_buyers != S * G:
        raise InputError(f"stacked-identity needs B = S * G, got B={instance.num_buyers}")
    on_path = SellerProfile.uniform(Partition.trivial(G), S)
    home = [b // G for b in range(instance.num_buyers)]

    def respond(profile: SellerProfile) -> List[int]:
        choice = list(home)
        k = _deviator(profile, on_path)
        if k < 0:
            return choice
        for block in profile.partitions[k].blocks:
            for g in block[1:]:
                choice[k * G + g] = (k + 1) % S
        return choice

    return _build(instance, on_path, respond)


def crowded_good_certificate(instance: Instance) -> SpeCertificate:
    """Full disclosure; the lone buyer of good 0 shares the last seller with one good-1 buyer.

    Should the last seller pool its goods, its good-1 buyer moves to seller 0
    so that pooling earns nothing.
    """
    S, G = instance.sellers, instance.num_goods
    if instance.num_buyers != S + 1 or G != 2:
        raise InputError(f"crowded-good needs B = S + 1 and G = 2, got B={instance.num_buyers}, G={G}")
    on_path = SellerProfile.uniform(Partition.finest(G), S)
    home = list(range(S)) + [S - 1]

    def respond(profile: SellerProfile) -> List[int]:
        choice = list(home)
        if _deviator(profile, on_path) == S - 1:
            choice[S - 1] = 0
        return choice

    return _build(instance, on_path, respond)


def all_ones_certificate(instance: Instance) -> SpeCertificate:
    """One buyer per seller in every subgame; nobody ever faces a second bid."""
    S, G = instance.sellers, instance.num_goods
    if instance.num_buyers != S:
        raise InputError(f"all-ones certificate needs one buyer per seller, got B={instance.num_buyers}, S={S}")
    on_path = SellerProfile.uniform(Partition.finest(G), S)
    return _build(instance, on_path, lambda _profile: list(range(S)))


PRESCRIBED: Dict[str, Callable[[Instance], SpeCertificate]] = {
    "stacked-identity": stacked_identity_certificate,
    "crowded-good": crowded_good_certificate,
    "all-ones": all_ones_certificate,
}


def prescribed_certificate(instance: Instance) -> SpeCertificate:
    """The hand-made certificate for a named construction, matched by label."""
    if instance.label is None:
        raise InputError("only labelled named instances have a prescribed certificate", field="label")
    name, _ = parse_named(instance.label)
    if name not in PRESCRIBED:
        raise InputError(f"no prescribed certificate for {name!r} (have: {', '.join(sorted(PRESCRIBED))})")
    return PRESCRIBED[name](instance)
