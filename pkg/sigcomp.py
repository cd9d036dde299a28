# sigcomp.py
"""
Command-line face of the signalling-competition solver.

    python sigcomp.py ratio @crowded-good:3
    python sigcomp.py find-spe instance.txt --cert-out spe.json
    python sigcomp.py verify-cert instance.txt spe.json
    python sigcomp.py sweep --max-cells 8 --sellers 2,3 --random 50 --workers 4

INSTANCE is a path to an instance document or '@name:args' for a named
construction (three-buyer-cycle, stacked-identity:G[,S], identity:G,
crowded-good:S, all-ones:S,G).

Exit codes: 0 every verdict passes, 1 some verdict fails, 2 input error,
3 budget exceeded.
"""

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import settings
from certificates import (
    check_fingerprint,
    dump_certificate,
    prescribed_certificate,
    read_certificate,
    write_certificate,
)
from equilibrium import (
    SelectionRule,
    best_response_dynamics,
    enumerate_subgame_nash,
    find_pure_spe,
    optimal_assignment,
    select_buyer_equilibrium,
    verify_spe_certificate,
)
from errors import EXIT_OK, EXIT_VERDICT_FAILED, InputError, SigcompError
from harness import (
    RENDERERS,
    exhaustive_instances,
    random_instances,
    run_ratio_experiment,
    sweep,
)
from instances import emit_instance, generate_random, instance_fingerprint, load_instance, named_instance
from market import BuyerAssignment, SellerProfile, Subgame, demand_profile
from monopoly import analyze_monopoly, check_monopoly_bounds
from rationals import fmt_q, parse_q

log = logging.getLogger("sigcomp")


def configure_logging(verbosity: int) -> None:
    level = settings.LOG_LEVEL
    if verbosity == 1:
        level = "INFO"
    elif verbosity >= 2:
        level = "DEBUG"
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _verdict_exit(verdicts) -> int:
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_VERDICT_FAILED


# ==========================
# COMMANDS
# ==========================

def cmd_solve_subgame(args) -> int:
    inst = load_instance(args.instance)
    V = inst.valuation
    profile = SellerProfile.parse(args.profile, inst.num_goods)
    if profile.num_sellers != inst.sellers:
        raise InputError(f"profile names {profile.num_sellers} sellers, instance has {inst.sellers}",
                         field="profile")
    start = BuyerAssignment.parse(args.start) if args.start else None
    result = best_response_dynamics(V, profile, start)
    game = Subgame(V, profile)
    choice = result.assignment.choice

    print(f"profile     {profile.text()}")
    print(f"assignment  {result.assignment.text()}  (steps={result.steps}, nash={'yes' if result.is_nash else 'no'})")
    print(f"SW          {fmt_q(game.social_welfare(choice))}")
    print("sellers     " + " ".join(fmt_q(game.seller_utility(choice, s)) for s in range(inst.sellers)))
    print("buyers      " + " ".join(fmt_q(game.buyer_utility(choice, b)) for b in range(inst.num_buyers)))
    if args.rule:
        rule = SelectionRule.parse(args.rule)
        chosen = select_buyer_equilibrium(V, profile, rule, budget=args.budget_assignments)
        print(f"{str(rule):<11} {chosen.text()}  (SW={fmt_q(game.social_welfare(chosen.choice))})")
    if args.all:
        for eq in enumerate_subgame_nash(V, profile, budget=args.budget_assignments):
            print(f"nash        {eq.text()}  (SW={fmt_q(game.social_welfare(eq.choice))})")
    return EXIT_OK if result.is_nash else EXIT_VERDICT_FAILED


def cmd_find_spe(args) -> int:
    inst = load_instance(args.instance)
    found = find_pure_spe(
        inst.valuation, inst.sellers,
        budget_profiles=args.budget_profiles, budget_assignments=args.budget_assignments,
    )
    fingerprint = instance_fingerprint(inst)
    rows = []
    ok = True
    for outcome in found:
        verdict = verify_spe_certificate(inst.valuation, outcome.certificate(fingerprint))
        ok = ok and verdict.ok
        rows.append({"profile": outcome.profile.text(), "sw": fmt_q(outcome.sw), "verified": verdict.ok})
    if args.cert_out and found:
        write_certificate(found[0].certificate(fingerprint), Path(args.cert_out))

    if args.format == "json":
        print(json.dumps({"label": inst.name, "spe": rows}, indent=2, sort_keys=True))
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["profile", "sw", "verified"])
        for r in rows:
            writer.writerow([r["profile"], r["sw"], "pass" if r["verified"] else "fail"])
        print(buf.getvalue(), end="")
    else:
        if not rows:
            print(f"{inst.name}: no SPE with pure seller strategies")
        for r in rows:
            print(f"{r['profile']:<30} SW={r['sw']:<8} {'verified' if r['verified'] else 'CERTIFICATE FAILS'}")
    return EXIT_OK if ok else EXIT_VERDICT_FAILED


def cmd_verify_cert(args) -> int:
    inst = load_instance(args.instance)
    cert = read_certificate(Path(args.certificate))
    check_fingerprint(cert, inst)
    verdict = verify_spe_certificate(inst.valuation, cert)
    if verdict.ok:
        print(f"PASS {cert.on_path_profile.text()} ({verdict.checked_profiles} subgames checked)")
        return EXIT_OK
    print(f"FAIL {cert.on_path_profile.text()}: {len(verdict.violations)} violation(s)")
    for v in verdict.violations:
        print(f"  {v.describe()}")
    return EXIT_VERDICT_FAILED


def cmd_monopoly(args) -> int:
    inst = load_instance(args.instance)
    analysis = analyze_monopoly(inst.valuation)
    verdicts = check_monopoly_bounds(analysis, demand_profile(inst.valuation))
    if args.format == "json":
        doc = {
            "label": inst.name,
            "max_revenue": fmt_q(analysis.max_revenue),
            "opt": fmt_q(analysis.opt),
            "rows": [
                {"partition": r.partition.text(), "revenue": fmt_q(r.revenue), "sw": fmt_q(r.sw),
                 "in_gamma1": r.in_gamma1, "in_gamma1_best": r.in_gamma1_best}
                for r in analysis.rows
            ],
            "verdicts": [v.to_dict() for v in verdicts],
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["partition", "revenue", "sw", "in_gamma1", "in_gamma1_best"])
        for r in analysis.rows:
            writer.writerow([r.partition.text(), fmt_q(r.revenue), fmt_q(r.sw),
                             int(r.in_gamma1), int(r.in_gamma1_best)])
        print(buf.getvalue(), end="")
    else:
        for r in analysis.rows:
            flags = ("*" if r.in_gamma1 else " ") + ("+" if r.in_gamma1_best else " ")
            print(f"{flags} {r.partition.text():<24} revenue={fmt_q(r.revenue):<6} SW={fmt_q(r.sw)}")
        print(f"max revenue {fmt_q(analysis.max_revenue)}; SW over maximizers "
              f"[{fmt_q(analysis.worst_sw)}, {fmt_q(analysis.best_sw)}]; opt {fmt_q(analysis.opt)}")
        for v in verdicts:
            print(f"{'ok  ' if v.passed else 'FAIL'} {v.describe()}")
    return _verdict_exit(verdicts)


def cmd_opt(args) -> int:
    inst = load_instance(args.instance)
    value, witness = optimal_assignment(inst.valuation, inst.sellers, budget=args.budget_assignments)
    print(f"opt {fmt_q(value)}  (full disclosure, assignment {witness.text()})")
    return EXIT_OK


def cmd_ratio(args) -> int:
    inst = load_instance(args.instance)
    report = run_ratio_experiment(
        inst, budget_profiles=args.budget_profiles, budget_assignments=args.budget_assignments
    )
    print(RENDERERS[args.format]([report]), end="")
    return _verdict_exit(report.verdicts)


def cmd_gen(args) -> int:
    density = parse_q(args.density, field="density")
    inst = generate_random(args.buyers, args.goods, args.sellers, density, args.seed, args.positive_demand)
    print(emit_instance(inst), end="")
    return EXIT_OK


def cmd_named(args) -> int:
    inst = named_instance(args.name)
    if not args.certificate:
        print(emit_instance(inst), end="")
        return EXIT_OK
    cert = prescribed_certificate(inst)
    verdict = verify_spe_certificate(inst.valuation, cert)
    if args.cert_out:
        write_certificate(cert, Path(args.cert_out))
    else:
        print(dump_certificate(cert), end="")
    for v in verdict.violations:
        print(f"[CERT] {v.describe()}", file=sys.stderr)
    return EXIT_OK if verdict.ok else EXIT_VERDICT_FAILED


def _int_list(text: str) -> List[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def cmd_sweep(args) -> int:
    instances = list(exhaustive_instances(args.sellers, args.max_cells, args.max_buyers, args.max_goods))
    if args.random:
        instances += list(random_instances(args.sellers, args.random, args.max_dim, args.seed))
    log.info("[SWEEP] %d instances queued", len(instances))
    reports = sweep(
        instances,
        workers=args.workers,
        budget_profiles=args.budget_profiles,
        budget_assignments=args.budget_assignments,
        progress=not args.quiet and sys.stderr.isatty(),
    )
    print(RENDERERS[args.format](reports), end="")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERDICT_FAILED


# ==========================
# PARSER
# ==========================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--budget-profiles", type=int, default=settings.BUDGET_PROFILES,
                        help="max Bell(G)^S seller profiles per search")
    common.add_argument("--budget-assignments", type=int, default=settings.BUDGET_ASSIGNMENTS,
                        help="max S^B buyer assignments per subgame")
    common.add_argument("--format", choices=sorted(RENDERERS), default="table")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="sigcomp", description="Exact solver and bound checker for signalling competitions."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-subgame", parents=[common], help="best-response dynamics for one seller profile")
    p.add_argument("instance")
    p.add_argument("--profile", required=True, help="e.g. '0,1|2 / 0|1|2'")
    p.add_argument("--start", help="starting assignment, e.g. '0 0 1' (default: everyone at seller 0)")
    p.add_argument("--rule", help="also report the NE chosen by 'potential-max' or 'punish:<seller>'")
    p.add_argument("--all", action="store_true", help="list every pure NE of the subgame")
    p.set_defaults(handler=cmd_solve_subgame)

    p = sub.add_parser("find-spe", parents=[common], help="all SPE with pure seller strategies")
    p.add_argument("instance")
    p.add_argument("--cert-out", help="write the first SPE's certificate here")
    p.set_defaults(handler=cmd_find_spe)

    p = sub.add_parser("verify-cert", parents=[common], help="check an SPE certificate")
    p.add_argument("instance")
    p.add_argument("certificate")
    p.set_defaults(handler=cmd_verify_cert)

    p = sub.add_parser("monopoly", parents=[common], help="single-seller revenue/welfare scan")
    p.add_argument("instance")
    p.set_defaults(handler=cmd_monopoly)

    p = sub.add_parser("opt", parents=[common], help="welfare optimum")
    p.add_argument("instance")
    p.set_defaults(handler=cmd_opt)

    p = sub.add_parser("ratio", parents=[common], help="competition vs monopoly bound report")
    p.add_argument("instance")
    p.set_defaults(handler=cmd_ratio)

    p = sub.add_parser("gen", parents=[common], help="seeded random instance document")
    p.add_argument("--buyers", type=int, required=True)
    p.add_argument("--goods", type=int, required=True)
    p.add_argument("--sellers", type=int, default=2)
    p.add_argument("--density", default="1/2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--positive-demand", action="store_true")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("named", parents=[common], help="print a named construction")
    p.add_argument("name", help="e.g. crowded-good:3 or stacked-identity:4")
    p.add_argument("--certificate", action="store_true", help="emit its prescribed SPE certificate instead")
    p.add_argument("--cert-out", help="write the certificate to a file instead of stdout")
    p.set_defaults(handler=cmd_named)

    p = sub.add_parser("sweep", parents=[common], help="bound report over many instances")
    p.add_argument("--max-cells", type=int, default=12, help="exhaustive over all matrices with B*G <= this")
    p.add_argument("--max-buyers", type=int, default=5)
    p.add_argument("--max-goods", type=int, default=4)
    p.add_argument("--sellers", type=_int_list, default=[2, 3])
    p.add_argument("--random", type=int, default=0, help="number of seeded random instances")
    p.add_argument("--max-dim", type=int, default=6, help="max B and G for random instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=settings.SWEEP_WORKERS)
    p.add_argument("--quiet", action="store_true", help="no progress bar")
    p.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except SigcompError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
