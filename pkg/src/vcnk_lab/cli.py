"""Command line entry point: ``vcnk-lab <subcommand> <spec.json> [flags]``.

Exit codes: 0 when no report is violated, 1 for other errors, 2 for parse
errors, 3 when an enumeration guard trips, 4 when some report is violated.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .dimensions import FunctionFamily, audit_gamma_growth, natarajan_dimension, vcn_k, vcn_k_partite
from .errors import BudgetExhausted, ExplosionGuard, NotACover, NotRealizable, ParseError, VcnkError
from .instance import Instance, dump_instance, parse_instance
from .losses import check_almost_metric, loss_matrix
from .packing import (
    DEFAULT_OPTIMAL_CAP,
    audit_hp_to_vcnk,
    audit_hp_to_vcnk_partite,
    cover_bound_check,
    greedy_centers,
    optimal_centers,
    packing_lower_bound,
)
from .pacsim import DEFAULT_DELTA_GRID, audit_pac_to_hp, estimate_m_pac
from .partization import (
    audit_hp_transfer,
    audit_kpart_basics,
    audit_kpart_loss,
    partize_class,
    partize_loss,
    partize_measure,
    partize_universe,
)
from .report import CONSISTENT, VACUOUS, VERIFIED, VIOLATED, AuditReport, render
from .universe import DEFAULT_EXPLOSION_CAP, explosion_limit

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_EXPLOSION, EXIT_VIOLATED = 0, 1, 2, 3, 4

AUDITS = (
    "almostmetric",
    "coverbound",
    "pac-to-hp",
    "hp-to-vcnk",
    "kpart-basics",
    "kpart-loss",
    "hp-transfer",
    "gamma-growth",
)


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"{text!r} is not a rational such as 1/4") from None


def _rational_list(text: str) -> tuple:
    return tuple(_rational(t) for t in text.split(",") if t.strip())


def _needs_standard(name: str, inst: Instance) -> AuditReport | None:
    if inst.partite:
        return AuditReport(name, "", {}, {"reason": "needs a non-partite instance"}, VACUOUS)
    return None


# ---------------------------------------------------------------------------
# subcommands


def run_dim(inst: Instance, args) -> list[AuditReport]:
    cls = inst.cls
    domain = tuple(range(len(cls[0].table))) if len(cls) else ()
    nat = natarajan_dimension(FunctionFamily.from_rows(domain, [h.table for h in cls]))
    q = {"members": len(cls), "rank": cls.rank, "natarajan_on_grid": nat.value}
    if inst.partite:
        pv = vcn_k_partite(cls)
        q.update(partite_vcn_k=pv.value, partite_side=pv.side, partite_anchor=pv.anchor, points=pv.points)
        inputs = {"class": [h.table for h in cls]}
        return [AuditReport("dim", "dimensions of the partite class", inputs, q, CONSISTENT)]
    v = vcn_k(cls)
    q.update(vcn_k=v.value, anchor=v.anchor, points=v.points)
    if cls.rank <= 1:
        pv = vcn_k_partite(partize_class(cls))
        q["partite_vcn_k"] = pv.value
        verdict = VERIFIED if pv.value == v.value else VIOLATED
        witnesses = [] if verdict == VERIFIED else [{"vcn_k": v.value, "partite_vcn_k": pv.value}]
    else:
        verdict, witnesses = CONSISTENT, []
    return [
        AuditReport(
            "dim",
            "VCN_k(H) = partite VCN_k(H^kpart) for rank <= 1",
            {"class": [h.table for h in cls], "k": inst.universe.k},
            q,
            verdict,
            witnesses,
        )
    ]


def run_pack(inst: Instance, args) -> list[AuditReport]:
    out = []
    cls, loss = inst.cls, inst.loss
    metric = loss.flags.metric
    for name, mu in inst.measures.items():
        L = loss_matrix(cls, mu, loss)
        for eps in _epsilons(inst, args):
            greedy = greedy_centers(cls, mu, loss, eps, L)
            q = {
                "measure": name,
                "epsilon": eps,
                "greedy": len(greedy),
                "greedy_centers": [cls[j].name for j in greedy.centers],
                "packing_eps": packing_lower_bound(cls, mu, loss, eps, L),
                "packing_2eps": packing_lower_bound(cls, mu, loss, 2 * eps, L),
                "metric": metric,
            }
            witnesses = []
            if len(cls) <= DEFAULT_OPTIMAL_CAP:
                opt = optimal_centers(cls, mu, loss, eps, L)
                q["optimal"] = len(opt)
                q["optimal_centers"] = [cls[j].name for j in opt.centers]
                if len(opt) > len(greedy):
                    witnesses.append({"kind": "optimal_above_greedy"})
                if metric and not q["packing_2eps"] <= len(opt) <= q["packing_eps"]:
                    witnesses.append({"kind": "packing_sandwich", "optimal": len(opt)})
            else:
                q["optimal"] = None
            verdict = VIOLATED if witnesses else (VERIFIED if q["optimal"] is not None else CONSISTENT)
            out.append(
                AuditReport(
                    "pack",
                    "optimal <= greedy; for a metric loss pack(2 eps) <= optimal <= pack(eps)",
                    {"class": [h.table for h in cls], "loss": loss.describe()},
                    q,
                    verdict,
                    witnesses,
                )
            )
    return out


def run_pac_estimate(inst: Instance, args) -> list[AuditReport]:
    if (r := _needs_standard("pac-estimate", inst)) is not None:
        return [r]
    mode = args.mode or inst.settings.mode
    trials = args.trials if args.trials is not None else inst.settings.trials
    m_cap = args.m_cap if args.m_cap is not None else (inst.settings.m_cap if mode == "exact" else None)
    out = []
    for eps in _epsilons(inst, args):
        inputs = {"class": [h.table for h in inst.cls], "epsilon": eps, "delta": args.delta,
                  "mode": mode, "seed": args.seed, "trials": trials}
        try:
            est = estimate_m_pac(
                inst.cls, inst.loss, eps, args.delta, list(inst.measures.values()),
                trials=trials, seed=args.seed, mode=mode, m_cap=m_cap,
            )
        except (BudgetExhausted, NotRealizable) as exc:
            out.append(AuditReport("pac-estimate", "", inputs, {"reason": str(exc)}, VACUOUS))
            continue
        out.append(
            AuditReport(
                "pac-estimate",
                "smallest m whose ERM failure rate is at most delta",
                inputs,
                {
                    "m_hat": est.m_hat,
                    "observed_failure_rate": est.observed_failure_rate,
                    "confidence_note": est.confidence_note,
                    "curve": est.curve,
                },
                CONSISTENT,
            )
        )
    return out


def _epsilons(inst: Instance, args) -> tuple:
    return tuple(args.epsilon) if args.epsilon else inst.settings.epsilons


def _delta_grid(inst: Instance, args):
    return args.delta_grid or inst.settings.delta_grid or DEFAULT_DELTA_GRID


def audit_almostmetric(inst, args):
    return [check_almost_metric(mu, inst.loss, inst.cls) for mu in inst.measures.values()]


def audit_coverbound(inst, args):
    if not inst.cover_checks:
        return [AuditReport("coverbound", "", {}, {"reason": "no cover_checks in the instance"}, VACUOUS)]
    out = []
    for check in inst.cover_checks:
        try:
            out.append(cover_bound_check(check.sets, check.n, check.c))
        except NotACover as exc:
            out.append(
                AuditReport(
                    "coverbound",
                    "the sets must cover the cube for the bound to apply",
                    {"n": check.n, "c": check.c, "sets": check.sets},
                    {"reason": str(exc)},
                    VACUOUS,
                )
            )
    return out


def audit_pac(inst, args):
    if (r := _needs_standard("pac-to-hp", inst)) is not None:
        return [r]
    m_cap = args.m_cap if args.m_cap is not None else inst.settings.m_cap
    return [
        audit_pac_to_hp(inst.cls, inst.loss, eps, inst.measures, _delta_grid(inst, args), m_cap)
        for eps in _epsilons(inst, args)
    ]


def audit_hp(inst, args):
    out = []
    for eps in _epsilons(inst, args):
        if inst.partite:
            out.append(audit_hp_to_vcnk_partite(inst.cls, inst.loss, eps))
            continue
        out.append(audit_hp_to_vcnk(inst.cls, inst.loss, eps))
        out.append(
            audit_hp_to_vcnk_partite(
                partize_class(inst.cls), partize_loss(inst.loss, inst.universe), eps
            )
        )
    return out


def audit_basics(inst, args):
    if (r := _needs_standard("kpart-basics", inst)) is not None:
        return [r]
    m = inst.settings.kpart_m
    return [audit_kpart_basics(inst.universe, mu, inst.cls, m) for mu in inst.measures.values()]


def audit_kloss(inst, args):
    if (r := _needs_standard("kpart-loss", inst)) is not None:
        return [r]
    return [audit_kpart_loss(mu, inst.cls, inst.loss) for mu in inst.measures.values()]


def audit_transfer(inst, args):
    if (r := _needs_standard("hp-transfer", inst)) is not None:
        return [r]
    method = "optimal" if len(inst.cls) <= DEFAULT_OPTIMAL_CAP else "greedy"
    return [
        audit_hp_transfer(inst.cls, mu, inst.loss, eps, method)
        for mu in inst.measures.values()
        for eps in _epsilons(inst, args)
    ]


def audit_growth(inst, args):
    if (r := _needs_standard("gamma-growth", inst)) is not None:
        return [r]
    return [audit_gamma_growth(inst.cls)]


AUDIT_RUNNERS = {
    "almostmetric": audit_almostmetric,
    "coverbound": audit_coverbound,
    "pac-to-hp": audit_pac,
    "hp-to-vcnk": audit_hp,
    "kpart-basics": audit_basics,
    "kpart-loss": audit_kloss,
    "hp-transfer": audit_transfer,
    "gamma-growth": audit_growth,
}


def run_audit(inst: Instance, args) -> list[AuditReport]:
    names = AUDITS if args.audit == "all" else (args.audit,)
    out = []
    for name in names:
        out.extend(AUDIT_RUNNERS[name](inst, args))
    return out


def run_partize(inst: Instance, args) -> dict:
    if inst.partite:
        raise VcnkError("the instance is already partite")
    doc = dump_instance(
        partize_universe(inst.universe),
        partize_class(inst.cls),
        partize_loss(inst.loss, inst.universe),
        {name: partize_measure(mu) for name, mu in inst.measures.items()},
        inst.settings,
        inst.cover_checks,
    )
    return doc


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("spec", help="instance file (JSON)")
    p.add_argument("--out", help="write the output here instead of stdout")
    p.add_argument(
        "--explosion-cap", type=int, default=DEFAULT_EXPLOSION_CAP,
        help="largest enumeration allowed before giving up (default %(default)s)",
    )
    p.add_argument(
        "--epsilon", type=_rational, action="append",
        help="precision, repeatable; overrides settings.epsilons (default from the instance, else 1/4)",
    )
    p.add_argument("--seed", type=int, default=0, help="seed for Monte Carlo runs (default %(default)s)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per (measure, target) (default 200)")
    p.add_argument(
        "--delta-grid", type=_rational_list,
        help="comma-separated deltas searched by pac-to-hp (default 1/8,2/8,...,7/8)",
    )
    p.add_argument("--m-cap", type=int, help="largest sample size tried (default 6 exact, 64 Monte Carlo)")
    p.add_argument("--mode", choices=("exact", "montecarlo"), help="pac-estimate mode (default exact)")
    p.add_argument("--delta", type=_rational, default=Fraction(1, 4), help="pac-estimate failure probability (default 1/4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vcnk-lab", description="Exact audits for k-ary learning dimensions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("dim", help="Natarajan dimension, VCN_k and partite VCN_k"))
    _add_common(sub.add_parser("pack", help="greedy and optimal covers, packing bounds"))
    _add_common(sub.add_parser("pac-estimate", help="sample complexity of ERM"))
    au = sub.add_parser("audit", help="run one audit, or all of them")
    au.add_argument("audit", choices=AUDITS + ("all",))
    _add_common(au)
    _add_common(sub.add_parser("partize", help="emit the partized instance"))
    return parser


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with explosion_limit(args.explosion_cap):
            inst = parse_instance(args.spec)
            if args.command == "partize":
                _emit(json.dumps(render(run_partize(inst, args)), indent=2, sort_keys=True) + "\n", args.out)
                return EXIT_OK
            runner = {"dim": run_dim, "pack": run_pack, "pac-estimate": run_pac_estimate, "audit": run_audit}
            reports = runner[args.command](inst, args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ExplosionGuard as exc:
        print(f"explosion guard: {exc}", file=sys.stderr)
        return EXIT_EXPLOSION
    except (VcnkError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    doc = {
        "command": args.command if args.command != "audit" else f"audit {args.audit}",
        "instance": Path(args.spec).name,
        "reports": [r.to_dict() for r in reports],
    }
    _emit(json.dumps(render(doc), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_VIOLATED if any(r.verdict == VIOLATED for r in reports) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
