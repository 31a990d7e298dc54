"""Command-line front end over `.dl` files.

Every verb reads one combined program file (queries, dependencies, facts
may share a file; `--deps`/`--db` point elsewhere when split).  Exit code
0 reports a completed analysis regardless of the logical answer; with
`--exit-status` the answer maps to 0 (yes), 1 (no), or 2 (unknown).
Input and usage problems exit 64, internal errors 70.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import __version__
from .acyclicity import is_acyclic
from .chase import ChasePolicy, chase, chase_query
from .classify import classify, sticky_marking
from .containment import TriState, contains_chase, contains_rewrite, core, ucq_rewrite
from .decider import (
    SemAcOptions,
    acyclic_approximations,
    connect,
    decide_semacyc,
    decide_semacyc_ucq,
    size_bound,
)
from .errors import CqkitError
from .evaluate import eval_auto, eval_naive, eval_yannakakis, semac_eval
from .model import CQ, Const, DependencySet, Instance, Null, term_text
from .parser import parse_program, serialize

USAGE_ERROR = 64
INTERNAL_ERROR = 70
_STATUS = {"yes": 0, "true": 0, "no": 1, "false": 1, "unknown": 2}


class _Report:
    def __init__(self):
        self.answer: Optional[str] = None
        self.witness = None
        self.certificate = None
        self.diagnostics: dict = {}
        self.lines: list = []

    def say(self, line: str):
        self.lines.append(line)

    def emit(self, as_json: bool, exit_status: bool) -> int:
        if as_json:
            print(
                json.dumps(
                    {
                        "answer": self.answer,
                        "witness": self.witness,
                        "certificate": self.certificate,
                        "diagnostics": self.diagnostics,
                    },
                    indent=2,
                    sort_keys=True,
                )
            )
        else:
            for line in self.lines:
                print(line)
        if exit_status and self.answer in _STATUS:
            return _STATUS[self.answer]
        return 0


def _load(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_program(fh.read())


def _pick_query(program, name: Optional[str], single_cq=True):
    ucq = program.query(name)
    if single_cq and len(ucq.disjuncts) == 1:
        return ucq.disjuncts[0]
    return ucq


def _deps_from(args, program) -> DependencySet:
    if getattr(args, "deps", None):
        return _load(args.deps).dependencies
    return program.dependencies


def _policy_from(args) -> ChasePolicy:
    return ChasePolicy(
        variant=getattr(args, "variant", "restricted"),
        max_steps=getattr(args, "max_steps", None),
        max_depth=getattr(args, "max_depth", None),
    )


def _semac_options(args) -> SemAcOptions:
    policy = None
    if getattr(args, "max_steps", None) or getattr(args, "max_depth", None):
        policy = _policy_from(args)
    return SemAcOptions(
        bound=getattr(args, "bound", None),
        exact_bound=getattr(args, "exact_bound", False),
        force_bound=getattr(args, "force_bound", False),
        policy=policy,
    )


def _tri(report: _Report, verdict: TriState):
    report.answer = verdict.value
    if verdict.reason:
        report.diagnostics["reason"] = verdict.reason


# ---------------------------------------------------------------------------
# Verbs


def _cmd_classify(args) -> _Report:
    program = _load(args.file)
    deps = program.dependencies
    labels = classify(deps)
    report = _Report()
    report.answer = "yes"
    report.diagnostics["flags"] = list(labels.flag_names())
    report.diagnostics["tgds"] = len(deps.tgds)
    report.diagnostics["egds"] = len(deps.egds)
    for flag in labels.flag_names():
        report.say(flag)
    if args.verbose and deps.tgds:
        marking = sticky_marking(deps.tgds)
        report.diagnostics["marking_rounds"] = marking.rounds
        report.say(f"marking rounds: {marking.rounds}")
        table = []
        for idx, var, positions in marking.marked:
            where = ", ".join(f"{p}[{i + 1}]" for p, i in positions)
            table.append({"tgd": idx, "variable": var, "positions": where})
            report.say(f"marked: tgd {idx} variable {var} at {where}")
        report.diagnostics["marking"] = table
    return report


def _cmd_acyclic(args) -> _Report:
    program = _load(args.file)
    report = _Report()
    target = program.facts if args.facts else _pick_query(program, args.query)
    if not isinstance(target, (CQ, Instance)):
        raise CqkitError("acyclicity applies to a single query rule or to facts")
    tree = is_acyclic(target)
    report.answer = "yes" if tree is not None else "no"
    if tree is not None:
        report.witness = tree.to_outline()
        report.say("acyclic")
        report.say(tree.to_outline())
    else:
        report.say("cyclic")
    return report


def _cmd_core(args) -> _Report:
    program = _load(args.file)
    q = _pick_query(program, args.query)
    if not isinstance(q, CQ):
        raise CqkitError("core applies to a single query rule")
    c = core(q)
    report = _Report()
    report.answer = "yes"
    report.witness = serialize(c)
    report.diagnostics["atoms_before"] = len(q)
    report.diagnostics["atoms_after"] = len(c)
    report.say(serialize(c))
    return report


def _cmd_chase(args) -> _Report:
    program = _load(args.file)
    deps = _deps_from(args, program)
    policy = _policy_from(args)
    report = _Report()
    if args.facts:
        result = chase(program.facts, deps, policy)
        final = ()
    else:
        q = _pick_query(program, args.query)
        if not isinstance(q, CQ):
            raise CqkitError("chase applies to a single query rule or to facts")
        result, final = chase_query(q, deps, policy)
    report.answer = result.status
    report.witness = serialize(result.instance)
    report.diagnostics["atoms"] = len(result.instance)
    report.diagnostics["steps"] = len(result.trigger_log)
    if final:
        report.diagnostics["free_tuple"] = [term_text(t) for t in final]
    report.say(f"% status: {result.status}")
    report.say(serialize(result.instance))
    return report


def _cmd_contain(args) -> _Report:
    program = _load(args.file)
    deps = _deps_from(args, program)
    left = _pick_query(program, args.left)
    right = _pick_query(program, args.right)
    if not isinstance(left, CQ) or not isinstance(right, CQ):
        raise CqkitError("containment applies to single query rules")
    report = _Report()
    if args.engine == "rewrite":
        verdict = contains_rewrite(left, right, deps)
    elif args.engine == "chase":
        verdict = contains_chase(left, right, deps, _policy_from(args))
    else:
        labels = deps.labels
        if deps.is_pure_tgds() and (labels.sticky and not labels.terminating_chase):
            verdict = contains_rewrite(left, right, deps)
        else:
            verdict = contains_chase(left, right, deps, _policy_from(args))
    _tri(report, verdict)
    report.say(f"{args.left} contained in {args.right}: {verdict.value}")
    return report


def _cmd_rewrite(args) -> _Report:
    program = _load(args.file)
    deps = _deps_from(args, program)
    q = program.query(args.query)
    rewrite = ucq_rewrite(q if len(q.disjuncts) > 1 else q.disjuncts[0], deps,
                          bound=args.bound)
    report = _Report()
    report.answer = "yes" if rewrite.saturated else "unknown"
    rendered = [serialize(d) for d in rewrite.disjuncts]
    report.witness = "\n".join(rendered)
    report.diagnostics["disjuncts"] = len(rewrite.disjuncts)
    report.diagnostics["height"] = rewrite.height
    report.diagnostics["saturated"] = rewrite.saturated
    for line in rendered:
        report.say(line)
    report.say(f"% disjuncts: {len(rewrite.disjuncts)}, height: {rewrite.height}, "
               f"saturated: {rewrite.saturated}")
    return report


def _cmd_semacyc(args) -> _Report:
    program = _load(args.file)
    deps = _deps_from(args, program)
    q = _pick_query(program, args.query)
    options = _semac_options(args)
    if isinstance(q, CQ):
        answer = decide_semacyc(q, deps, options)
    else:
        answer = decide_semacyc_ucq(q, deps, options)
    report = _Report()
    report.answer = answer.kind
    if answer.witness is not None:
        report.witness = serialize(answer.witness)
    report.certificate = answer.certificate
    if answer.bound:
        report.diagnostics["bound"] = {
            "class": answer.bound.class_used,
            "B": answer.bound.B,
            "predicates": answer.bound.p_q_sigma,
            "max_arity": answer.bound.a_q_sigma,
            "max_body": answer.bound.b_sigma,
        }
    if answer.searched_up_to is not None:
        report.diagnostics["searched_up_to"] = answer.searched_up_to
    if answer.reason:
        report.diagnostics["reason"] = answer.reason
    report.say(f"semantically acyclic: {answer.kind}")
    if answer.witness is not None:
        report.say(serialize(answer.witness))
    return report


def _cmd_approx(args) -> _Report:
    program = _load(args.file)
    deps = _deps_from(args, program)
    q = _pick_query(program, args.query)
    if not isinstance(q, CQ):
        raise CqkitError("approximation applies to a single query rule")
    approximations = acyclic_approximations(q, deps, _semac_options(args))
    report = _Report()
    report.answer = "yes" if approximations else "no"
    rendered = [serialize(a) for a in approximations]
    report.witness = "\n".join(rendered)
    report.diagnostics["count"] = len(approximations)
    for line in rendered:
        report.say(line)
    return report


def _cmd_connect(args) -> _Report:
    program = _load(args.file)
    deps = _deps_from(args, program)
    left = _pick_query(program, args.left)
    right = _pick_query(program, args.right)
    if not isinstance(left, CQ) or not isinstance(right, CQ):
        raise CqkitError("the connecting operator applies to single query rules")
    cq1, cq2, cdeps = connect(left, right, deps)
    report = _Report()
    report.answer = "yes"
    parts = [serialize(cq1), serialize(cq2), serialize(cdeps)]
    report.witness = "\n".join(p for p in parts if p)
    for p in parts:
        if p:
            report.say(p)
    return report


def _parse_tuple(text: str, db: Instance) -> tuple:
    names = [t.strip() for t in text.split(",") if t.strip()]
    out = []
    for n in names:
        if n.startswith("_n") and n[2:].isdigit():
            out.append(Null(int(n[2:])))
        else:
            out.append(Const(n))
    return tuple(out)


def _cmd_eval(args) -> _Report:
    program = _load(args.file)
    q = _pick_query(program, args.query)
    if not isinstance(q, CQ):
        raise CqkitError("evaluation applies to a single query rule")
    db = _load(args.db).facts if args.db else program.facts
    deps = _deps_from(args, program)
    report = _Report()
    wanted = _parse_tuple(args.tuple, db) if args.tuple else None

    def game_membership(t):
        return semac_eval(q, deps, db, t, _semac_options(args))

    if args.algo == "game" or (args.algo == "auto" and len(deps) and wanted is not None):
        if wanted is None:
            domain = sorted({t for a in db.atoms for t in a.args},
                            key=lambda t: term_text(t))
            from itertools import product as _product

            answers = {
                t for t in _product(domain, repeat=len(q.free_vars))
                if game_membership(t)
            }
        else:
            answers = {wanted} if game_membership(wanted) else set()
    elif args.algo == "yannakakis":
        tree = is_acyclic(q)
        if tree is None:
            raise CqkitError("the query is cyclic; yannakakis needs a join tree")
        answers = eval_yannakakis(q, tree, db)
    elif args.algo == "naive":
        answers = eval_naive(q, db)
    else:
        answers = eval_auto(q, db)

    if wanted is not None:
        member = wanted in answers
        report.answer = "yes" if member else "no"
        report.say(f"({args.tuple}) in {q.name}: {report.answer}")
    else:
        report.answer = "yes" if answers else "no"
        rows = sorted(
            "(" + ",".join(term_text(t) for t in row) + ")" for row in answers
        )
        report.diagnostics["count"] = len(answers)
        report.witness = "\n".join(rows)
        for r in rows:
            report.say(r)
        report.say(f"% {len(answers)} answers")
    return report


# ---------------------------------------------------------------------------
# Argument wiring


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="cqkit",
        description="Analyze conjunctive queries under tgds and egds.",
    )
    top.add_argument("--version", action="version", version=f"cqkit {__version__}")
    sub = top.add_subparsers(dest="verb", required=True)

    def common(p, query=False, deps=False, exit_status=True):
        p.add_argument("file", help="a .dl program file")
        if query:
            p.add_argument("--query", help="query name (default: the only one)")
        if deps:
            p.add_argument("--deps", help="read dependencies from this file instead")
        p.add_argument("--json", action="store_true", help="emit one JSON object")
        if exit_status:
            p.add_argument(
                "--exit-status",
                action="store_true",
                help="exit 0/1/2 for yes/no/unknown",
            )

    p = sub.add_parser("classify", help="print dependency class flags")
    common(p)
    p.add_argument("--verbose", action="store_true", help="include the marking table")
    p.set_defaults(run=_cmd_classify)

    p = sub.add_parser("acyclic", help="test a query or database for acyclicity")
    common(p, query=True)
    p.add_argument("--facts", action="store_true", help="judge the file's facts")
    p.set_defaults(run=_cmd_acyclic)

    p = sub.add_parser("core", help="minimize a query to its core")
    common(p, query=True)
    p.set_defaults(run=_cmd_core)

    p = sub.add_parser("chase", help="chase a query or database")
    common(p, query=True, deps=True)
    p.add_argument("--facts", action="store_true", help="chase the file's facts")
    p.add_argument("--variant", choices=("restricted", "oblivious"),
                   default="restricted")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--max-depth", type=int, default=None)
    p.set_defaults(run=_cmd_chase)

    p = sub.add_parser("contain", help="decide query containment")
    common(p, deps=True)
    p.add_argument("--left", required=True, help="the contained query")
    p.add_argument("--right", required=True, help="the containing query")
    p.add_argument("--engine", choices=("chase", "rewrite", "auto"), default="auto")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--max-depth", type=int, default=None)
    p.set_defaults(run=_cmd_contain)

    p = sub.add_parser("rewrite", help="saturate a query backward into a union")
    common(p, query=True, deps=True)
    p.add_argument("--bound", type=int, default=None, help="cap disjunct size")
    p.set_defaults(run=_cmd_rewrite)

    p = sub.add_parser("semacyc", help="decide semantic acyclicity")
    common(p, query=True, deps=True)
    p.add_argument("--bound", type=int, default=None, help="practical size cap")
    p.add_argument("--exact-bound", action="store_true",
                   help="search all the way to the class bound")
    p.add_argument("--force-bound", action="store_true",
                   help="best-effort search on an undecidable class")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--max-depth", type=int, default=None)
    p.set_defaults(run=_cmd_semacyc)

    p = sub.add_parser("approx", help="compute acyclic approximations")
    common(p, query=True, deps=True)
    p.add_argument("--bound", type=int, default=None, help="practical size cap")
    p.add_argument("--exact-bound", action="store_true")
    p.set_defaults(run=_cmd_approx)

    p = sub.add_parser("connect", help="apply the connecting operator")
    common(p, deps=True, exit_status=False)
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.set_defaults(run=_cmd_connect)

    p = sub.add_parser("eval", help="evaluate a query over a database")
    common(p, query=True, deps=True)
    p.add_argument("--db", help="read facts from this file instead")
    p.add_argument("--algo", choices=("naive", "yannakakis", "game", "auto"),
                   default="auto")
    p.add_argument("--tuple", help="comma-separated answer tuple to test")
    p.add_argument("--bound", type=int, default=None)
    p.set_defaults(run=_cmd_eval)

    return top


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; renumber per our contract
        if exc.code not in (0, None):
            return USAGE_ERROR
        return 0
    try:
        report = args.run(args)
        return report.emit(args.json, getattr(args, "exit_status", False))
    except (CqkitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
