"""psworld command line.

Exit codes: 0 success or sufficient, 1 semantic findings, 2 usage or I/O.
Reports go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .activation import compute_active_set, explain_activation, simulate
from .boundary import rescope, verify_boundary_independence
from .diagnostics import (
    Diagnostic,
    ModelSyntaxError,
    NotRemovableError,
    PsworldError,
    Severity,
    UnknownIdError,
)
from .dsl import load_model, parse_declarations, serialize_model
from .model import DesiredOutcomeLink, WorldModel
from .outcomes import (
    classify_outcome,
    evaluate_outcome,
    find_minimal_sets,
    find_nonessential,
    reduce_model,
)
from .repl import Session, run
from .sufficiency import audit_sufficiency, impact_of_new_outcome
from .validate import validate_model

OK, FINDINGS, USAGE = 0, 1, 2


class _Exit(Exception):
    def __init__(self, code: int) -> None:
        self.code = code


def _ids(raw: str | None) -> list[str] | None:
    if raw is None:
        return None
    return [x.strip() for x in raw.replace("{", "").replace("}", "").split(",") if x.strip()]


def _err(*lines: str) -> None:
    for line in lines:
        print(line, file=sys.stderr)


def _out(args: argparse.Namespace, text: str, payload: object) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _load(path: str) -> WorldModel:
    try:
        return load_model(path)
    except OSError as exc:
        _err(f"error[io]: cannot read {path}: {exc.strerror or exc}")
        raise _Exit(USAGE)
    except ModelSyntaxError as exc:
        _err(*(d.render() for d in exc.diagnostics))
        raise _Exit(USAGE)


def _contexts(model: WorldModel, raw: str | None) -> list[str]:
    ids = _ids(raw)
    if ids is None:
        return [c.id for c in model.contexts]
    for c in ids:
        model.context(c)
    return ids


def _desired(model: WorldModel, raw: str | None) -> list[str]:
    ids = _ids(raw)
    if ids is None:
        return [d.outcome for d in model.desired]
    for o in ids:
        model.outcome(o)
    return ids


def _write_model(model: WorldModel, path: str | None) -> str:
    text = serialize_model(model)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    return text


# subcommands


def cmd_check(args: argparse.Namespace) -> int:
    try:
        model = load_model(args.path)
        diags = validate_model(model)
    except OSError as exc:
        _err(f"error[io]: cannot read {args.path}: {exc.strerror or exc}")
        return USAGE
    except ModelSyntaxError as exc:
        diags = list(exc.diagnostics)
    _err(*(d.render() for d in diags))
    failing = [d for d in diags if d.severity is Severity.ERROR or args.strict]
    n_err = sum(d.severity is Severity.ERROR for d in diags)
    summary = f"{args.path}: {n_err} error(s), {len(diags) - n_err} warning(s)"
    _out(args, summary, {"path": args.path, "ok": not failing, "diagnostics": [d.to_dict() for d in diags]})
    return FINDINGS if failing else OK


def cmd_audit(args: argparse.Namespace) -> int:
    model = _load(args.path)
    report = audit_sufficiency(model, _desired(model, args.desired), _contexts(model, args.contexts))
    _out(args, report.render(), report.to_dict())
    return OK if report.sufficient else FINDINGS


def cmd_impact(args: argparse.Namespace) -> int:
    model = _load(args.path)
    try:
        decls = parse_declarations(args.outcome, "<argument>")
    except ModelSyntaxError as exc:
        _err(*(d.render() for d in exc.diagnostics))
        return USAGE
    if len(decls.outcomes) != 1 or len(decls.desired) != 1:
        _err('error[usage]: give one outcome declaration with a "desired for" link')
        return USAGE
    new, link = decls.outcomes[0], decls.desired[0]
    rep = impact_of_new_outcome(model, new, link, _contexts(model, args.contexts))
    lines = [rep.after.render(), f"before: {rep.before.verdict}, after: {rep.after.verdict}"]
    lines += [f"  newly missing {c.construct} for {c.outcome} @ {c.context}: {c.detail}" for c in rep.delta]
    for construct, items in sorted(rep.actions.items()):
        lines.append(f"  to add ({construct}): {'; '.join(items)}")
    _out(args, "\n".join(lines), rep.to_dict())
    return OK if rep.after.sufficient else FINDINGS


def cmd_simulate(args: argparse.Namespace) -> int:
    model = _load(args.path)
    schedule = _ids(args.schedule) or [c.id for c in model.contexts]
    for c in schedule:
        model.context(c)
    trace = simulate(model, schedule)
    _err(*(d.render() for d in trace.diagnostics))
    lines = [
        f"[{s.context}] {s.entity}.{s.function}: {s.before} --{s.input} via {s.interaction}--> {s.after}"
        for s in trace.steps
    ]
    lines += [f"final {e}.{f} = {st}" for (e, f), st in sorted(trace.final_states.items())]
    payload = {
        "steps": [
            {
                "context": s.context,
                "entity": s.entity,
                "function": s.function,
                "before": s.before,
                "input": s.input,
                "after": s.after,
                "interaction": s.interaction,
            }
            for s in trace.steps
        ],
        "final_states": {f"{e}.{f}": st for (e, f), st in sorted(trace.final_states.items())},
        "active_sets": {a.context: a.ordered() for a in trace.active_sets},
    }
    _out(args, "\n".join(lines), payload)
    return OK


def cmd_outcomes(args: argparse.Namespace) -> int:
    model = _load(args.path)
    ctxs = _contexts(model, args.contexts)
    matrix: dict[str, dict[str, object]] = {}
    code = OK
    for o in model.outcomes:
        row: dict[str, object] = {}
        try:
            row["class"] = classify_outcome(model, o).value
            sets = {c: compute_active_set(model, c) for c in ctxs}
            for c in ctxs:
                row[c] = evaluate_outcome(model, o.id, c, active=sets[c]).truth
        except PsworldError as exc:
            _err(f"error[{exc.rule}]: {exc}")
            row = {"class": "n/a", **{c: None for c in ctxs}}
            code = FINDINGS
        matrix[o.id] = row
    width = max([len("outcome")] + [len(o) for o in matrix])
    cols = [max(len(c), 5) for c in ctxs]
    head = f"{'outcome':<{width}}  {'class':<8}  " + "  ".join(f"{c:<{w}}" for c, w in zip(ctxs, cols))
    lines = [head]
    for oid, row in matrix.items():
        cells = ["n/a" if row[c] is None else ("TRUE" if row[c] else "FALSE") for c in ctxs]
        lines.append(f"{oid:<{width}}  {row['class']:<8}  " + "  ".join(f"{v:<{w}}" for v, w in zip(cells, cols)))
    _out(args, "\n".join(line.rstrip() for line in lines), {"contexts": ctxs, "outcomes": matrix})
    return code


def cmd_eval(args: argparse.Namespace) -> int:
    model = _load(args.path)
    active = compute_active_set(model, args.context)
    v = evaluate_outcome(model, args.outcome, args.context, active=active)
    lines = [f"{v.outcome} @ {v.context} = {'TRUE' if v.truth else 'FALSE'} ({v.classification.value})"]
    payload: dict[str, object] = {
        "outcome": v.outcome,
        "context": v.context,
        "truth": v.truth,
        "classification": v.classification.value,
        "witness": sorted(v.witness) if v.witness is not None else None,
    }
    if v.witness is not None:
        lines.append(f"witness {{{', '.join(sorted(v.witness))}}}")
    if args.explain:
        derivs = [explain_activation(active, i) for i in sorted(v.witness or ())]
        for d in derivs:
            lines.extend(d.render())
        payload["derivations"] = [d.to_dict() for d in derivs]
    _out(args, "\n".join(lines), payload)
    return OK


def cmd_minimal_sets(args: argparse.Namespace) -> int:
    model = _load(args.path)
    ctxs = _contexts(model, args.contexts)
    oids = [args.outcome] if args.outcome else [d.outcome for d in model.desired]
    lines, payload = [], {}
    for oid in oids:
        rep = find_minimal_sets(model, oid, ctxs, heuristic=args.heuristic)
        sets = [sorted(m) for m in rep.minimal_sets]
        lines.append(f"{oid}: " + (" | ".join("{" + ", ".join(m) + "}" for m in sets) or "(none)"))
        if rep.flags:
            lines.append(f"  flags: {', '.join(rep.flags)}")
        payload[oid] = {
            "candidates": list(rep.candidates),
            "minimal_sets": sets,
            "essential": sorted(rep.essential),
            "nonessential": sorted(rep.nonessential),
            "flags": rep.flags,
            "certified": rep.certified,
        }
    _out(args, "\n".join(lines), payload)
    return OK


def cmd_reduce(args: argparse.Namespace) -> int:
    model = _load(args.path)
    desired = _desired(model, args.desired)
    ctxs = _contexts(model, args.contexts)
    removable = _ids(args.remove)
    if removable is None:
        removable = sorted(find_nonessential(model, desired, ctxs).removable)
    try:
        reduced = reduce_model(model, removable, desired, ctxs)
    except NotRemovableError as exc:
        _err(f"error[{exc.rule}]: {exc}")
        payload = {
            "removed": [],
            "error": str(exc),
            "counterexample": list(exc.counterexample) if exc.counterexample else None,
            "uncertified": sorted(exc.uncertified),
        }
        if args.format == "json":
            print(json.dumps(payload, indent=2, sort_keys=True))
        return FINDINGS
    text = _write_model(reduced, args.output)
    if args.format == "json":
        print(json.dumps({"removed": sorted(removable), "model": text}, indent=2, sort_keys=True))
    elif args.output:
        print(f"removed {{{', '.join(sorted(removable))}}}; wrote {args.output}")
    else:
        print(text, end="")
    return OK


def cmd_rescope(args: argparse.Namespace) -> int:
    model = _load(args.path)
    new, plan = rescope(model, _ids(args.internal) or [])
    text = _write_model(new, args.output)
    lines = [f"boundary internal {{{', '.join(sorted(plan.new_internal))}}}"]
    lines += [f"  {i}: {a.value} -> {b.value}" for i, (a, b) in sorted(plan.reclassification.items())]
    lines += [f"  {e}: kind {a.value} -> {b.value}" for e, (a, b) in sorted(plan.rekinded.items())]
    if not args.output:
        lines += ["", text.rstrip("\n")]
    payload = {
        "internal": sorted(plan.new_internal),
        "reclassification": {i: [a.value, b.value] for i, (a, b) in sorted(plan.reclassification.items())},
        "rekinded": {e: [a.value, b.value] for e, (a, b) in sorted(plan.rekinded.items())},
        "model": text,
    }
    _out(args, "\n".join(lines), payload)
    return OK


def cmd_verify_rescope(args: argparse.Namespace) -> int:
    before, after = _load(args.before), _load(args.after)
    outcomes = _ids(args.outcomes) or [o.id for o in before.outcomes]
    rep = verify_boundary_independence(before, after, outcomes, _contexts(before, args.contexts))
    lines = []
    for r in rep.rows:
        mark = "ok" if r.truth_equal else "DEFECT"
        flip = f", {r.class_before.value} -> {r.class_after.value}" if r.flipped else ""
        lines.append(f"{r.outcome} @ {r.context}: {r.truth_before} / {r.truth_after} {mark}{flip}")
    lines.append("truth preserved" if rep.ok else f"{len(rep.defects)} truth change(s)")
    payload = {
        "ok": rep.ok,
        "rows": [
            {
                "outcome": r.outcome,
                "context": r.context,
                "truth_before": r.truth_before,
                "truth_after": r.truth_after,
                "class_before": r.class_before.value,
                "class_after": r.class_after.value,
            }
            for r in rep.rows
        ],
    }
    _out(args, "\n".join(lines), payload)
    return OK if rep.ok else FINDINGS


def cmd_repl(args: argparse.Namespace) -> int:
    model = _load(args.path) if args.path else None
    session = Session(model, out=sys.stdout)
    if args.script:
        with open(args.script, encoding="utf-8") as fh:
            return run(session, fh, prompt=False)
    return run(session)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psworld", description="Problem-space world models: check, evaluate, audit.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name: str, func, help: str, path: bool = True) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help)
        if path:
            sp.add_argument("path", help="model file (.psw)")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.set_defaults(func=func)
        return sp

    sp = add("check", cmd_check, "validate a model")
    sp.add_argument("--strict", action="store_true", help="treat warnings as errors")

    sp = add("audit", cmd_audit, "sufficiency audit for desired outcomes")
    sp.add_argument("--desired", help="comma-separated outcome ids (default: all desired)")
    sp.add_argument("--contexts", help="comma-separated context ids (default: all)")

    sp = add("impact", cmd_impact, "audit delta from adding a desired outcome")
    sp.add_argument("--outcome", required=True, help='outcome declaration, e.g. \'outcome o desired for {g}\'')
    sp.add_argument("--contexts")

    sp = add("simulate", cmd_simulate, "run contexts in order and trace state changes")
    sp.add_argument("--schedule", help="comma-separated context ids (default: declaration order)")

    sp = add("outcomes", cmd_outcomes, "outcome x context truth matrix")
    sp.add_argument("--contexts")

    sp = add("eval", cmd_eval, "evaluate one outcome in one context")
    sp.add_argument("outcome")
    sp.add_argument("context")
    sp.add_argument("--explain", action="store_true", help="print activation derivations")

    sp = add("minimal-sets", cmd_minimal_sets, "minimal determining interaction sets")
    sp.add_argument("outcome", nargs="?")
    sp.add_argument("--contexts")
    sp.add_argument("--heuristic", action="store_true", help="greedy search, results not certified")

    sp = add("reduce", cmd_reduce, "remove certified non-essential interactions")
    sp.add_argument("--remove", help="comma-separated interaction ids (default: all certified)")
    sp.add_argument("--desired")
    sp.add_argument("--contexts")
    sp.add_argument("-o", "--output")

    sp = add("rescope", cmd_rescope, "declare a new system boundary")
    sp.add_argument("--internal", required=True, help="comma-separated entity ids")
    sp.add_argument("-o", "--output")

    sp = add("verify-rescope", cmd_verify_rescope, "compare outcome truth across two boundaries", path=False)
    sp.add_argument("before")
    sp.add_argument("after")
    sp.add_argument("--outcomes")
    sp.add_argument("--contexts")

    sp = add("repl", cmd_repl, "interactive session", path=False)
    sp.add_argument("path", nargs="?")
    sp.add_argument("--script", help="run commands from a file instead of stdin")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except _Exit as exc:
        return exc.code
    except UnknownIdError as exc:
        _err(f"error[{exc.rule}]: {exc}")
        return USAGE
    except PsworldError as exc:
        _err(f"error[{exc.rule}]: {exc}")
        return FINDINGS
    except OSError as exc:
        _err(f"error[io]: {exc}")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
