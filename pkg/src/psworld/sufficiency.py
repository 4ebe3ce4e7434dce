"""Sufficiency audit, change impact of new desired outcomes, goal satisfaction.

A representation is sufficient for a set of desired outcomes over a set of
contexts exactly when, for every (outcome, context) pair, four constructs
are present: a boundary, classified interactions, admissibility at every
receiving entity, and a grounding with system participation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .diagnostics import InsufficientModelError, PsworldError, UnknownIdError
from .model import (
    DesiredOutcomeLink,
    EntityKind,
    InteractionClass,
    OutcomeDecl,
    WorldModel,
    classify_interaction,
    has_receiving_domain,
)
from .outcomes import truth_table

CONSTRUCTS = ("boundary", "classification", "admissibility", "grounding")


@dataclass(frozen=True)
class Cell:
    outcome: str
    context: str
    construct: str
    present: bool
    detail: str = ""
    items: tuple[str, ...] = ()  # what to add to make the cell present

    @property
    def status(self) -> str:
        return "present" if self.present else "missing"

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.outcome, self.context, self.construct)

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "context": self.context,
            "construct": self.construct,
            "status": self.status,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class SufficiencyReport:
    verdict: str
    cells: tuple[Cell, ...]
    goal_support: Mapping[str, tuple[str, ...]]
    truth: Mapping[str, Mapping[str, bool]] | None = None
    flags: tuple[str, ...] = ()
    deltas: tuple[Cell, ...] = ()

    @property
    def sufficient(self) -> bool:
        return self.verdict == "sufficient"

    @property
    def missing(self) -> list[Cell]:
        return [c for c in self.cells if not c.present]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "flags": list(self.flags),
            "checklist": [c.to_dict() for c in self.cells],
            "goal_support": {g: list(v) for g, v in sorted(self.goal_support.items())},
            "truth": None if self.truth is None else {o: dict(sorted(t.items())) for o, t in sorted(self.truth.items())},
            "deltas": [c.to_dict() for c in self.deltas],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def render(self) -> str:
        lines = [f"verdict: {self.verdict}" + (f" ({', '.join(self.flags)})" if self.flags else "")]
        rows = {}
        for c in self.cells:
            rows.setdefault((c.outcome, c.context), {})[c.construct] = c
        if rows:
            width = max([len("outcome @ context")] + [len(f"{o} @ {c}") for o, c in rows])
            lines.append(f"{'outcome @ context':<{width}}  " + "  ".join(f"{k:<14}" for k in CONSTRUCTS))
            for (o, ctx), cells in rows.items():
                lines.append(
                    f"{o + ' @ ' + ctx:<{width}}  " + "  ".join(f"{cells[k].status:<14}" for k in CONSTRUCTS)
                )
        for c in self.missing:
            lines.append(f"  missing {c.construct} for {c.outcome} @ {c.context}: {c.detail}")
        if self.truth is not None:
            for o, row in self.truth.items():
                lines.append(f"  {o}: " + ", ".join(f"{c}={'TRUE' if v else 'FALSE'}" for c, v in row.items()))
        for g, outs in sorted(self.goal_support.items()):
            lines.append(f"  goal {g} supported by {{{', '.join(outs)}}}")
        return "\n".join(line.rstrip() for line in lines)


def _boundary_cell(model: WorldModel) -> tuple[bool, str, tuple[str, ...]]:
    b = model.boundary
    if b is None:
        return False, "no boundary declared", ("declare a boundary",)
    universe = model.entity_ids
    problems = []
    if b.internal & b.external:
        problems.append(f"{', '.join(sorted(b.internal & b.external))} on both sides")
    if universe - b.internal - b.external:
        problems.append(f"{', '.join(sorted(universe - b.internal - b.external))} on neither side")
    if (b.internal | b.external) - universe:
        problems.append(f"unknown {', '.join(sorted((b.internal | b.external) - universe))}")
    env_in = sorted(e.id for e in model.entities if e.kind is EntityKind.ENVIRONMENT and e.id in b.internal)
    if env_in:
        problems.append(f"environment {', '.join(env_in)} inside")
    if problems:
        return False, "boundary is not a partition: " + "; ".join(problems), ("repair the boundary",)
    return True, "", ()


def outcome_constructs(model: WorldModel, outcome: OutcomeDecl) -> dict[str, tuple[bool, str, tuple[str, ...]]]:
    """Status of constructs (2)-(4) for one outcome; context independent."""
    imap, emap = model.interaction_map, model.entity_map
    known = sorted(i for i in outcome.interactions if i in imap)
    missing_ix = sorted(outcome.interactions - imap.keys())
    unresolved = sorted(i for i in known if imap[i].source not in emap or imap[i].dest not in emap)
    out: dict[str, tuple[bool, str, tuple[str, ...]]] = {}

    if missing_ix or unresolved:
        detail = []
        if missing_ix:
            detail.append(f"interaction(s) not in the model: {', '.join(missing_ix)}")
        if unresolved:
            detail.append(f"unresolved endpoints: {', '.join(unresolved)}")
        out["classification"] = (False, "; ".join(detail), tuple(missing_ix + unresolved))
    else:
        out["classification"] = (True, "", ())

    resolvable = [i for i in known if i not in unresolved]
    bad = [i for i in resolvable if not has_receiving_domain(model, imap[i])]
    if bad:
        out["admissibility"] = (
            False,
            "no receiving function admits: " + ", ".join(f"{i} ({imap[i].flow} at {imap[i].dest})" for i in bad),
            tuple(bad),
        )
    else:
        out["admissibility"] = (True, "", ())

    b = model.effective_boundary
    problems = []
    if not outcome.groundings:
        problems.append("no grounding declared")
    for alt in outcome.groundings:
        if not alt:
            problems.append("empty grounding alternative")
            continue
        classes = {}
        for i in alt:
            if i in resolvable:
                try:
                    classes[i] = classify_interaction(imap[i], b)
                except PsworldError:
                    pass
        ext = sorted(i for i, c in classes.items() if c is InteractionClass.EXTERNAL)
        if ext:
            problems.append(f"grounds on external interaction(s) {', '.join(ext)}")
        elif len(classes) == len(alt) and not any(imap[i].source in b.internal or imap[i].dest in b.internal for i in alt):
            problems.append(f"no system participation in {{{', '.join(sorted(alt))}}}")
    if problems:
        out["grounding"] = (False, "; ".join(problems), (f"declare a grounding for {outcome.id}",))
    else:
        out["grounding"] = (True, "", ())
    return out


def audit_sufficiency(model: WorldModel, desired: Iterable[str], contexts: Iterable[str]) -> SufficiencyReport:
    desired = list(dict.fromkeys(desired))
    ctxs = list(dict.fromkeys(contexts))
    for oid in desired:
        model.outcome(oid)
    for c in ctxs:
        model.context(c)
    flags = []
    if not desired:
        flags.append("vacuous")
    boundary = _boundary_cell(model)
    cells: list[Cell] = []
    for oid in desired:
        per = outcome_constructs(model, model.outcome_map[oid])
        per["boundary"] = boundary
        for c in ctxs:
            for k in CONSTRUCTS:
                present, detail, items = per[k]
                cells.append(Cell(oid, c, k, present, detail, items))
    sufficient = all(c.present for c in cells)
    support: dict[str, tuple[str, ...]] = {}
    links = model.desired_map
    for g in model.goal_map:
        support[g] = tuple(o for o in desired if o in links and g in links[o].supports)
    truth = truth_table(model, desired, ctxs) if sufficient else None
    return SufficiencyReport(
        "sufficient" if sufficient else "insufficient",
        tuple(cells),
        support,
        truth,
        tuple(flags),
    )


@dataclass(frozen=True)
class ImpactReport:
    before: SufficiencyReport
    after: SufficiencyReport
    delta: tuple[Cell, ...]
    actions: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = self.after.to_dict()
        d["deltas"] = [c.to_dict() for c in self.delta]
        d["actions"] = {k: list(v) for k, v in sorted(self.actions.items())}
        d["verdict_before"] = self.before.verdict
        return d


def impact_of_new_outcome(
    model: WorldModel,
    new_outcome: OutcomeDecl,
    link: DesiredOutcomeLink,
    contexts: Sequence[str],
) -> ImpactReport:
    """Which checklist cells a new desired outcome breaks, and what to add."""
    if new_outcome.id in model.outcome_map:
        raise PsworldError(f"outcome {new_outcome.id} already exists", rule="duplicate-id")
    base = [d.outcome for d in model.desired]
    before = audit_sufficiency(model, base, contexts)
    extended = replace(model, outcomes=model.outcomes + (new_outcome,), desired=model.desired + (link,))
    after = audit_sufficiency(extended, base + [new_outcome.id], contexts)
    was_missing = {c.key for c in before.missing}
    delta = tuple(c for c in after.missing if c.key not in was_missing)
    actions: dict[str, list[str]] = {}
    for c in delta:
        for item in c.items:
            if item not in actions.setdefault(c.construct, []):
                actions[c.construct].append(item)
    return ImpactReport(before, replace(after, deltas=delta), delta, {k: tuple(v) for k, v in actions.items()})


@dataclass(frozen=True)
class GoalStatus:
    goal: str
    satisfied: bool
    failing: tuple[tuple[str, str], ...] = ()
    flags: tuple[str, ...] = ()


def check_goal_satisfaction(model: WorldModel, contexts: Sequence[str]) -> dict[str, GoalStatus]:
    """A goal holds when every desired outcome linked to it is TRUE in every context."""
    desired = [d.outcome for d in model.desired]
    report = audit_sufficiency(model, desired, contexts)
    if not report.sufficient:
        raise InsufficientModelError(
            "goal satisfaction is undefined for an insufficient model: "
            + "; ".join(f"{c.construct} missing for {c.outcome} @ {c.context}" for c in report.missing[:5])
        )
    truth = report.truth or {}
    out: dict[str, GoalStatus] = {}
    for g in model.goal_map:
        linked = report.goal_support.get(g, ())
        if not linked:
            out[g] = GoalStatus(g, False, (), ("unsupported-goal",))
            continue
        failing = tuple((o, c) for o in linked for c in contexts if not truth[o][c])
        out[g] = GoalStatus(g, not failing, failing)
    return out


def goal_ids(model: WorldModel, goals: Iterable[str]) -> None:
    for g in goals:
        if g not in model.goal_map:
            raise UnknownIdError("goal", g)
