"""Well-formedness checks for a world model.

Every problem is reported as a diagnostic; an empty report means the model
is well-formed.  Each diagnostic names the definition it enforces.
"""

from __future__ import annotations

from .diagnostics import Diagnostic, Severity
from .model import (
    EntityKind,
    InteractionClass,
    WorldModel,
    classify_interaction,
    resolve_receiver,
)


class _Report:
    def __init__(self, model: WorldModel) -> None:
        self.model = model
        self.items: list[Diagnostic] = []

    def add(self, rule, message, ns, ident, paper_rule, severity=Severity.ERROR):
        self.items.append(
            Diagnostic(
                severity=severity,
                rule=rule,
                message=message,
                span=self.model.span(ns, ident),
                paper_rule=paper_rule,
                location=f"{ns} {ident}",
            )
        )

    def warn(self, rule, message, ns, ident, paper_rule):
        self.add(rule, message, ns, ident, paper_rule, Severity.WARN)


def validate_model(model: WorldModel) -> list[Diagnostic]:
    r = _Report(model)
    if not model.entities:
        r.add("no-entities", "model declares no entities", "model", "-", "Axiom1")
        return r.items
    _check_entities(model, r)
    _check_interactions(model, r)
    _check_boundary(model, r)
    _check_flows(model, r)
    _check_contexts(model, r)
    _check_outcomes(model, r)
    _check_goals(model, r)
    _check_requirements(model, r)
    _check_open_system(model, r)
    return r.items


def _check_entities(model: WorldModel, r: _Report) -> None:
    imap = model.interaction_map
    for e in model.entities:
        if e.kind is EntityKind.INTERNAL and not e.functions:
            r.add("no-function", f"internal entity {e.id} performs no function", "entity", e.id, "Def16")
        if e.kind is EntityKind.ENVIRONMENT and e.functions:
            r.add("env-has-function", f"environment entity {e.id} declares functions", "entity", e.id, "Def6")
        if e.relay and e.kind is not EntityKind.EXTERNAL:
            r.add("relay-not-external", f"relay behavior on non-external entity {e.id}", "entity", e.id, "Def5")
        if e.emits and e.kind is not EntityKind.ENVIRONMENT:
            r.add("emits-not-env", f"emits declared on non-environment entity {e.id}", "entity", e.id, "Def6")
        for f in e.functions:
            where = f"{e.id}.{f.name}"
            if not f.domain:
                r.add("empty-domain", f"function {where} has an empty domain", "entity", e.id, "Def16")
            if not f.codomain:
                r.add("empty-codomain", f"function {where} has an empty codomain", "entity", e.id, "Def16")
            for src, outs in f.output_map.items():
                if src not in f.domain:
                    r.add("map-outside-domain", f"{where} maps {src}, which is not in its domain", "entity", e.id, "Def16")
                for o in sorted(outs - f.codomain):
                    r.add("map-outside-codomain", f"{where} produces {o}, which is not in its codomain", "entity", e.id, "Def16")
            sm = f.states
            if sm is not None:
                states = set(sm.states)
                if not states:
                    r.add("empty-states", f"{where} declares no states", "entity", e.id, "Def7")
                if sm.initial not in states:
                    r.add("transition-out-of-states", f"{where}: initial state {sm.initial} not declared", "entity", e.id, "Def7")
                for (s, flow), t in sm.transitions.items():
                    if s not in states or t not in states:
                        r.add("transition-out-of-states", f"{where}: transition {s},{flow} -> {t} leaves the state space", "entity", e.id, "Def8")
                    if flow not in f.domain:
                        r.add("transition-inadmissible", f"{where}: transition on {flow}, which is not in the domain", "entity", e.id, "Def8")
        for rule in e.relay:
            ix = imap.get(rule.interaction)
            if ix is None:
                r.add("unresolved-reference", f"relay of {e.id} names unknown interaction {rule.interaction}", "entity", e.id, "Axiom1")
            elif ix.source != e.id or ix.flow != rule.emitted:
                r.add("relay-mismatch", f"relay of {e.id} emits {rule.emitted} on {ix.id}, which carries {ix.flow} from {ix.source}", "entity", e.id, "Def5")
        for flow, iid in e.emits:
            ix = imap.get(iid)
            if ix is None:
                r.add("unresolved-reference", f"emits of {e.id} names unknown interaction {iid}", "entity", e.id, "Axiom1")
            elif ix.source != e.id or ix.flow != flow:
                r.add("emission-mismatch", f"{e.id} emits {flow} on {iid}, which carries {ix.flow} from {ix.source}", "entity", e.id, "Def6")


def _check_interactions(model: WorldModel, r: _Report) -> None:
    emap = model.entity_map
    for ix in model.interactions:
        missing = [x for x in (ix.source, ix.dest) if x not in emap]
        for m in missing:
            r.add("unresolved-reference", f"interaction {ix.id} references unknown entity {m}", "interaction", ix.id, "Axiom1")
        if missing:
            continue
        if ix.source == ix.dest and not model.allow_self_loops:
            r.add("self-loop", f"interaction {ix.id} is a self-loop", "interaction", ix.id, "Def3")
        rec = resolve_receiver(model, ix)
        if rec.status == "unknown-function":
            r.add("unresolved-reference", f"interaction {ix.id} names unknown function {ix.dest_function} on {ix.dest}", "interaction", ix.id, "Axiom1")
        elif rec.status == "ambiguous":
            r.add("ambiguous-receiver", f"interaction {ix.id}: {ix.flow} is accepted by several functions of {ix.dest} ({', '.join(rec.candidates)})", "interaction", ix.id, "Def2")
        elif rec.status == "no-candidate" or (rec.status == "resolved" and ix.flow not in rec.function.domain):
            r.add("inadmissible-flow", f"interaction {ix.id}: {ix.flow} is not in the domain of the receiving function of {ix.dest}", "interaction", ix.id, "Def3")


def _check_boundary(model: WorldModel, r: _Report) -> None:
    b = model.boundary
    if b is None:
        r.add("missing-boundary", "no boundary declared", "model", "boundary", "Def9")
        return
    universe = model.entity_ids
    for eid in sorted((b.internal | b.external) - universe):
        r.add("unresolved-reference", f"boundary names unknown entity {eid}", "boundary", "boundary", "Axiom1")
    for eid in sorted(b.internal & b.external):
        r.add("boundary-not-partition", f"entity {eid} is both internal and external", "entity", eid, "Def9")
    for eid in sorted(universe - b.internal - b.external):
        r.add("boundary-not-partition", f"entity {eid} is on neither side of the boundary", "entity", eid, "Def9")
    for e in model.entities:
        if e.id not in b.internal:
            continue
        if e.kind is EntityKind.ENVIRONMENT:
            r.add("env-internal", f"environment entity {e.id} is inside the boundary", "entity", e.id, "Def6")
        elif e.kind is EntityKind.EXTERNAL:
            r.add("kind-boundary-mismatch", f"external system {e.id} is inside the boundary", "entity", e.id, "Def9.a")
    for e in model.entities:
        if e.kind is EntityKind.INTERNAL and e.id not in b.internal and e.id in universe:
            r.add("kind-boundary-mismatch", f"internal function {e.id} is outside the boundary", "entity", e.id, "Def9.a")


def _classes(model: WorldModel) -> dict[str, InteractionClass]:
    b = model.effective_boundary
    out = {}
    for ix in model.interactions:
        try:
            out[ix.id] = classify_interaction(ix, b)
        except Exception:
            pass
    return out


def _check_flows(model: WorldModel, r: _Report) -> None:
    accepted = {flow for e in model.entities for f in e.functions for flow in f.domain}
    seen: set[str] = set()
    for ix in model.interactions:
        if ix.flow not in accepted and ix.flow not in seen:
            seen.add(ix.flow)
            r.add("unaccepted-flow", f"flow {ix.flow} is carried but no function accepts it", "interaction", ix.id, "Def1")
    # flows that may travel on an interaction the boundary calls external
    classes = _classes(model)
    emap = model.entity_map
    for ix in model.interactions:
        if classes.get(ix.id) is not InteractionClass.EXTERNAL:
            continue
        src = emap.get(ix.source)
        if src is None or src.kind is EntityKind.ENVIRONMENT:
            continue
        produced = {o for f in src.functions for outs in f.output_map.values() for o in outs}
        relayed = {rule.interaction for rule in src.relay}
        if ix.flow in produced or ix.id in relayed:
            r.warn("external-activation", f"external interaction {ix.id} can carry {ix.flow} produced by {src.id}", "interaction", ix.id, "Def11")


def _check_contexts(model: WorldModel, r: _Report) -> None:
    imap, emap = model.interaction_map, model.entity_map
    internal = model.effective_boundary.internal
    for c in model.contexts:
        for em in c.emissions:
            ent = emap.get(em.entity)
            ix = imap.get(em.via)
            if ent is None or ix is None:
                r.add("unresolved-reference", f"context {c.id} emission references unknown {'entity ' + em.entity if ent is None else 'interaction ' + em.via}", "context", c.id, "Axiom1")
                continue
            if ent.kind is not EntityKind.ENVIRONMENT:
                r.add("emission-not-env", f"context {c.id}: {em.entity} is not an environment entity", "context", c.id, "Def11")
            if ix.source != em.entity or ix.flow != em.flow:
                r.add("emission-mismatch", f"context {c.id}: {em.via} carries {ix.flow} from {ix.source}, not {em.flow} from {em.entity}", "context", c.id, "Def6")
            elif ix.dest not in internal:
                r.warn("emission-not-inbound", f"context {c.id}: {em.via} does not enter the system boundary", "context", c.id, "Def6")


def _check_outcomes(model: WorldModel, r: _Report) -> None:
    imap = model.interaction_map
    classes = _classes(model)
    internal = model.effective_boundary.internal
    for o in model.outcomes:
        if not o.groundings:
            r.add("missing-grounding", f"outcome {o.id} declares no grounding", "outcome", o.id, "Def12")
        for alt in o.groundings:
            if not alt:
                r.add("empty-grounding", f"outcome {o.id} has an empty grounding alternative", "outcome", o.id, "Def12")
                continue
            unknown = sorted(alt - imap.keys())
            for iid in unknown:
                r.add("unresolved-reference", f"outcome {o.id} grounds on unknown interaction {iid}", "outcome", o.id, "Axiom1")
            ext = sorted(i for i in alt if classes.get(i) is InteractionClass.EXTERNAL)
            if ext:
                r.add("ungrounded-outcome", f"outcome {o.id} grounds on external interaction(s) {', '.join(ext)}", "outcome", o.id, "Def12")
            elif not unknown and not any(imap[i].source in internal or imap[i].dest in internal for i in alt):
                r.add("ungrounded-outcome", f"outcome {o.id} has a grounding without system participation", "outcome", o.id, "Def12")
    for link in model.desired:
        if link.outcome not in model.outcome_map:
            r.add("unresolved-reference", f"desired link names unknown outcome {link.outcome}", "outcome", link.outcome, "Axiom1")
            continue
        if not link.supports:
            r.add("desired-without-goal", f"desired outcome {link.outcome} supports no goal", "outcome", link.outcome, "Def14")
        for g in sorted(link.supports - model.goal_map.keys()):
            r.add("unresolved-reference", f"desired outcome {link.outcome} supports unknown goal {g}", "outcome", link.outcome, "Axiom1")
        o = model.outcome_map[link.outcome]
        if o.groundings and o.interactions <= classes.keys():
            if all(classes[i] is InteractionClass.INTERNAL for i in o.interactions):
                r.add("desired-not-external", f"desired outcome {o.id} is an internal outcome", "outcome", o.id, "Def14")


def _check_goals(model: WorldModel, r: _Report) -> None:
    for s in model.stakeholders:
        if not s.goals:
            r.add("goal-less-stakeholder", f"stakeholder {s.id} has no goals", "stakeholder", s.id, "Def13")


def _check_requirements(model: WorldModel, r: _Report) -> None:
    internal = model.effective_boundary.internal
    for q in model.requirements:
        if q.subject not in model.entity_map:
            r.add("unresolved-reference", f"requirement {q.id} names unknown subject {q.subject}", "requirement", q.id, "Axiom1")
        elif q.subject not in internal:
            r.add("requirement-scope", f"requirement {q.id} is about {q.subject}, which is outside the system", "requirement", q.id, "Def15")
        if q.condition is not None and q.condition not in model.context_map:
            r.add("unresolved-reference", f"requirement {q.id} names unknown context {q.condition}", "requirement", q.id, "Axiom1")


def _check_open_system(model: WorldModel, r: _Report) -> None:
    classes = _classes(model)
    if model.syssol and not any(
        c in (InteractionClass.INBOUND, InteractionClass.OUTBOUND) for c in classes.values()
    ):
        r.warn("closed-syssol", "no interaction crosses the system boundary", "model", "boundary", "Def4")
