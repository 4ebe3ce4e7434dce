"""Re-selecting the system of interest and checking what rescoping preserves."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .diagnostics import RescopeError, UnknownIdError
from .model import (
    Boundary,
    EntityKind,
    InteractionClass,
    WorldModel,
    classify_all,
    is_admissible,
)
from .outcomes import OutcomeClass, active_sets, classify_outcome, outcome_truth


@dataclass(frozen=True)
class RescopePlan:
    new_internal: frozenset[str]
    derived_boundary: Boundary
    reclassification: Mapping[str, tuple[InteractionClass, InteractionClass]] = field(default_factory=dict)
    rekinded: Mapping[str, tuple[EntityKind, EntityKind]] = field(default_factory=dict)


def rescope(model: WorldModel, new_internal: Iterable[str]) -> tuple[WorldModel, RescopePlan]:
    """Declare a new boundary around ``new_internal``.

    Entities that leave the system become external systems and keep their
    functions; entities that join it become internal functions.  Nothing
    else in the model changes.
    """
    inside = frozenset(new_internal)
    if not inside:
        raise RescopeError("the new system of interest is empty", rule="empty-scope")
    for eid in sorted(inside):
        model.entity(eid)
    for eid in sorted(inside):
        ent = model.entity_map[eid]
        if ent.kind is EntityKind.ENVIRONMENT:
            raise RescopeError(f"environment entity {eid} cannot be inside a boundary", rule="env-cannot-be-internal")
        if ent.kind is EntityKind.EXTERNAL:
            if not ent.functions:
                raise RescopeError(f"{eid} declares no function and cannot join the system", rule="not-a-function-entity")
            if ent.relay:
                raise RescopeError(f"{eid} has relay behavior and cannot join the system", rule="relay-entity-internal")

    old_boundary = model.effective_boundary
    new_boundary = Boundary.around(inside, model.entity_ids)
    rekinded: dict[str, tuple[EntityKind, EntityKind]] = {}
    entities = []
    for e in model.entities:
        kind = e.kind
        if e.id in inside:
            kind = EntityKind.INTERNAL
        elif e.kind is EntityKind.INTERNAL:
            kind = EntityKind.EXTERNAL
        if kind is not e.kind:
            rekinded[e.id] = (e.kind, kind)
            e = replace(e, kind=kind)
        entities.append(e)
    new_model = replace(model, entities=tuple(entities), boundary=new_boundary)

    old_cls = classify_all(model, old_boundary)
    new_cls = classify_all(new_model, new_boundary)
    changed = {i: (old_cls[i], new_cls[i]) for i in old_cls if old_cls[i] is not new_cls[i]}
    for ix in model.interactions:
        # admissibility reads only the receiving function, which rescoping keeps
        assert is_admissible(model, ix) == is_admissible(new_model, ix)
    return new_model, RescopePlan(inside, new_boundary, changed, rekinded)


@dataclass(frozen=True)
class IndependenceRow:
    outcome: str
    context: str
    truth_before: bool
    truth_after: bool
    class_before: OutcomeClass
    class_after: OutcomeClass

    @property
    def truth_equal(self) -> bool:
        return self.truth_before == self.truth_after

    @property
    def flipped(self) -> bool:
        return self.class_before is not self.class_after


@dataclass(frozen=True)
class IndependenceReport:
    rows: tuple[IndependenceRow, ...]

    @property
    def defects(self) -> list[IndependenceRow]:
        """Rows where truth changed: always an engine defect, never expected."""
        return [r for r in self.rows if not r.truth_equal]

    @property
    def flips(self) -> list[IndependenceRow]:
        return [r for r in self.rows if r.flipped]

    @property
    def ok(self) -> bool:
        return not self.defects


def _strip_scope(model: WorldModel) -> WorldModel:
    ents = tuple(
        replace(e, kind=EntityKind.ENVIRONMENT if e.kind is EntityKind.ENVIRONMENT else EntityKind.INTERNAL)
        for e in model.entities
    )
    return replace(model, entities=ents, boundary=None)


def verify_boundary_independence(
    before: WorldModel,
    after: WorldModel,
    outcomes: Iterable[str],
    contexts: Iterable[str],
) -> IndependenceReport:
    if _strip_scope(before) != _strip_scope(after):
        raise RescopeError("the models differ in more than their boundary", rule="not-a-rescope")
    ctxs = tuple(sorted(set(contexts)))
    oids = tuple(sorted(set(outcomes)))
    for oid in oids:
        before.outcome(oid)
    for c in ctxs:
        if c not in before.context_map:
            raise UnknownIdError("context", c)
    sets_b = active_sets(before, ctxs)
    sets_a = active_sets(after, ctxs)
    rows = []
    for oid in oids:
        ob, oa = before.outcome(oid), after.outcome(oid)
        cb, ca = classify_outcome(before, ob), classify_outcome(after, oa)
        for c in ctxs:
            rows.append(
                IndependenceRow(
                    oid,
                    c,
                    outcome_truth(ob, sets_b[c].active)[0],
                    outcome_truth(oa, sets_a[c].active)[0],
                    cb,
                    ca,
                )
            )
    return IndependenceReport(tuple(rows))
