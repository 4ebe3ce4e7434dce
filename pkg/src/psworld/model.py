"""Core world-model types, interaction classification and admissibility.

A model is a closed world: entities (internal functions, external systems,
environment sources), directed interactions carrying flow types, one
boundary, operational contexts, outcomes and stakeholder goals.  Values are
immutable; analyses that "change" a model return a new one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping

from .diagnostics import ModelIntegrityError, SourceSpan, UnknownIdError


class EntityKind(str, Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"
    ENVIRONMENT = "environment"


class Firing(str, Enum):
    ALL = "all"
    ANY = "any"


class InteractionClass(str, Enum):
    INTERNAL = "internal"
    INBOUND = "inbound"
    OUTBOUND = "outbound"
    EXTERNAL = "external"


@dataclass(frozen=True)
class StateMachine:
    states: tuple[str, ...]
    initial: str
    transitions: Mapping[tuple[str, str], str] = field(default_factory=dict)

    def step(self, state: str, flow: str) -> str | None:
        """Next state, or None when no transition is declared."""
        return self.transitions.get((state, flow))


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    domain: frozenset[str]
    codomain: frozenset[str]
    output_map: Mapping[str, frozenset[str]] = field(default_factory=dict)
    firing: Firing = Firing.ALL
    states: StateMachine | None = None

    def produces(self, inputs: Iterable[str]) -> frozenset[str]:
        out: set[str] = set()
        for flow in inputs:
            out |= self.output_map.get(flow, frozenset())
        return frozenset(out)


@dataclass(frozen=True)
class RelayRule:
    """On receiving ``received``, emit ``emitted`` along ``interaction``."""

    received: str
    emitted: str
    interaction: str


@dataclass(frozen=True)
class Entity:
    id: str
    kind: EntityKind
    functions: tuple[FunctionSpec, ...] = ()
    relay: tuple[RelayRule, ...] = ()
    emits: tuple[tuple[str, str], ...] = ()  # (flow, interaction)

    def function(self, name: str) -> FunctionSpec | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class Interaction:
    id: str
    source: str
    dest: str
    flow: str
    interface: str | None = None
    dest_function: str | None = None


@dataclass(frozen=True)
class Boundary:
    internal: frozenset[str]
    external: frozenset[str]

    @classmethod
    def around(cls, internal: Iterable[str], universe: Iterable[str]) -> Boundary:
        inside = frozenset(internal)
        return cls(inside, frozenset(universe) - inside)


@dataclass(frozen=True)
class Emission:
    entity: str
    flow: str
    via: str


@dataclass(frozen=True)
class ContextDecl:
    id: str
    emissions: tuple[Emission, ...] = ()


@dataclass(frozen=True)
class OutcomeDecl:
    """Outcome proposition; ``groundings`` is a disjunction of conjunctions."""

    id: str
    groundings: tuple[frozenset[str], ...] = ()
    description: str = ""

    @property
    def interactions(self) -> frozenset[str]:
        return frozenset().union(*self.groundings) if self.groundings else frozenset()


@dataclass(frozen=True)
class Goal:
    id: str
    description: str = ""


@dataclass(frozen=True)
class Stakeholder:
    id: str
    goals: tuple[Goal, ...] = ()
    description: str = ""


@dataclass(frozen=True)
class DesiredOutcomeLink:
    outcome: str
    supports: frozenset[str]


@dataclass(frozen=True)
class RequirementDecl:
    id: str
    subject: str
    input: str
    output: str
    condition: str | None = None


@dataclass(frozen=True)
class WorldModel:
    entities: tuple[Entity, ...] = ()
    interactions: tuple[Interaction, ...] = ()
    boundary: Boundary | None = None
    contexts: tuple[ContextDecl, ...] = ()
    outcomes: tuple[OutcomeDecl, ...] = ()
    stakeholders: tuple[Stakeholder, ...] = ()
    desired: tuple[DesiredOutcomeLink, ...] = ()
    requirements: tuple[RequirementDecl, ...] = ()
    allow_self_loops: bool = False
    # keyed by (namespace, id); layout and history never affect equality
    spans: Mapping[tuple[str, str], SourceSpan] = field(
        default_factory=dict, compare=False, repr=False
    )
    provenance: tuple[str, ...] = field(default=(), compare=False, repr=False)

    @cached_property
    def entity_map(self) -> dict[str, Entity]:
        return {e.id: e for e in self.entities}

    @cached_property
    def interaction_map(self) -> dict[str, Interaction]:
        return {i.id: i for i in self.interactions}

    @cached_property
    def context_map(self) -> dict[str, ContextDecl]:
        return {c.id: c for c in self.contexts}

    @cached_property
    def outcome_map(self) -> dict[str, OutcomeDecl]:
        return {o.id: o for o in self.outcomes}

    @cached_property
    def goal_map(self) -> dict[str, Goal]:
        return {g.id: g for s in self.stakeholders for g in s.goals}

    @cached_property
    def desired_map(self) -> dict[str, DesiredOutcomeLink]:
        return {d.outcome: d for d in self.desired}

    @cached_property
    def flow_types(self) -> frozenset[str]:
        flows: set[str] = {i.flow for i in self.interactions}
        for e in self.entities:
            for f in e.functions:
                flows |= f.domain | f.codomain
                for src, outs in f.output_map.items():
                    flows.add(src)
                    flows |= outs
            for r in e.relay:
                flows |= {r.received, r.emitted}
        for c in self.contexts:
            flows |= {em.flow for em in c.emissions}
        return frozenset(flows)

    def entity(self, eid: str) -> Entity:
        try:
            return self.entity_map[eid]
        except KeyError:
            raise UnknownIdError("entity", eid) from None

    def interaction(self, iid: str) -> Interaction:
        try:
            return self.interaction_map[iid]
        except KeyError:
            raise UnknownIdError("interaction", iid) from None

    def context(self, cid: str) -> ContextDecl:
        try:
            return self.context_map[cid]
        except KeyError:
            raise UnknownIdError("context", cid) from None

    def outcome(self, oid: str) -> OutcomeDecl:
        try:
            return self.outcome_map[oid]
        except KeyError:
            raise UnknownIdError("outcome", oid) from None

    @property
    def entity_ids(self) -> frozenset[str]:
        return frozenset(self.entity_map)

    @cached_property
    def effective_boundary(self) -> Boundary:
        """The declared boundary, or the one implied by entity kinds."""
        if self.boundary is not None:
            return self.boundary
        internal = [e.id for e in self.entities if e.kind is EntityKind.INTERNAL]
        return Boundary.around(internal, self.entity_ids)

    @property
    def syssol(self) -> frozenset[str]:
        return self.effective_boundary.internal

    def span(self, namespace: str, ident: str) -> SourceSpan | None:
        return self.spans.get((namespace, ident))


def classify_interaction(interaction: Interaction, boundary: Boundary) -> InteractionClass:
    """Boundary-relative class of one interaction; total over resolved endpoints."""
    sides = []
    for end in (interaction.source, interaction.dest):
        if end in boundary.internal:
            sides.append(True)
        elif end in boundary.external:
            sides.append(False)
        else:
            raise ModelIntegrityError(
                f"interaction {interaction.id}: endpoint {end!r} is not in the boundary's universe"
            )
    src_in, dst_in = sides
    if src_in and dst_in:
        return InteractionClass.INTERNAL
    if dst_in:
        return InteractionClass.INBOUND
    if src_in:
        return InteractionClass.OUTBOUND
    return InteractionClass.EXTERNAL


def classify_all(model: WorldModel, boundary: Boundary | None = None) -> dict[str, InteractionClass]:
    b = boundary if boundary is not None else model.effective_boundary
    return {i.id: classify_interaction(i, b) for i in model.interactions}


def partition_by_class(classes: Mapping[str, InteractionClass]) -> dict[InteractionClass, frozenset[str]]:
    out: dict[InteractionClass, set[str]] = {c: set() for c in InteractionClass}
    for iid, cls in classes.items():
        out[cls].add(iid)
    return {c: frozenset(v) for c, v in out.items()}


@dataclass(frozen=True)
class Receiver:
    """How an interaction's destination function resolves.

    status is one of ``black-box`` (destination declares no function),
    ``resolved``, ``unknown-function``, ``no-candidate``, ``ambiguous``,
    ``unknown-dest``.
    """

    status: str
    function: FunctionSpec | None = None
    candidates: tuple[str, ...] = ()


def resolve_receiver(model: WorldModel, interaction: Interaction) -> Receiver:
    dest = model.entity_map.get(interaction.dest)
    if dest is None:
        return Receiver("unknown-dest")
    if interaction.dest_function is not None:
        f = dest.function(interaction.dest_function)
        if f is None:
            return Receiver("unknown-function")
        return Receiver("resolved", f)
    if not dest.functions:
        return Receiver("black-box")
    cands = [f for f in dest.functions if interaction.flow in f.domain]
    if len(cands) == 1:
        return Receiver("resolved", cands[0])
    if not cands:
        return Receiver("no-candidate")
    return Receiver("ambiguous", None, tuple(f.name for f in cands))


def is_admissible(model: WorldModel, interaction: Interaction) -> bool:
    """Whether the carried flow lies in the receiving function's domain.

    Depends only on the destination's declared functions, never on the
    boundary.  Destinations without functions are black boxes and accept.
    """
    r = resolve_receiver(model, interaction)
    if r.status == "black-box":
        return True
    if r.status == "resolved":
        return interaction.flow in r.function.domain
    return False


def has_receiving_domain(model: WorldModel, interaction: Interaction) -> bool:
    """Stricter form used by the sufficiency audit: a declared domain must admit the flow."""
    r = resolve_receiver(model, interaction)
    return r.status == "resolved" and interaction.flow in r.function.domain
