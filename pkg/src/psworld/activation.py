"""Activation closure for operational contexts, derivations and simulation.

The active set of a context is the least fixed point of four rules:

* seed: an admissible environment emission activates its interaction;
* fire: a function whose firing rule is met by delivered inputs produces
  the outputs its output map assigns to those inputs;
* propagate: a produced flow activates every outgoing interaction of the
  producer that carries it and is admissible at the destination;
* relay: a declared relay rule re-emits a received flow on a named
  interaction.

Activation never consults the boundary, so rescoping cannot change it.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .diagnostics import ActivationError, Diagnostic, NotActiveError, Severity
from .model import (
    ContextDecl,
    EntityKind,
    Firing,
    FunctionSpec,
    Interaction,
    WorldModel,
    is_admissible,
    resolve_receiver,
)

SEED, PROPAGATE, RELAY = "seed", "propagate", "relay"


@dataclass(frozen=True)
class Derivation:
    """Why an interaction is active: a finite proof tree over the closure rules."""

    interaction: str
    rule: str
    entity: str  # emitter (seed) or producer
    flow: str
    function: str | None = None
    premises: tuple[Derivation, ...] = ()
    layer: int = 0

    def leaves(self) -> list[Derivation]:
        if not self.premises:
            return [self]
        return [leaf for p in self.premises for leaf in p.leaves()]

    def interactions(self) -> set[str]:
        out = {self.interaction}
        for p in self.premises:
            out |= p.interactions()
        return out

    def render(self, indent: int = 0) -> list[str]:
        pad = "  " * indent
        if self.rule == SEED:
            line = f"{pad}{self.interaction}: seed, {self.entity} emits {self.flow}"
        elif self.rule == RELAY:
            line = f"{pad}{self.interaction}: relay, {self.entity} re-emits {self.flow}"
        else:
            line = f"{pad}{self.interaction}: {self.entity}.{self.function} fires, produces {self.flow}"
        lines = [line]
        for p in self.premises:
            lines.extend(p.render(indent + 1))
        return lines

    def to_dict(self) -> dict:
        return {
            "interaction": self.interaction,
            "rule": self.rule,
            "entity": self.entity,
            "function": self.function,
            "flow": self.flow,
            "premises": [p.to_dict() for p in self.premises],
        }


@dataclass(frozen=True)
class ActiveSet:
    context: str
    active: frozenset[str]
    fired: frozenset[tuple[str, str]]
    delivery: Mapping[str, str]
    derivations: Mapping[str, Derivation] = field(repr=False, default_factory=dict)
    diagnostics: tuple[Diagnostic, ...] = ()

    def layer(self, iid: str) -> int:
        return self.derivations[iid].layer

    def ordered(self) -> list[str]:
        """Active interactions by (derivation layer, id)."""
        return sorted(self.active, key=lambda i: (self.derivations[i].layer, i))


def _key(d: Derivation) -> tuple[int, str]:
    return (d.layer, d.interaction)


class _Index:
    def __init__(self, model: WorldModel) -> None:
        self.model = model
        self.outgoing: dict[tuple[str, str], list[Interaction]] = defaultdict(list)
        self.incoming: dict[str, list[Interaction]] = defaultdict(list)
        self.receiver: dict[str, FunctionSpec | None] = {}
        self.admissible: dict[str, bool] = {}
        for ix in sorted(model.interactions, key=lambda i: i.id):
            if ix.source not in model.entity_map or ix.dest not in model.entity_map:
                continue
            self.outgoing[(ix.source, ix.flow)].append(ix)
            self.incoming[ix.dest].append(ix)
            self.admissible[ix.id] = is_admissible(model, ix)
            self.receiver[ix.id] = resolve_receiver(model, ix).function


def _check_emissions(model: WorldModel, context: ContextDecl) -> None:
    for em in context.emissions:
        ix = model.interaction_map.get(em.via)
        ent = model.entity_map.get(em.entity)
        if ix is None or ent is None:
            raise ActivationError(f"context {context.id}: emission references unknown {em.via if ix is None else em.entity}")
        if ent.kind is not EntityKind.ENVIRONMENT:
            raise ActivationError(f"context {context.id}: {em.entity} is not an environment entity")
        if ix.source != em.entity or ix.flow != em.flow or ix.dest not in model.entity_map:
            raise ActivationError(
                f"context {context.id}: {em.via} is not an inbound interaction carrying {em.flow} from {em.entity}",
                rule="emission-not-inbound",
            )
        if model.entity_map[ix.dest].kind is EntityKind.ENVIRONMENT:
            raise ActivationError(f"context {context.id}: {em.via} ends at an environment entity", rule="emission-not-inbound")


def compute_active_set(model: WorldModel, context: str | ContextDecl) -> ActiveSet:
    ctx = model.context(context) if isinstance(context, str) else context
    _check_emissions(model, ctx)
    idx = _Index(model)
    diags: list[Diagnostic] = []

    frontier: dict[str, Derivation] = {}
    for em in sorted(set(ctx.emissions), key=lambda e: (e.via, e.entity, e.flow)):
        if not idx.admissible[em.via]:
            diags.append(
                Diagnostic(
                    Severity.WARN,
                    "inadmissible-emission",
                    f"context {ctx.id}: {em.flow} on {em.via} is not admissible at {model.interaction_map[em.via].dest}",
                    model.span("context", ctx.id),
                    "Def11",
                    f"context {ctx.id}",
                )
            )
            continue
        frontier.setdefault(em.via, Derivation(em.via, SEED, em.entity, em.flow))

    active: dict[str, Derivation] = {}
    fired: set[tuple[str, str]] = set()
    layer = 0
    while frontier:
        active.update(frontier)
        layer += 1
        frontier = {}
        for ent in model.entities:
            if ent.kind is EntityKind.ENVIRONMENT:
                continue
            arriving = [active[ix.id] for ix in idx.incoming[ent.id] if ix.id in active]
            if not arriving:
                continue
            produced: dict[str, tuple[str | None, tuple[Derivation, ...], str]] = {}
            for f in ent.functions:
                got: dict[str, Derivation] = {}
                for d in arriving:
                    if idx.receiver[d.interaction] is f:
                        if d.flow not in got or _key(d) < _key(got[d.flow]):
                            got[d.flow] = d
                if not got:
                    continue
                if f.firing is Firing.ALL:
                    if not f.domain <= got.keys():
                        continue
                    premises = tuple(got[i] for i in sorted(f.domain))
                    outs = {o: premises for o in f.produces(f.domain)}
                else:
                    outs = {}
                    for i, d in sorted(got.items(), key=lambda kv: _key(kv[1])):
                        for o in sorted(f.output_map.get(i, ())):
                            outs.setdefault(o, (d,))
                fired.add((ent.id, f.name))
                for o, premises in outs.items():
                    produced.setdefault(o, (f.name, premises, PROPAGATE))
            for flow, (fname, premises, rule) in sorted(produced.items()):
                for ix in idx.outgoing[(ent.id, flow)]:
                    if ix.id not in active and ix.id not in frontier and idx.admissible[ix.id]:
                        frontier[ix.id] = Derivation(ix.id, rule, ent.id, flow, fname, premises, layer)
            if ent.relay:
                received: dict[str, Derivation] = {}
                for d in arriving:
                    if d.flow not in received or _key(d) < _key(received[d.flow]):
                        received[d.flow] = d
                for r in ent.relay:
                    ix = model.interaction_map.get(r.interaction)
                    if (
                        r.received in received
                        and ix is not None
                        and ix.source == ent.id
                        and ix.flow == r.emitted
                        and idx.admissible.get(ix.id, False)
                        and ix.id not in active
                        and ix.id not in frontier
                    ):
                        frontier[ix.id] = Derivation(ix.id, RELAY, ent.id, r.emitted, None, (received[r.received],), layer)

    return ActiveSet(
        context=ctx.id,
        active=frozenset(active),
        fired=frozenset(fired),
        delivery={iid: d.flow for iid, d in active.items()},
        derivations=active,
        diagnostics=tuple(diags),
    )


def explain_activation(active: ActiveSet, interaction: str) -> Derivation:
    try:
        return active.derivations[interaction]
    except KeyError:
        raise NotActiveError(
            f"interaction {interaction} is not active in context {active.context}: "
            "its existence does not make it active"
        ) from None


def replay_derivation(model: WorldModel, context: str | ContextDecl, d: Derivation) -> bool:
    """Check a derivation rule by rule against the model, without the closure."""
    ctx = model.context(context) if isinstance(context, str) else context
    ix = model.interaction_map.get(d.interaction)
    if ix is None or ix.source != d.entity or ix.flow != d.flow or not is_admissible(model, ix):
        return False
    if d.rule == SEED:
        return not d.premises and any(
            em.entity == d.entity and em.flow == d.flow and em.via == d.interaction for em in ctx.emissions
        )
    if not d.premises or not all(replay_derivation(model, ctx, p) for p in d.premises):
        return False
    incoming = [model.interaction_map[p.interaction] for p in d.premises]
    if any(i.dest != d.entity for i in incoming):
        return False
    ent = model.entity_map[d.entity]
    if d.rule == RELAY:
        (p,) = d.premises
        return any(
            r.received == p.flow and r.emitted == d.flow and r.interaction == d.interaction for r in ent.relay
        )
    if d.rule != PROPAGATE:
        return False
    f = ent.function(d.function) if d.function else None
    if f is None or any(resolve_receiver(model, i).function is not f for i in incoming):
        return False
    delivered = {p.flow for p in d.premises}
    if f.firing is Firing.ALL:
        return f.domain <= delivered and d.flow in f.produces(f.domain)
    return d.flow in f.produces(delivered)


@dataclass(frozen=True)
class TraceStep:
    context: str
    entity: str
    function: str
    before: str
    input: str
    after: str
    interaction: str


@dataclass(frozen=True)
class SimulationTrace:
    steps: tuple[TraceStep, ...]
    final_states: Mapping[tuple[str, str], str]
    diagnostics: tuple[Diagnostic, ...] = ()
    active_sets: tuple[ActiveSet, ...] = field(default=(), repr=False)


def initial_states(model: WorldModel) -> dict[tuple[str, str], str]:
    return {
        (e.id, f.name): f.states.initial
        for e in model.entities
        for f in e.functions
        if f.states is not None
    }


def simulate(model: WorldModel, schedule: Sequence[str] | Iterable[str]) -> SimulationTrace:
    """Run contexts in order, applying transitions for every active delivery."""
    states = initial_states(model)
    steps: list[TraceStep] = []
    diags: list[Diagnostic] = []
    sets: list[ActiveSet] = []
    for cid in schedule:
        aset = compute_active_set(model, cid)
        sets.append(aset)
        diags.extend(aset.diagnostics)
        for iid in aset.ordered():
            ix = model.interaction_map[iid]
            f = resolve_receiver(model, ix).function
            if f is None or f.states is None:
                continue
            key = (ix.dest, f.name)
            before = states[key]
            after = f.states.step(before, ix.flow)
            if after is None:
                diags.append(
                    Diagnostic(
                        Severity.WARN,
                        "no-transition",
                        f"{ix.dest}.{f.name} has no transition from {before} on {ix.flow}; state unchanged",
                        model.span("entity", ix.dest),
                        "Def8",
                        f"entity {ix.dest}",
                    )
                )
                continue
            steps.append(TraceStep(cid, ix.dest, f.name, before, ix.flow, after, iid))
            states[key] = after
    return SimulationTrace(tuple(steps), states, tuple(diags), tuple(sets))
