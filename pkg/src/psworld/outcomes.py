"""Outcome truth, classification, invariance, minimal sets and safe reduction.

An outcome is TRUE in a context when at least one of its grounding
alternatives lies wholly inside the context's active set.  A set of
interactions J *determines* an outcome over a family of contexts when any
two contexts that agree on which members of J are active also agree on the
outcome's truth.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .activation import ActiveSet, compute_active_set
from .diagnostics import (
    ModelIntegrityError,
    NotRemovableError,
    PsworldError,
    SearchTooLargeError,
    UngroundedOutcomeError,
)
from .model import InteractionClass, OutcomeDecl, WorldModel, classify_interaction

DEFAULT_MAX_SUBSETS = 2**20


class OutcomeClass(str, Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


@dataclass(frozen=True)
class OutcomeVerdict:
    outcome: str
    context: str
    truth: bool
    witness: frozenset[str] | None
    classification: OutcomeClass


def active_sets(model: WorldModel, contexts: Iterable[str]) -> dict[str, ActiveSet]:
    return {c: compute_active_set(model, c) for c in contexts}


def outcome_truth(outcome: OutcomeDecl, active: frozenset[str]) -> tuple[bool, frozenset[str] | None]:
    """DNF truth and the first satisfied alternative."""
    for alt in outcome.groundings:
        if alt and alt <= active:
            return True, alt
    return False, None


def _require_resolved(model: WorldModel, outcome: OutcomeDecl) -> None:
    unknown = sorted(outcome.interactions - model.interaction_map.keys())
    if unknown:
        raise ModelIntegrityError(f"outcome {outcome.id} grounds on unknown interaction(s) {', '.join(unknown)}")


def classify_outcome(model: WorldModel, outcome: str | OutcomeDecl) -> OutcomeClass:
    """Internal iff every grounding interaction is internal to the boundary."""
    o = model.outcome(outcome) if isinstance(outcome, str) else outcome
    _require_resolved(model, o)
    b = model.effective_boundary
    classes = [classify_interaction(model.interaction_map[i], b) for i in sorted(o.interactions)]
    if classes and all(c is InteractionClass.INTERNAL for c in classes):
        return OutcomeClass.INTERNAL
    return OutcomeClass.EXTERNAL


def check_grounding(model: WorldModel, outcome: OutcomeDecl) -> None:
    """Outcomes must be attributable to the system: no external-class grounding."""
    _require_resolved(model, outcome)
    if not outcome.groundings:
        raise UngroundedOutcomeError(f"outcome {outcome.id} declares no grounding", rule="missing-grounding")
    b = model.effective_boundary
    for alt in outcome.groundings:
        ext = sorted(
            i for i in alt if classify_interaction(model.interaction_map[i], b) is InteractionClass.EXTERNAL
        )
        if ext:
            raise UngroundedOutcomeError(
                f"outcome {outcome.id} grounds on external interaction(s) {', '.join(ext)}"
            )
        if not alt:
            raise UngroundedOutcomeError(f"outcome {outcome.id} has an empty grounding alternative")


def evaluate_outcome(
    model: WorldModel,
    outcome: str,
    context: str,
    *,
    active: ActiveSet | None = None,
    check: bool = True,
) -> OutcomeVerdict:
    o = model.outcome(outcome)
    model.context(context)
    if check:
        check_grounding(model, o)
    else:
        _require_resolved(model, o)
    aset = active if active is not None else compute_active_set(model, context)
    truth, witness = outcome_truth(o, aset.active)
    return OutcomeVerdict(o.id, context, truth, witness, classify_outcome(model, o))


def truth_table(model: WorldModel, outcomes: Iterable[str], contexts: Sequence[str]) -> dict[str, dict[str, bool]]:
    sets = active_sets(model, contexts)
    table: dict[str, dict[str, bool]] = {}
    for oid in outcomes:
        o = model.outcome(oid)
        _require_resolved(model, o)
        table[oid] = {c: outcome_truth(o, sets[c].active)[0] for c in contexts}
    return table


# invariance


@dataclass(frozen=True)
class InvarianceResult:
    status: str  # invariant | not-comparable | differs
    truth1: bool
    truth2: bool
    witness: frozenset[str] | None = None
    only_in_first: frozenset[str] = frozenset()
    only_in_second: frozenset[str] = frozenset()


def check_invariance(model: WorldModel, outcome: str, c1: str, c2: str) -> InvarianceResult:
    """Look for a grounding alternative active in both contexts.

    Such a shared witness forces the same truth value in both; without one
    the result is ``differs`` when the truth values disagree and
    ``not-comparable`` when they agree by coincidence.
    """
    o = model.outcome(outcome)
    _require_resolved(model, o)
    a1 = compute_active_set(model, c1).active
    a2 = compute_active_set(model, c2).active
    t1, w1 = outcome_truth(o, a1)
    t2, _ = outcome_truth(o, a2)
    if c1 == c2:
        return InvarianceResult("invariant", t1, t2, w1 or frozenset())
    shared = a1 & a2
    for alt in o.groundings:
        if alt and alt <= shared:
            if t1 != t2:  # pragma: no cover - would contradict DNF truth
                raise PsworldError(f"shared witness {sorted(alt)} but truth differs for {outcome}")
            return InvarianceResult("invariant", t1, t2, alt)
    relevant = o.interactions
    diff1, diff2 = (a1 - a2) & relevant, (a2 - a1) & relevant
    if t1 != t2:
        return InvarianceResult("differs", t1, t2, None, diff1, diff2)
    return InvarianceResult("not-comparable", t1, t2, None, diff1, diff2)


# minimal determining sets


def determines(subset: Iterable[str], patterns: Sequence[tuple[frozenset[str], bool]]) -> bool:
    """Whether the activation pattern of ``subset`` fixes the truth value."""
    j = frozenset(subset)
    seen: dict[frozenset[str], bool] = {}
    for active, truth in patterns:
        key = active & j
        if seen.setdefault(key, truth) != truth:
            return False
    return True


@dataclass(frozen=True)
class MinimalSetReport:
    outcome: str
    contexts: tuple[str, ...]
    candidates: tuple[str, ...]
    minimal_sets: tuple[frozenset[str], ...]
    essential: frozenset[str]
    nonessential: frozenset[str]
    constant: bool = False
    certified: bool = True

    @property
    def flags(self) -> list[str]:
        out = []
        if self.constant:
            out.append("constant-outcome")
        if not self.certified:
            out.append("heuristic")
        return out


def max_subsets_from_env(default: int = DEFAULT_MAX_SUBSETS) -> int:
    raw = os.environ.get("PSWORLD_MAX_SUBSETS")
    return int(raw) if raw else default


def _patterns(model: WorldModel, o: OutcomeDecl, contexts: Sequence[str], sets=None):
    sets = sets or active_sets(model, contexts)
    cands = o.interactions
    return [(sets[c].active & cands, outcome_truth(o, sets[c].active)[0]) for c in contexts]


def find_minimal_sets(
    model: WorldModel,
    outcome: str,
    contexts: Iterable[str],
    *,
    max_subsets: int | None = None,
    heuristic: bool = False,
    sets: Mapping[str, ActiveSet] | None = None,
) -> MinimalSetReport:
    ctxs = tuple(sorted(set(contexts)))
    if not ctxs:
        raise PsworldError("at least one context is required", rule="no-contexts")
    o = model.outcome(outcome)
    _require_resolved(model, o)
    for c in ctxs:
        model.context(c)
    patterns = _patterns(model, o, ctxs, sets)
    cands = tuple(sorted(o.interactions))
    limit = max_subsets if max_subsets is not None else max_subsets_from_env()
    constant = len({t for _, t in patterns}) <= 1

    if 2 ** len(cands) > limit and not heuristic:
        raise SearchTooLargeError(
            f"{len(cands)} candidate interactions give {2 ** len(cands)} subsets, above the cap of {limit}; "
            "raise PSWORLD_MAX_SUBSETS, restrict the contexts, or use --heuristic"
        )
    found: list[frozenset[str]] = []
    if heuristic and 2 ** len(cands) > limit:
        current = set(cands)
        for x in cands:
            if determines(current - {x}, patterns):
                current.discard(x)
        found.append(frozenset(current))
        certified = False
    else:
        certified = True
        for k in range(len(cands) + 1):
            for combo in combinations(cands, k):
                js = frozenset(combo)
                if any(m <= js for m in found):
                    continue
                if determines(js, patterns):
                    found.append(js)
    essential = frozenset().union(*found) if found else frozenset()
    return MinimalSetReport(
        outcome=o.id,
        contexts=ctxs,
        candidates=cands,
        minimal_sets=tuple(found),
        essential=essential,
        nonessential=frozenset(cands) - essential,
        constant=constant,
        certified=certified,
    )


@dataclass(frozen=True)
class NonEssentialReport:
    removable: frozenset[str]
    vacuous: bool
    minimal: Mapping[str, MinimalSetReport] = field(default_factory=dict)
    support: frozenset[str] = frozenset()


def find_nonessential(
    model: WorldModel,
    desired: Iterable[str],
    contexts: Iterable[str],
    *,
    max_subsets: int | None = None,
) -> NonEssentialReport:
    """Interactions certified removable for the desired outcomes over the contexts.

    Certification requires absence from every minimal determining set and,
    in addition, absence from the outcomes' groundings and from the
    activation derivations of every satisfied grounding alternative.  The
    second condition keeps removal from deactivating the evidence that
    makes an outcome true.
    """
    desired = tuple(sorted(set(desired)))
    ctxs = tuple(sorted(set(contexts)))
    everything = frozenset(model.interaction_map)
    if not desired:
        return NonEssentialReport(everything, True)
    sets = active_sets(model, ctxs)
    minimal: dict[str, MinimalSetReport] = {}
    support: set[str] = set()
    for oid in desired:
        rep = find_minimal_sets(model, oid, ctxs, max_subsets=max_subsets, sets=sets)
        minimal[oid] = rep
        o = model.outcome(oid)
        support |= o.interactions
        for c in ctxs:
            for alt in o.groundings:
                if alt and alt <= sets[c].active:
                    for iid in alt:
                        support |= sets[c].derivations[iid].interactions()
    essential = frozenset().union(*(r.essential for r in minimal.values()))
    keep = essential | support
    return NonEssentialReport(everything - keep, False, minimal, frozenset(support))


def remove_interactions(model: WorldModel, removed: frozenset[str]) -> tuple[WorldModel, list[str]]:
    """Drop interactions and everything that names them.

    Grounding alternatives that mention a removed interaction are dropped;
    outcomes left without any alternative are dropped with their desired
    links.  Returns the new model and the ids of dropped outcomes.
    """
    entities = tuple(
        replace(
            e,
            relay=tuple(r for r in e.relay if r.interaction not in removed),
            emits=tuple(x for x in e.emits if x[1] not in removed),
        )
        for e in model.entities
    )
    contexts = tuple(
        replace(c, emissions=tuple(em for em in c.emissions if em.via not in removed)) for c in model.contexts
    )
    outcomes, dropped = [], []
    for o in model.outcomes:
        alts = tuple(a for a in o.groundings if not (a & removed))
        if o.groundings and not alts:
            dropped.append(o.id)
            continue
        outcomes.append(replace(o, groundings=alts))
    spans = {k: v for k, v in model.spans.items() if not (k[0] == "interaction" and k[1] in removed)}
    new = replace(
        model,
        entities=entities,
        interactions=tuple(i for i in model.interactions if i.id not in removed),
        contexts=contexts,
        outcomes=tuple(outcomes),
        desired=tuple(d for d in model.desired if d.outcome not in dropped),
        spans=spans,
    )
    return new, dropped


def reduce_model(
    model: WorldModel,
    removable: Iterable[str],
    desired: Iterable[str],
    contexts: Iterable[str],
    *,
    max_subsets: int | None = None,
) -> WorldModel:
    """Remove certified non-essential interactions, verifying every desired verdict."""
    removed = frozenset(removable)
    if not removed:
        return model
    for iid in sorted(removed):
        model.interaction(iid)
    desired = tuple(sorted(set(desired)))
    ctxs = tuple(sorted(set(contexts)))
    report = find_nonessential(model, desired, ctxs, max_subsets=max_subsets)
    reduced, dropped = remove_interactions(model, removed)

    before = truth_table(model, desired, ctxs)
    after_sets = active_sets(reduced, ctxs)
    for oid in desired:
        for c in ctxs:
            after = None if oid in dropped else outcome_truth(reduced.outcome(oid), after_sets[c].active)[0]
            if after != before[oid][c]:
                now = "dropped" if after is None else after
                raise NotRemovableError(
                    f"removing {', '.join(sorted(removed))} changes {oid} under {c}: {before[oid][c]} -> {now}",
                    counterexample=(oid, c, before[oid][c], after),
                )
    uncertified = removed - report.removable
    if uncertified:
        raise NotRemovableError(
            f"not certified non-essential: {', '.join(sorted(uncertified))}", uncertified=uncertified
        )
    note = (
        f"reduced: removed {', '.join(sorted(removed))}; certified non-essential for "
        f"outcomes {{{', '.join(desired)}}} over contexts {{{', '.join(ctxs)}}}"
    )
    if dropped:
        note += f"; dropped outcomes {', '.join(dropped)}"
    return replace(reduced, provenance=model.provenance + (note,))
