"""Brute-force reference implementations, written from the definitions.

Nothing here imports the engines under test; only the data types.  The
oracles are slow on purpose: plain set iteration until nothing changes,
full subset enumeration without pruning.
"""

from __future__ import annotations

from itertools import combinations

from psworld.model import EntityKind, Firing, WorldModel


def oracle_class(src_inside: bool, dst_inside: bool) -> str:
    return {
        (True, True): "internal",
        (False, True): "inbound",
        (True, False): "outbound",
        (False, False): "external",
    }[(src_inside, dst_inside)]


def oracle_receiver(model: WorldModel, ix):
    """(admissible, receiving function or None)."""
    dest = next((e for e in model.entities if e.id == ix.dest), None)
    if dest is None:
        return False, None
    if ix.dest_function is not None:
        named = [f for f in dest.functions if f.name == ix.dest_function]
        if not named:
            return False, None
        return ix.flow in named[0].domain, named[0]
    if not dest.functions:
        return True, None
    takers = [f for f in dest.functions if ix.flow in f.domain]
    return (True, takers[0]) if len(takers) == 1 else (False, None)


def oracle_active(model: WorldModel, context_id: str) -> frozenset[str]:
    ctx = next(c for c in model.contexts if c.id == context_id)
    ixs = list(model.interactions)
    adm = {i.id: oracle_receiver(model, i) for i in ixs}
    active = {em.via for em in ctx.emissions if adm[em.via][0]}
    changed = True
    while changed:
        changed = False
        for ent in model.entities:
            if ent.kind is EntityKind.ENVIRONMENT:
                continue
            into = [i for i in ixs if i.id in active and i.dest == ent.id]
            produced: set[str] = set()
            for f in ent.functions:
                got = {i.flow for i in into if adm[i.id][1] is f}
                if not got:
                    continue
                fed = f.domain if f.firing is Firing.ALL else got
                if f.firing is Firing.ALL and not f.domain <= got:
                    continue
                for flow in fed:
                    produced |= set(f.output_map.get(flow, ()))
            for i in ixs:
                if i.source == ent.id and i.flow in produced and adm[i.id][0] and i.id not in active:
                    active.add(i.id)
                    changed = True
            received = {i.flow for i in into}
            for r in ent.relay:
                tgt = next((i for i in ixs if i.id == r.interaction), None)
                if (
                    tgt is not None
                    and r.received in received
                    and tgt.source == ent.id
                    and tgt.flow == r.emitted
                    and adm[tgt.id][0]
                    and tgt.id not in active
                ):
                    active.add(tgt.id)
                    changed = True
    return frozenset(active)


def oracle_truth(groundings, active) -> bool:
    return any(alt and set(alt) <= set(active) for alt in groundings)


def oracle_determines(subset, rows) -> bool:
    """rows: (active set, truth) per context; compare every pair."""
    for (a1, t1), (a2, t2) in combinations(rows, 2):
        if (set(a1) & set(subset)) == (set(a2) & set(subset)) and t1 != t2:
            return False
    return True


def oracle_minimal_sets(candidates, rows) -> list[frozenset[str]]:
    cands = sorted(candidates)
    good = [
        frozenset(c)
        for k in range(len(cands) + 1)
        for c in combinations(cands, k)
        if oracle_determines(c, rows)
    ]
    return [g for g in good if not any(h < g for h in good)]
