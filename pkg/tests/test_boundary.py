from __future__ import annotations

import random
from dataclasses import replace

import pytest

from psworld import (
    EntityKind,
    InteractionClass,
    OutcomeClass,
    RescopeError,
    classify_all,
    is_admissible,
    rescope,
    verify_boundary_independence,
)

from conftest import CONTEXTS
from modelgen import random_model, random_scope


def test_clock_rescope_reclassifies(corpus):
    new, plan = rescope(corpus, {"clock"})
    assert plan.reclassification["i_timer"] == (InteractionClass.INTERNAL, InteractionClass.OUTBOUND)
    assert "i_day" not in plan.reclassification
    assert classify_all(new)["i_day"] is InteractionClass.INBOUND
    assert new.entity("traffic_light").kind is EntityKind.EXTERNAL
    assert new.entity("traffic_light").functions == corpus.entity("traffic_light").functions
    assert new.outcomes == corpus.outcomes


def test_identity_rescope(corpus):
    new, plan = rescope(corpus, {"clock", "traffic_light"})
    assert plan.reclassification == {} and plan.rekinded == {}
    assert new == corpus


def test_env_cannot_join(corpus):
    with pytest.raises(RescopeError) as exc:
        rescope(corpus, {"clock", "day_night"})
    assert exc.value.rule == "env-cannot-be-internal"


def test_empty_scope(corpus):
    with pytest.raises(RescopeError) as exc:
        rescope(corpus, set())
    assert exc.value.rule == "empty-scope"


def test_relay_entity_cannot_join(corpus):
    with pytest.raises(RescopeError) as exc:
        rescope(corpus, {"pedestrians"})
    assert exc.value.rule == "relay-entity-internal"


def test_vehicles_can_join(corpus):
    new, plan = rescope(corpus, {"clock", "traffic_light", "vehicles"})
    assert plan.reclassification["i_car"] == (InteractionClass.EXTERNAL, InteractionClass.OUTBOUND)
    assert new.entity("vehicles").kind is EntityKind.INTERNAL


def test_time_update_flips_but_truth_holds(corpus):
    new, _ = rescope(corpus, {"clock"})
    rep = verify_boundary_independence(corpus, new, ["oc_1_4", "oc_1_2"], CONTEXTS)
    assert rep.ok
    flips = {(r.outcome, r.class_before, r.class_after) for r in rep.flips}
    assert flips == {("oc_1_4", OutcomeClass.INTERNAL, OutcomeClass.EXTERNAL)}
    stays = [r for r in rep.rows if r.outcome == "oc_1_2"]
    assert all(r.class_after is OutcomeClass.EXTERNAL and r.truth_equal for r in stays)


def test_identity_has_no_flips(corpus):
    new, _ = rescope(corpus, {"clock", "traffic_light"})
    rep = verify_boundary_independence(corpus, new, [o.id for o in corpus.outcomes], CONTEXTS)
    assert rep.ok and rep.flips == []


def test_not_a_rescope(corpus):
    other = replace(corpus, interactions=corpus.interactions[:-1])
    with pytest.raises(RescopeError) as exc:
        verify_boundary_independence(corpus, other, ["oc_1_1"], CONTEXTS)
    assert exc.value.rule == "not-a-rescope"


def test_idempotent(corpus):
    once, _ = rescope(corpus, {"clock"})
    twice, plan = rescope(once, {"clock"})
    assert once == twice and plan.reclassification == {}


def test_random_rescopes_preserve_truth_and_admissibility():
    rng = random.Random(13)
    for _ in range(300):
        m = random_model(rng)
        scope = random_scope(rng, m)
        if not scope:
            continue
        new, plan = rescope(m, scope)
        assert {i.id: is_admissible(m, i) for i in m.interactions} == {i.id: is_admissible(new, i) for i in new.interactions}
        before, after = classify_all(m), classify_all(new)
        assert set(plan.reclassification) == {i for i in before if before[i] is not after[i]}
        ctxs = [c.id for c in m.contexts]
        grounded = [o.id for o in m.outcomes]
        assert verify_boundary_independence(m, new, grounded, ctxs).ok
