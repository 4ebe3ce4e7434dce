from __future__ import annotations

import random
from dataclasses import replace

import pytest

from psworld import (
    Boundary,
    ContextDecl,
    Emission,
    Entity,
    EntityKind,
    Firing,
    FunctionSpec,
    Interaction,
    NotRemovableError,
    OutcomeClass,
    OutcomeDecl,
    SearchTooLargeError,
    UngroundedOutcomeError,
    WorldModel,
    check_invariance,
    classify_outcome,
    evaluate_outcome,
    find_minimal_sets,
    find_nonessential,
    load_model,
    reduce_model,
    truth_table,
)

from conftest import CONTEXTS, DESIRED
from modelgen import random_model
from oracles import oracle_active, oracle_minimal_sets, oracle_truth


def feeds_model() -> WorldModel:
    """``a`` enters a gate that only passes ``b`` when a second input arrives."""
    gate = FunctionSpec("gate", frozenset({"x2", "y"}), frozenset({"z"}), {"x2": frozenset({"z"})}, Firing.ALL)
    front = FunctionSpec("front", frozenset({"x"}), frozenset({"x2"}), {"x": frozenset({"x2"})})
    sink = FunctionSpec("sink", frozenset({"z"}), frozenset({"z"}))
    ents = (
        Entity("env", EntityKind.ENVIRONMENT),
        Entity("f1", EntityKind.INTERNAL, (front,)),
        Entity("f2", EntityKind.INTERNAL, (gate,)),
        Entity("out", EntityKind.EXTERNAL, (sink,)),
    )
    ixs = (
        Interaction("ia", "env", "f1", "x"),
        Interaction("iy", "env", "f2", "y"),
        Interaction("a", "f1", "f2", "x2"),
        Interaction("b", "f2", "out", "z"),
    )
    ctxs = (
        ContextDecl("both", (Emission("env", "x", "ia"), Emission("env", "y", "iy"))),
        ContextDecl("only_x", (Emission("env", "x", "ia"),)),
        ContextDecl("none", ()),
    )
    return WorldModel(
        entities=ents,
        interactions=ixs,
        boundary=Boundary.around({"f1", "f2"}, {e.id for e in ents}),
        contexts=ctxs,
        outcomes=(OutcomeDecl("delivered", (frozenset({"a", "b"}),)),),
    )


class TestEvaluate:
    def test_stops_at_red(self, corpus):
        v = evaluate_outcome(corpus, "oc_1_2", "OpsC_1")
        assert v.truth and v.classification is OutcomeClass.EXTERNAL
        assert v.witness == frozenset({"i_veh"})

    def test_time_update_is_internal(self, corpus):
        assert classify_outcome(corpus, "oc_1_4") is OutcomeClass.INTERNAL

    def test_corpus_matrix(self, corpus):
        table = truth_table(corpus, [o.id for o in corpus.outcomes], CONTEXTS)
        assert {o for o, row in table.items() if not all(row.values())} == {"oc_2_1", "oc_3_1"}
        assert table["oc_2_1"] == {"OpsC_1": True, "OpsC_2": False}
        assert table["oc_3_1"] == {"OpsC_1": False, "OpsC_2": True}

    def test_external_only_grounding(self, corpus):
        m = replace(corpus, outcomes=corpus.outcomes + (OutcomeDecl("floating", (frozenset({"i_car"}),)),))
        with pytest.raises(UngroundedOutcomeError) as exc:
            evaluate_outcome(m, "floating", "OpsC_1")
        assert exc.value.rule == "ungrounded-outcome"

    def test_mixed_grounding_is_external(self, corpus):
        # i_timer internal + i_veh outbound
        assert classify_outcome(corpus, "oc_1_1") is OutcomeClass.EXTERNAL

    def test_inbound_only_grounding_is_external(self, corpus):
        m = replace(corpus, outcomes=(OutcomeDecl("fed", (frozenset({"i_day"}),)),))
        assert classify_outcome(m, "fed") is OutcomeClass.EXTERNAL

    def test_repeatable(self, corpus):
        assert evaluate_outcome(corpus, "oc_2_1", "OpsC_1") == evaluate_outcome(corpus, "oc_2_1", "OpsC_1")


class TestInvariance:
    def test_signal_changes_color(self, corpus):
        r = check_invariance(corpus, "oc_1_1", "OpsC_1", "OpsC_2")
        assert r.status == "invariant" and r.truth1 and r.truth2
        assert r.witness == frozenset({"i_timer", "i_veh"})

    def test_same_context(self, corpus):
        assert check_invariance(corpus, "oc_3_1", "OpsC_1", "OpsC_1").status == "invariant"

    def test_shorter_green_differs(self, corpus):
        r = check_invariance(corpus, "oc_2_1", "OpsC_1", "OpsC_2")
        assert r.status == "differs"
        assert r.only_in_first == frozenset({"i_short"})


class TestMinimalSets:
    def test_fed_pair_reduces_to_downstream(self):
        rep = find_minimal_sets(feeds_model(), "delivered", ["both", "only_x", "none"])
        assert rep.minimal_sets == (frozenset({"b"}),)
        assert rep.nonessential == frozenset({"a"})

    def test_redundant_paths(self, fixture_path):
        m = load_model(fixture_path("redundant-grounding.psw"))
        rep = find_minimal_sets(m, "plant_stopped", ["hot", "calm"])
        assert {frozenset({"path_a"}), frozenset({"path_b"})} <= set(rep.minimal_sets)

    def test_never_true_is_constant(self, corpus):
        m = replace(corpus, outcomes=(OutcomeDecl("stuck", (frozenset({"i_car", "i_veh"}),)),))
        rep = find_minimal_sets(m, "stuck", CONTEXTS)
        assert rep.minimal_sets == (frozenset(),)
        assert rep.flags == ["constant-outcome"]

    def test_shorter_green(self, corpus):
        assert find_minimal_sets(corpus, "oc_2_1", CONTEXTS).minimal_sets == (frozenset({"i_short"}),)

    def test_cap(self, corpus, monkeypatch):
        monkeypatch.setenv("PSWORLD_MAX_SUBSETS", "2")
        with pytest.raises(SearchTooLargeError):
            find_minimal_sets(corpus, "oc_2_1", CONTEXTS)
        rep = find_minimal_sets(corpus, "oc_2_1", CONTEXTS, heuristic=True)
        assert not rep.certified and "heuristic" in rep.flags

    def test_against_oracle(self):
        rng = random.Random(21)
        for _ in range(200):
            m = random_model(rng)
            ctxs = [c.id for c in m.contexts]
            for o in m.outcomes:
                rows = [(oracle_active(m, c) & o.interactions, oracle_truth(o.groundings, oracle_active(m, c))) for c in ctxs]
                rep = find_minimal_sets(m, o.id, ctxs)
                assert sorted(map(sorted, rep.minimal_sets)) == sorted(map(sorted, oracle_minimal_sets(o.interactions, rows)))


class TestReduction:
    def test_maintenance_port_is_nonessential(self, maintenance):
        assert "i_maint" in find_nonessential(maintenance, DESIRED, CONTEXTS).removable

    def test_remove_maintenance_port(self, maintenance):
        reduced = reduce_model(maintenance, ["i_maint"], DESIRED, CONTEXTS)
        assert "i_maint" not in reduced.interaction_map
        every = [o.id for o in maintenance.outcomes]
        assert truth_table(reduced, every, CONTEXTS) == truth_table(maintenance, every, CONTEXTS)

    def test_empty_removal(self, corpus):
        assert reduce_model(corpus, [], DESIRED, CONTEXTS) is corpus

    def test_clock_to_light_is_essential(self, corpus):
        with pytest.raises(NotRemovableError) as exc:
            reduce_model(corpus, ["i_timer"], DESIRED, CONTEXTS)
        assert exc.value.rule == "not-removable"
        assert exc.value.counterexample[:3] == ("oc_1_1", "OpsC_1", True)

    def test_uncertified_removal_refused(self, corpus):
        # no desired verdict changes, but i_night is evidence for i_timer in OpsC_2
        with pytest.raises(NotRemovableError) as exc:
            reduce_model(corpus, ["i_night"], DESIRED, CONTEXTS)
        assert exc.value.uncertified == frozenset({"i_night"})
        assert exc.value.counterexample is None

    def test_vacuous(self, corpus):
        rep = find_nonessential(corpus, [], CONTEXTS)
        assert rep.vacuous and rep.removable == frozenset(corpus.interaction_map)

    def test_everything_essential(self, fixture_path):
        m = load_model(fixture_path("redundant-grounding.psw"))
        rep = find_nonessential(m, ["plant_stopped"], ["hot", "calm"])
        assert rep.removable == frozenset()

    def test_classification_is_context_free(self, corpus):
        for o in corpus.outcomes:
            assert len({evaluate_outcome(corpus, o.id, c).classification for c in CONTEXTS}) == 1
