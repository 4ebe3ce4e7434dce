from __future__ import annotations

import random

import pytest
from hypothesis import given, settings

from psworld import ModelSyntaxError, load_model, parse_model, reduce_model, serialize_model
from psworld.dsl import parse_declarations

from conftest import CONTEXTS, DESIRED, corpus_text
from modelgen import models, random_model


def syntax_rules(text):
    with pytest.raises(ModelSyntaxError) as exc:
        parse_model(text, "t.psw")
    return exc.value.diagnostics


def test_corpus_shape(corpus):
    assert len(corpus.entities) == 5
    assert corpus.entity("traffic_light").functions[0].states.states == ("Red", "Yellow", "Green")
    assert corpus.span("entity", "clock").line == 17


def test_empty_file():
    (d,) = syntax_rules("# nothing here\n")
    assert d.rule == "no-entities"


def test_duplicate_entity_points_at_second(fixture_path):
    with pytest.raises(ModelSyntaxError) as exc:
        load_model(fixture_path("duplicate-id.psw"))
    (d,) = exc.value.diagnostics
    assert d.rule == "duplicate-id"
    assert (d.span.line, d.span.column) == (4, 8)


def test_unknown_keyword_is_an_error():
    diags = syntax_rules("entity a kind internal\nwidget b\n")
    assert [d.rule for d in diags] == ["unknown-keyword"]


def test_recovery_reports_every_bad_block():
    text = (
        "entity a kind internal {\n  function f domain {x} codomain {y}\n}\n"
        "interaction i1 a -> a flow x\n"
        "entity b kind sideways\n"
        "boundary internal {a}\n"
        "context c { emit a flow }\n"
    )
    diags = syntax_rules(text)
    assert [d.span.line for d in diags] == [4, 5, 7]


def test_spans_lie_inside_text():
    text = 'entity a kind internal {\n  function f domain {x codomain {y}\n}\noutcome o "unterminated\n'
    lines = text.split("\n")
    for d in syntax_rules(text):
        assert 1 <= d.span.line <= len(lines)
        assert 1 <= d.span.column <= len(lines[d.span.line - 1]) + 1


def test_parsing_is_deterministic():
    text = "entity a kind internal\nentity a kind internal\nbogus\n"
    assert [d.render() for d in syntax_rules(text)] == [d.render() for d in syntax_rules(text)]


def test_corpus_round_trip(corpus):
    text = serialize_model(corpus)
    again = parse_model(text)
    assert again == corpus
    assert serialize_model(again) == text


def test_minimal_model_three_blocks():
    text = (
        "entity sys kind internal {\n  function f domain {x} codomain {y}\n}\n"
        "entity src kind environment\n"
        "interaction i: src -> sys flow x\n"
    )
    out = serialize_model(parse_model(text))
    assert len(out.strip().split("\n\n")) == 3


def test_reduced_model_has_provenance_header(maintenance):
    reduced = reduce_model(maintenance, ["i_maint"], DESIRED, CONTEXTS)
    text = serialize_model(reduced)
    assert text.startswith("# reduced: removed i_maint")
    assert parse_model(text) == reduced


def test_strings_and_hyphenated_ids():
    text = 'entity pollution-sensor kind external\nstakeholder s "say \\"hi\\"" goal g "a\\\\b"\n'
    m = parse_model(text)
    assert m.entity("pollution-sensor")
    assert m.stakeholders[0].description == 'say "hi"'
    assert parse_model(serialize_model(m)) == m


def test_declarations_allow_fragments():
    decls = parse_declarations("outcome z desired for {g}")
    assert decls.outcomes[0].groundings == ()
    assert decls.desired[0].supports == frozenset({"g"})


def test_comments_and_layout_do_not_matter():
    a = parse_model(corpus_text())
    b = parse_model(" ".join(line.split("#")[0] for line in corpus_text().splitlines()))
    assert a == b


def test_random_round_trip_seeded():
    rng = random.Random(11)
    for _ in range(100):
        m = random_model(rng)
        assert parse_model(serialize_model(m)) == m


@settings(max_examples=50, deadline=None)
@given(models())
def test_random_round_trip_hypothesis(m):
    text = serialize_model(m)
    assert serialize_model(parse_model(text)) == text
