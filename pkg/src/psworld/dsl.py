"""Text format (``.psw``) for world models: tokenizer, parser, serializer.

The format is block structured.  Each top-level block starts with a
keyword (``entity``, ``interaction``, ``boundary``, ``context``,
``outcome``, ``stakeholder``, ``requirement``, ``option``); newlines are
not significant and ``#`` starts a line comment.  A malformed block is
reported and skipped so that one run surfaces every syntax error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .diagnostics import Diagnostic, ModelSyntaxError, Severity, SourceSpan
from .model import (
    Boundary,
    ContextDecl,
    DesiredOutcomeLink,
    Emission,
    Entity,
    EntityKind,
    Firing,
    FunctionSpec,
    Goal,
    Interaction,
    OutcomeDecl,
    RelayRule,
    RequirementDecl,
    Stakeholder,
    StateMachine,
    WorldModel,
)

BLOCK_KEYWORDS = frozenset(
    {"entity", "interaction", "boundary", "context", "outcome", "stakeholder", "requirement", "option"}
)
KEYWORDS = BLOCK_KEYWORDS | {
    "kind", "function", "domain", "codomain", "map", "firing", "all", "any", "states",
    "initial", "on", "relay", "emits", "flow", "via", "recv", "internal", "external",
    "environment", "emit", "desired", "for", "grounding", "goal", "subject", "in", "out", "when",
}
OPTIONS = frozenset({"allow-self-loops"})

IDENT_RE = re.compile(r"[A-Za-z_](?:[A-Za-z0-9_.]|-(?!>))*")
_TOKEN_RE = re.compile(
    r"""
    (?P<nl>\n)
  | (?P<ws>[ \t\r\f]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<badstring>"[^\n]*)
  | (?P<arrow>->)
  | (?P<punct>[{},:])
  | (?P<ident>[A-Za-z_](?:[A-Za-z0-9_.]|-(?!>))*)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident | string | arrow | punct | eof
    text: str
    line: int
    column: int

    @property
    def length(self) -> int:
        return max(1, len(self.text))


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), body)


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")


def tokenize(text: str, file: str = "<string>") -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        col = m.start() - line_start + 1
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind in ("ws", "comment"):
            continue
        elif kind == "string":
            tokens.append(Token("string", m.group(), line, col))
        elif kind == "badstring":
            diags.append(_diag("syntax-error", "unterminated string", SourceSpan(file, line, col, len(m.group()))))
        elif kind == "bad":
            diags.append(_diag("syntax-error", f"unexpected character {m.group()!r}", SourceSpan(file, line, col, 1)))
        else:
            tokens.append(Token(kind, m.group(), line, col))
    last_line = text.count("\n") + 1
    last_col = len(text) - (text.rfind("\n") + 1) + 1
    tokens.append(Token("eof", "", last_line, last_col))
    return tokens, diags


def _diag(rule: str, message: str, span: SourceSpan | None) -> Diagnostic:
    return Diagnostic(Severity.ERROR, rule, message, span)


class _Fail(Exception):
    pass


@dataclass
class Declarations:
    """Everything one parse produced, in declaration order."""

    entities: list[Entity] = field(default_factory=list)
    interactions: list[Interaction] = field(default_factory=list)
    boundaries: list[Boundary] = field(default_factory=list)
    contexts: list[ContextDecl] = field(default_factory=list)
    outcomes: list[OutcomeDecl] = field(default_factory=list)
    stakeholders: list[Stakeholder] = field(default_factory=list)
    desired: list[DesiredOutcomeLink] = field(default_factory=list)
    requirements: list[RequirementDecl] = field(default_factory=list)
    options: set[str] = field(default_factory=set)
    spans: dict[tuple[str, str], SourceSpan] = field(default_factory=dict)


class Parser:
    def __init__(self, text: str, file: str = "<string>") -> None:
        self.file = file
        self.tokens, self.diagnostics = tokenize(text, file)
        self.pos = 0
        self.decls = Declarations()
        self._seen: dict[str, set[str]] = {}

    # token helpers

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def span(self, tok: Token) -> SourceSpan:
        return SourceSpan(self.file, tok.line, tok.column, tok.length)

    def error(self, tok: Token, message: str, rule: str = "syntax-error") -> _Fail:
        self.diagnostics.append(_diag(rule, message, self.span(tok)))
        return _Fail()

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind in ("ident", "punct", "arrow") and tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            tok = self.peek()
            raise self.error(tok, f"expected {text!r}, found {_describe(tok)}")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error(tok, f"expected {what}, found {_describe(tok)}")
        if tok.text in KEYWORDS:
            raise self.error(tok, f"keyword {tok.text!r} cannot be used as {what}")
        return self.advance()

    def string(self) -> str | None:
        if self.peek().kind == "string":
            return _unescape(self.advance().text[1:-1])
        return None

    def idset(self) -> list[str]:
        self.expect("{")
        items: list[str] = []
        if not self.at("}"):
            items.append(self.ident().text)
            while self.accept(","):
                items.append(self.ident().text)
        self.expect("}")
        return items

    def declare(self, ns: str, tok: Token, key: str | None = None) -> bool:
        key = key or tok.text
        seen = self._seen.setdefault(ns, set())
        if key in seen:
            self.error(tok, f"duplicate {ns} id {tok.text!r}", rule="duplicate-id")
            return False
        seen.add(key)
        self.decls.spans[(ns, key)] = self.span(tok)
        return True

    # top level

    def parse(self) -> Declarations:
        while self.peek().kind != "eof":
            start = self.pos
            tok = self.peek()
            try:
                if tok.kind == "ident" and tok.text in BLOCK_KEYWORDS:
                    getattr(self, "_" + tok.text)()
                elif tok.kind == "ident":
                    raise self.error(tok, f"unknown keyword {tok.text!r}", rule="unknown-keyword")
                else:
                    raise self.error(tok, f"expected a block keyword, found {_describe(tok)}")
            except _Fail:
                self._recover(start)
        return self.decls

    def _recover(self, start: int) -> None:
        depth = 0
        i = start
        error_at = max(self.pos, start + 1)
        while i < len(self.tokens) - 1:
            tok = self.tokens[i]
            if i >= error_at and tok.kind == "ident" and tok.text in BLOCK_KEYWORDS and (depth <= 0 or tok.column == 1):
                break
            if tok.text == "{" and tok.kind == "punct":
                depth += 1
            elif tok.text == "}" and tok.kind == "punct":
                depth -= 1
            i += 1
        self.pos = i

    # blocks

    def _option(self) -> None:
        self.advance()
        tok = self.peek()
        if tok.kind != "ident" or tok.text not in OPTIONS:
            raise self.error(tok, f"unknown option {tok.text!r}", rule="unknown-keyword")
        self.advance()
        self.decls.options.add(tok.text)

    def _entity(self) -> None:
        self.advance()
        name = self.ident("entity id")
        self.expect("kind")
        ktok = self.peek()
        try:
            kind = EntityKind(ktok.text) if ktok.kind == "ident" else None
        except ValueError:
            kind = None
        if kind is None:
            raise self.error(ktok, f"expected internal, external or environment, found {_describe(ktok)}")
        self.advance()
        functions: list[FunctionSpec] = []
        relay: list[RelayRule] = []
        emits: list[tuple[str, str]] = []
        fnames: set[str] = set()
        if self.accept("{"):
            while not self.accept("}"):
                tok = self.peek()
                if self.at("function"):
                    f = self._function(name.text)
                    if f.name in fnames:
                        raise self.error(tok, f"duplicate function {f.name!r} in {name.text}", rule="duplicate-id")
                    fnames.add(f.name)
                    functions.append(f)
                elif self.accept("relay"):
                    received = self.ident("flow").text
                    self.expect("->")
                    emitted = self.ident("flow").text
                    self.expect("on")
                    relay.append(RelayRule(received, emitted, self.ident("interaction id").text))
                elif self.accept("emits"):
                    flow = self.ident("flow").text
                    self.expect("on")
                    emits.append((flow, self.ident("interaction id").text))
                else:
                    raise self.error(tok, f"expected function, relay, emits or '}}', found {_describe(tok)}")
        if self.declare("entity", name):
            self.decls.entities.append(Entity(name.text, kind, tuple(functions), tuple(relay), tuple(emits)))

    def _function(self, owner: str) -> FunctionSpec:
        self.expect("function")
        name = self.ident("function name")
        self.decls.spans[("function", f"{owner}.{name.text}")] = self.span(name)
        self.expect("domain")
        domain = frozenset(self.idset())
        self.expect("codomain")
        codomain = frozenset(self.idset())
        output_map: dict[str, frozenset[str]] = {}
        firing = Firing.ALL
        states: StateMachine | None = None
        while True:
            tok = self.peek()
            if self.accept("map"):
                src = self.ident("flow")
                self.expect("->")
                if src.text in output_map:
                    raise self.error(src, f"duplicate map entry for {src.text}", rule="duplicate-id")
                output_map[src.text] = frozenset(self.idset())
            elif self.accept("firing"):
                mode = self.peek()
                if mode.text not in ("all", "any"):
                    raise self.error(mode, f"expected all or any, found {_describe(mode)}")
                self.advance()
                firing = Firing(mode.text)
            elif self.at("states"):
                if states is not None:
                    raise self.error(tok, "states declared twice", rule="duplicate-id")
                states = self._states()
            else:
                break
        return FunctionSpec(name.text, domain, codomain, output_map, firing, states)

    def _states(self) -> StateMachine:
        self.expect("states")
        names = self.idset()
        self.expect("initial")
        initial = self.ident("state").text
        transitions: dict[tuple[str, str], str] = {}
        while self.accept("on"):
            s = self.ident("state")
            self.expect(",")
            flow = self.ident("flow").text
            self.expect("->")
            t = self.ident("state").text
            if (s.text, flow) in transitions:
                raise self.error(s, f"duplicate transition on ({s.text}, {flow})", rule="duplicate-id")
            transitions[(s.text, flow)] = t
        return StateMachine(tuple(dict.fromkeys(names)), initial, transitions)

    def _interaction(self) -> None:
        self.advance()
        name = self.ident("interaction id")
        self.expect(":")
        src = self.ident("entity id").text
        self.expect("->")
        dst = self.ident("entity id").text
        self.expect("flow")
        flow = self.ident("flow").text
        via = self.ident("interface").text if self.accept("via") else None
        recv = self.ident("function name").text if self.accept("recv") else None
        if self.declare("interaction", name):
            self.decls.interactions.append(Interaction(name.text, src, dst, flow, via, recv))

    def _boundary(self) -> None:
        tok = self.advance()
        self.expect("internal")
        internal = frozenset(self.idset())
        external = frozenset(self.idset()) if self.accept("external") else None
        if self.decls.boundaries:
            raise self.error(tok, "boundary declared more than once", rule="duplicate-id")
        self.decls.spans[("boundary", "boundary")] = self.span(tok)
        # external side defaults to the complement; resolved in build()
        self.decls.boundaries.append(Boundary(internal, external))  # type: ignore[arg-type]

    def _context(self) -> None:
        self.advance()
        name = self.ident("context id")
        self.expect("{")
        emissions: list[Emission] = []
        while not self.accept("}"):
            self.expect("emit")
            ent = self.ident("entity id").text
            self.expect("flow")
            flow = self.ident("flow").text
            self.expect("on")
            em = Emission(ent, flow, self.ident("interaction id").text)
            if em not in emissions:
                emissions.append(em)
        if self.declare("context", name):
            self.decls.contexts.append(ContextDecl(name.text, tuple(emissions)))

    def _outcome(self) -> None:
        self.advance()
        name = self.ident("outcome id")
        desc = self.string() or ""
        supports = None
        if self.accept("desired"):
            self.expect("for")
            supports = frozenset(self.idset())
        groundings: list[frozenset[str]] = []
        while self.accept("grounding"):
            alt = frozenset(self.idset())
            if alt not in groundings:
                groundings.append(alt)
        if self.declare("outcome", name):
            self.decls.outcomes.append(OutcomeDecl(name.text, tuple(groundings), desc))
            if supports is not None:
                self.decls.desired.append(DesiredOutcomeLink(name.text, supports))

    def _stakeholder(self) -> None:
        self.advance()
        name = self.ident("stakeholder id")
        desc = self.string() or ""
        goals: list[Goal] = []
        while self.accept("goal"):
            gtok = self.ident("goal id")
            if self.declare("goal", gtok):
                goals.append(Goal(gtok.text, self.string() or ""))
            else:
                self.string()
        if self.declare("stakeholder", name):
            self.decls.stakeholders.append(Stakeholder(name.text, tuple(goals), desc))

    def _requirement(self) -> None:
        self.advance()
        name = self.ident("requirement id")
        self.expect("subject")
        subject = self.ident("entity id").text
        self.expect("in")
        inp = self.ident("flow").text
        self.expect("out")
        out = self.ident("flow").text
        cond = self.ident("context id").text if self.accept("when") else None
        if self.declare("requirement", name):
            self.decls.requirements.append(RequirementDecl(name.text, subject, inp, out, cond))


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


def parse_declarations(text: str, file: str = "<string>") -> Declarations:
    """Parse blocks without assembling a model; raises on any syntax error."""
    p = Parser(text, file)
    decls = p.parse()
    if p.diagnostics:
        raise ModelSyntaxError(sorted(p.diagnostics, key=_diag_key))
    return decls


def _diag_key(d: Diagnostic):
    return (d.span.line, d.span.column) if d.span else (0, 0)


def build_model(decls: Declarations) -> WorldModel:
    universe = frozenset(e.id for e in decls.entities)
    boundary = None
    if decls.boundaries:
        b = decls.boundaries[0]
        external = b.external if b.external is not None else universe - b.internal
        boundary = Boundary(b.internal, external)
    return WorldModel(
        entities=tuple(decls.entities),
        interactions=tuple(decls.interactions),
        boundary=boundary,
        contexts=tuple(decls.contexts),
        outcomes=tuple(decls.outcomes),
        stakeholders=tuple(decls.stakeholders),
        desired=tuple(decls.desired),
        requirements=tuple(decls.requirements),
        allow_self_loops="allow-self-loops" in decls.options,
        spans=dict(decls.spans),
    )


def parse_model(text: str, file: str = "<string>") -> WorldModel:
    """Parse a complete model.  Raises ModelSyntaxError listing every problem."""
    decls = parse_declarations(text, file)
    if not decls.entities:
        raise ModelSyntaxError(
            [_diag("no-entities", "model declares no entities", SourceSpan(file, 1, 1, 1))]
        )
    return build_model(decls)


def load_model(path) -> WorldModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), str(path))


# serialization


def _set(items) -> str:
    return "{" + ", ".join(sorted(items)) + "}"


def _function_lines(f: FunctionSpec) -> list[str]:
    lines = [f"  function {f.name} domain {_set(f.domain)} codomain {_set(f.codomain)}"]
    for src in sorted(f.output_map):
        lines.append(f"    map {src} -> {_set(f.output_map[src])}")
    if f.firing is not Firing.ALL:
        lines.append(f"    firing {f.firing.value}")
    if f.states is not None:
        sm = f.states
        lines.append(f"    states {{{', '.join(sm.states)}}} initial {sm.initial}")
        for (s, flow), t in sm.transitions.items():
            lines.append(f"      on {s}, {flow} -> {t}")
    return lines


def serialize_entity(e: Entity) -> str:
    head = f"entity {e.id} kind {e.kind.value}"
    if not (e.functions or e.relay or e.emits):
        return head
    lines = [head + " {"]
    for f in e.functions:
        lines.extend(_function_lines(f))
    for r in e.relay:
        lines.append(f"  relay {r.received} -> {r.emitted} on {r.interaction}")
    for flow, iid in e.emits:
        lines.append(f"  emits {flow} on {iid}")
    lines.append("}")
    return "\n".join(lines)


def serialize_interaction(i: Interaction) -> str:
    s = f"interaction {i.id}: {i.source} -> {i.dest} flow {i.flow}"
    if i.interface is not None:
        s += f" via {i.interface}"
    if i.dest_function is not None:
        s += f" recv {i.dest_function}"
    return s


def serialize_boundary(b: Boundary, universe: frozenset[str]) -> str:
    s = f"boundary internal {_set(b.internal)}"
    if b.external != universe - b.internal:
        s += f" external {_set(b.external)}"
    return s


def serialize_context(c: ContextDecl) -> str:
    lines = [f"context {c.id} {{"]
    lines += [f"  emit {em.entity} flow {em.flow} on {em.via}" for em in c.emissions]
    lines.append("}")
    return "\n".join(lines)


def serialize_outcome(o: OutcomeDecl, link: DesiredOutcomeLink | None = None) -> str:
    head = f"outcome {o.id}"
    if o.description:
        head += f' "{_escape(o.description)}"'
    if link is not None:
        head += f" desired for {_set(link.supports)}"
    return "\n".join([head] + [f"  grounding {_set(alt)}" for alt in o.groundings])


def serialize_stakeholder(s: Stakeholder) -> str:
    head = f"stakeholder {s.id}"
    if s.description:
        head += f' "{_escape(s.description)}"'
    lines = [head]
    for g in s.goals:
        lines.append(f"  goal {g.id}" + (f' "{_escape(g.description)}"' if g.description else ""))
    return "\n".join(lines)


def serialize_requirement(q: RequirementDecl) -> str:
    s = f"requirement {q.id} subject {q.subject} in {q.input} out {q.output}"
    if q.condition is not None:
        s += f" when {q.condition}"
    return s


def serialize_model(model: WorldModel) -> str:
    blocks: list[str] = []
    header = [f"# {line}" for p in model.provenance for line in p.splitlines()]
    if header:
        blocks.append("\n".join(header))
    if model.allow_self_loops:
        blocks.append("option allow-self-loops")
    blocks += [serialize_entity(e) for e in model.entities]
    blocks += [serialize_interaction(i) for i in model.interactions]
    if model.boundary is not None:
        blocks.append(serialize_boundary(model.boundary, model.entity_ids))
    blocks += [serialize_context(c) for c in model.contexts]
    blocks += [serialize_stakeholder(s) for s in model.stakeholders]
    links = model.desired_map
    blocks += [serialize_outcome(o, links.get(o.id)) for o in model.outcomes]
    blocks += [serialize_requirement(q) for q in model.requirements]
    return "\n\n".join(blocks) + "\n"
