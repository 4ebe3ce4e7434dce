"""Interactive problem-framing session with undo and replay.

Mutating commands take DSL fragments, so anything typed at the prompt is
exactly what ``save`` writes back out.  Every command line is recorded;
replaying the recorded lines on the starting model rebuilds the current one.
"""

from __future__ import annotations

import re
import shlex
import sys
from dataclasses import dataclass, replace
from typing import Callable, Iterable, TextIO

from .activation import ActiveSet, compute_active_set, explain_activation
from .boundary import rescope
from .diagnostics import Diagnostic, ModelSyntaxError, PsworldError
from .dsl import build_model, parse_declarations, serialize_model
from .model import Boundary, WorldModel
from .outcomes import evaluate_outcome, find_minimal_sets
from .sufficiency import audit_sufficiency
from .validate import validate_model

USAGE = {
    "entity": "entity ID kind internal|external|environment [{ ... }]",
    "boundary": "boundary {ID, ...}",
    "interact": "interact ID: SRC -> DST flow FLOW [via IFACE]",
    "context": "context ID { emit ENV flow FLOW on IID ... }",
    "outcome": 'outcome ID ["text"] [desired for {GOAL, ...}] [grounding {IID, ...}]...',
    "stakeholder": 'stakeholder ID ["text"] goal GID ["text"] ...',
    "activate": "activate CONTEXT",
    "eval": "eval OUTCOME CONTEXT",
    "why": "why INTERACTION",
    "minimal": "minimal OUTCOME",
    "rescope": "rescope {ID, ...}",
    "audit": "audit",
    "undo": "undo",
    "save": "save PATH",
    "show": "show",
    "check": "check",
    "help": "help",
    "quit": "quit",
}

# keyword the fragment is parsed under, per mutating command
_FRAGMENT = {
    "entity": "entity",
    "interact": "interaction",
    "context": "context",
    "outcome": "outcome",
    "stakeholder": "stakeholder",
}


def parse_idset(text: str) -> list[str]:
    body = text.strip()
    if body.startswith("{") and body.endswith("}"):
        body = body[1:-1]
    return [x for x in re.split(r"[\s,]+", body) if x]


def _diag_key(d: Diagnostic) -> tuple[str, str, str]:
    return (d.rule, d.location or "", d.message)


def _plain(d: Diagnostic) -> str:
    # spans point into the merged session text, not at anything the user typed
    return replace(d, span=None).render()


@dataclass(frozen=True)
class HistoryEntry:
    command: str
    inverse: str


class Session:
    def __init__(self, model: WorldModel | None = None, out: TextIO | None = None) -> None:
        self.initial = model if model is not None else WorldModel()
        self.model = self.initial
        self.out = out
        self.history: list[HistoryEntry] = []
        self._stack: list[WorldModel] = []
        self.last_active: ActiveSet | None = None
        self.done = False
        self._known = {_diag_key(d) for d in validate_model(self.model)} if self.model.entities else set()

    # plumbing

    def _emit(self, lines: list[str]) -> str:
        text = "\n".join(lines)
        if self.out is not None and text:
            print(text, file=self.out)
        return text

    def _apply(self, line: str, new: WorldModel, inverse: str) -> list[str]:
        self._stack.append(self.model)
        self.history.append(HistoryEntry(line, inverse))
        self.model = new
        self.last_active = None
        diags = validate_model(new)
        fresh = [d for d in diags if _diag_key(d) not in self._known]
        self._known = {_diag_key(d) for d in diags}
        return ["ok"] + [_plain(d) for d in fresh]

    def _merge(self, fragment: str) -> WorldModel:
        text = serialize_model(self.model) if self.model.entities or self.model.interactions else ""
        decls = parse_declarations(text + "\n" + fragment + "\n", "<session>")
        return replace(build_model(decls), provenance=self.model.provenance)

    # commands

    def execute(self, line: str) -> str:
        line = line.strip()
        if not line or line.startswith("#"):
            return ""
        cmd, _, rest = line.partition(" ")
        rest = rest.strip()
        handler: Callable[[str, str], list[str]] | None = getattr(self, f"_cmd_{cmd}", None)
        if cmd in _FRAGMENT:
            handler = self._cmd_fragment
        if handler is None:
            return self._emit([f"unknown command {cmd!r}; type help"])
        try:
            return self._emit(handler(cmd, rest) if handler == self._cmd_fragment else handler(line, rest))
        except ModelSyntaxError as exc:
            return self._emit([_plain(d) for d in exc.diagnostics] + [f"usage: {USAGE.get(cmd, cmd)}"])
        except _Usage:
            return self._emit([f"usage: {USAGE[cmd]}"])
        except PsworldError as exc:
            return self._emit([f"error[{exc.rule}]: {exc}"])
        except OSError as exc:
            return self._emit([f"error[io]: {exc}"])

    def _cmd_fragment(self, cmd: str, rest: str) -> list[str]:
        if not rest:
            raise _Usage
        line = f"{cmd} {rest}"
        new = self._merge(f"{_FRAGMENT[cmd]} {rest}")
        ident = re.split(r"[\s:{]", rest, maxsplit=1)[0]
        return self._apply(line, new, f"remove {_FRAGMENT[cmd]} {ident}")

    def _cmd_boundary(self, line: str, rest: str) -> list[str]:
        ids = parse_idset(rest)
        if not ids:
            raise _Usage
        inside = frozenset(ids)
        new = replace(self.model, boundary=Boundary.around(inside, self.model.entity_ids))
        prev = self.model.boundary
        inverse = "restore no boundary" if prev is None else f"restore boundary {{{', '.join(sorted(prev.internal))}}}"
        return self._apply(line, new, inverse)

    def _cmd_rescope(self, line: str, rest: str) -> list[str]:
        ids = parse_idset(rest)
        if not ids:
            raise _Usage
        new, plan = rescope(self.model, ids)
        lines = self._apply(line, new, "restore previous boundary and kinds")
        for iid, (a, b) in sorted(plan.reclassification.items()):
            lines.append(f"  {iid}: {a.value} -> {b.value}")
        return lines

    def _cmd_activate(self, line: str, rest: str) -> list[str]:
        if len(rest.split()) != 1:
            raise _Usage
        self.last_active = compute_active_set(self.model, rest)
        lines = [f"IR*({rest}) = {{{', '.join(self.last_active.ordered())}}}"]
        return lines + [_plain(d) for d in self.last_active.diagnostics]

    def _cmd_eval(self, line: str, rest: str) -> list[str]:
        args = rest.split()
        if len(args) != 2:
            raise _Usage
        v = evaluate_outcome(self.model, args[0], args[1])
        lines = [f"{v.outcome} @ {v.context} = {'TRUE' if v.truth else 'FALSE'} ({v.classification.value})"]
        if v.witness is not None:
            lines.append(f"  witness {{{', '.join(sorted(v.witness))}}}")
        return lines

    def _cmd_why(self, line: str, rest: str) -> list[str]:
        if len(rest.split()) != 1:
            raise _Usage
        if self.last_active is None:
            return ["no context activated yet; use activate CONTEXT first"]
        return explain_activation(self.last_active, rest).render()

    def _cmd_minimal(self, line: str, rest: str) -> list[str]:
        if len(rest.split()) != 1:
            raise _Usage
        rep = find_minimal_sets(self.model, rest, self.model.context_map)
        lines = [f"minimal sets for {rep.outcome}:"]
        lines += [f"  {{{', '.join(sorted(m))}}}" for m in rep.minimal_sets] or ["  (none)"]
        if rep.flags:
            lines.append(f"  flags: {', '.join(rep.flags)}")
        return lines

    def _cmd_audit(self, line: str, rest: str) -> list[str]:
        desired = [d.outcome for d in self.model.desired]
        return audit_sufficiency(self.model, desired, [c.id for c in self.model.contexts]).render().splitlines()

    def _cmd_check(self, line: str, rest: str) -> list[str]:
        diags = validate_model(self.model)
        return [d.render() for d in diags] or ["no diagnostics"]

    def _cmd_undo(self, line: str, rest: str) -> list[str]:
        if not self._stack:
            return ["nothing to undo"]
        self.model = self._stack.pop()
        entry = self.history.pop()
        self.last_active = None
        self._known = {_diag_key(d) for d in validate_model(self.model)}
        return [f"undone: {entry.command} ({entry.inverse})"]

    def _cmd_save(self, line: str, rest: str) -> list[str]:
        if not rest:
            raise _Usage
        path = shlex.split(rest)[0]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(serialize_model(self.model))
        return [f"saved {path}"]

    def _cmd_show(self, line: str, rest: str) -> list[str]:
        return serialize_model(self.model).rstrip("\n").splitlines()

    def _cmd_help(self, line: str, rest: str) -> list[str]:
        return [f"  {u}" for u in USAGE.values()]

    def _cmd_quit(self, line: str, rest: str) -> list[str]:
        self.done = True
        return []

    _cmd_exit = _cmd_quit

    # history

    @property
    def commands(self) -> list[str]:
        return [h.command for h in self.history]

    @classmethod
    def replay(cls, commands: Iterable[str], model: WorldModel | None = None) -> Session:
        s = cls(model)
        for line in commands:
            s.execute(line)
        return s


class _Usage(Exception):
    pass


def run(session: Session, stream: TextIO = sys.stdin, prompt: bool | None = None) -> int:
    if prompt is None:
        prompt = stream.isatty()
    while not session.done:
        if prompt:
            print("psworld> ", end="", file=session.out or sys.stdout, flush=True)
        line = stream.readline()
        if not line:
            break
        session.execute(line)
    return 0
