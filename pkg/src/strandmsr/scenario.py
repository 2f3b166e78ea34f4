"""Scenario files: principals, compliance, channel properties, adversary
knowledge and search bounds.

One ``key = value`` per line, ``#`` starts a comment::

    initiator = A
    responder = B
    ttp = T
    variant = corrected
    compliant = A B T
    sessions = 1
    channel A -> T = resilient readable
    knowledge = text:Mx ; key:Kx
    bounds = initiator:1 responder:1 ttp:3
    depth = 8
    budget = 10000
    drop = eor
    expect = attack

Channels not listed are readable, and their messages are guaranteed exactly
when the protocol marks them so; ``resilient`` or ``droppable`` overrides
that.  ``drop`` names messages the network loses in simulation mode.  ``expect`` (``attack`` or ``no-attack``)
states what an attack search should find.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .terms import Atom, ParseError as TermParseError, name, nonce, parse_term, render, \
    symkey, text
from .wang import CORRECTED, VARIANTS, SessionParams

RESILIENT, DROPPABLE = "resilient", "droppable"
READABLE, CONFIDENTIAL = "readable", "confidential"
ATTACK, NO_ATTACK = "attack", "no-attack"
DEFAULT_BOUNDS = (("initiator", 1), ("responder", 1), ("ttp", 3))
MESSAGE_LABELS = ("msg1", "eor", "keys", "abort_req", "recover_req", "confirm_req",
                  "at", "rtok", "abort_token", "confirmed")


class ScenarioError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class Channel:
    """``resilience`` is None when the protocol decides per message."""
    resilience: Optional[str] = None
    readability: str = READABLE

    @property
    def resilient(self) -> bool:
        return self.resilience == RESILIENT

    @property
    def droppable(self) -> bool:
        return self.resilience == DROPPABLE

    @property
    def confidential(self) -> bool:
        return self.readability == CONFIDENTIAL


@dataclass(frozen=True)
class Scenario:
    initiator: Atom = name("A")
    responder: Atom = name("B")
    ttp: Atom = name("T")
    variant: str = CORRECTED
    compliant: frozenset = frozenset({name("A"), name("B"), name("T")})
    sessions: int = 1
    channels: tuple = ()
    knowledge: tuple = ()
    bounds: tuple = DEFAULT_BOUNDS
    depth: int = 8
    budget: int = 10_000
    drop: tuple = ()
    expect: str = ATTACK

    def __post_init__(self):
        object.__setattr__(self, "compliant", frozenset(self.compliant))
        object.__setattr__(self, "channels", tuple(sorted(self.channels, key=lambda c: (c[0].id, c[1].id))))
        if self.variant not in VARIANTS:
            raise ScenarioError(f"unknown variant {self.variant!r}")
        if self.expect not in (ATTACK, NO_ATTACK):
            raise ScenarioError(f"unknown expectation {self.expect!r}")
        if len({self.initiator, self.responder, self.ttp}) != 3:
            raise ScenarioError("initiator, responder and ttp must be distinct")

    @property
    def principals(self) -> tuple:
        return (self.initiator, self.responder, self.ttp)

    def channel(self, src: Atom, dst: Atom) -> Channel:
        for a, b, ch in self.channels:
            if a == src and b == dst:
                return ch
        return Channel()

    def bound(self, kind: str) -> int:
        return dict(self.bounds)[kind]

    def is_compliant(self, p: Optional[Atom]) -> bool:
        return p in self.compliant

    def session_params(self) -> Tuple[SessionParams, ...]:
        out = []
        for i in range(self.sessions):
            sfx = "" if self.sessions == 1 else str(i + 1)
            out.append(SessionParams(self.initiator, self.responder, self.ttp,
                                     text("M" + sfx), symkey("K" + sfx), nonce("R" + sfx)))
        return tuple(out)

    def with_(self, **kw) -> "Scenario":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return Scenario(**d)


_LINE = re.compile(r"^\s*(?P<key>[a-z_]+)(?P<rest>[^=]*)=(?P<val>.*)$")
_CHAN = re.compile(r"^\s*(\w+)\s*->\s*(\w+)\s*$")
_KEYS = ("initiator", "responder", "ttp", "variant", "compliant", "sessions", "channel",
         "knowledge", "bounds", "depth", "budget", "drop", "expect")


def _int(v: str, line: int, lo: int = 0) -> int:
    try:
        n = int(v)
    except ValueError:
        raise ScenarioError(f"expected an integer, got {v!r}", line) from None
    if n < lo:
        raise ScenarioError(f"value must be at least {lo}", line)
    return n


def parse_scenario(src: str) -> Scenario:
    kw: Dict[str, object] = {}
    channels = []
    seen = set()
    pending_compliant = None
    for ln, raw in enumerate(src.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        m = _LINE.match(body)
        if not m:
            raise ScenarioError(f"expected 'key = value', got {body!r}", ln)
        key, rest, val = m["key"], m["rest"].strip(), m["val"].strip()
        if key not in _KEYS:
            raise ScenarioError(f"unknown key {key!r}", ln)
        if key != "channel":
            if rest:
                raise ScenarioError(f"unexpected text {rest!r} after {key!r}", ln)
            if key in seen:
                raise ScenarioError(f"duplicate key {key!r}", ln)
            seen.add(key)
        if key in ("initiator", "responder", "ttp"):
            if not re.fullmatch(r"[A-Za-z_]\w*", val):
                raise ScenarioError(f"bad principal name {val!r}", ln)
            kw[key] = name(val)
        elif key == "variant":
            if val not in VARIANTS:
                raise ScenarioError(f"unknown variant {val!r}", ln)
            kw[key] = val
        elif key == "compliant":
            pending_compliant = (val.split(), ln)
        elif key in ("sessions", "depth"):
            kw[key] = _int(val, ln)
        elif key == "budget":
            kw[key] = _int(val, ln, 1)
        elif key == "channel":
            cm = _CHAN.match(rest)
            if not cm:
                raise ScenarioError("channel needs 'SRC -> DST'", ln)
            flags = set(val.split())
            bad = flags - {RESILIENT, DROPPABLE, READABLE, CONFIDENTIAL}
            if bad:
                raise ScenarioError(f"unknown channel flag {sorted(bad)[0]!r}", ln)
            if {RESILIENT, DROPPABLE} <= flags or {READABLE, CONFIDENTIAL} <= flags:
                raise ScenarioError("contradictory channel flags", ln)
            res = RESILIENT if RESILIENT in flags else (DROPPABLE if DROPPABLE in flags else None)
            ch = Channel(res,
                         CONFIDENTIAL if CONFIDENTIAL in flags else READABLE)
            channels.append((name(cm[1]), name(cm[2]), ch, ln))
        elif key == "knowledge":
            terms = []
            for part in filter(None, (p.strip() for p in val.split(";"))):
                try:
                    terms.append(parse_term(part))
                except TermParseError as exc:
                    raise ScenarioError(f"bad term: {exc}", ln) from None
            kw[key] = tuple(terms)
        elif key == "bounds":
            b = dict(DEFAULT_BOUNDS)
            for item in val.split():
                k, _, n = item.partition(":")
                if k not in b:
                    raise ScenarioError(f"unknown bound {k!r}", ln)
                b[k] = _int(n, ln)
            kw[key] = tuple(b.items())
        elif key == "drop":
            labels = tuple(val.split())
            for l in labels:
                if l not in MESSAGE_LABELS:
                    raise ScenarioError(f"unknown message label {l!r}", ln)
            kw[key] = labels
        elif key == "expect":
            if val not in (ATTACK, NO_ATTACK):
                raise ScenarioError(f"expect must be {ATTACK!r} or {NO_ATTACK!r}", ln)
            kw[key] = val
    sc_names = {kw.get("initiator", name("A")), kw.get("responder", name("B")),
                kw.get("ttp", name("T"))}
    if len(sc_names) != 3:
        raise ScenarioError("initiator, responder and ttp must be distinct")
    if pending_compliant is not None:
        names_, ln = pending_compliant
        comp = {name(n) for n in names_}
        if not comp <= sc_names:
            raise ScenarioError(f"compliant principal {sorted(n.id for n in comp - sc_names)[0]} "
                                "is not a participant", ln)
        kw["compliant"] = frozenset(comp)
    out = []
    for a, b, ch, ln in channels:
        if a not in sc_names or b not in sc_names or a == b:
            raise ScenarioError(f"channel {a.id} -> {b.id} must join two distinct participants", ln)
        if any(x == a and y == b for x, y, _ in out):
            raise ScenarioError(f"duplicate channel {a.id} -> {b.id}", ln)
        out.append((a, b, ch))
    kw["channels"] = tuple(out)
    return Scenario(**kw)


def render_scenario(sc: Scenario) -> str:
    lines = [f"initiator = {sc.initiator.id}", f"responder = {sc.responder.id}",
             f"ttp = {sc.ttp.id}", f"variant = {sc.variant}",
             "compliant = " + " ".join(sorted(p.id for p in sc.compliant)),
             f"sessions = {sc.sessions}"]
    for a, b, ch in sc.channels:
        flags = ([ch.resilience] if ch.resilience else []) + [ch.readability]
        lines.append(f"channel {a.id} -> {b.id} = " + " ".join(flags))
    if sc.knowledge:
        lines.append("knowledge = " + " ; ".join(render(t) for t in sc.knowledge))
    lines.append("bounds = " + " ".join(f"{k}:{n}" for k, n in sc.bounds))
    lines += [f"depth = {sc.depth}", f"budget = {sc.budget}"]
    if sc.drop:
        lines.append("drop = " + " ".join(sc.drop))
    lines.append(f"expect = {sc.expect}")
    return "\n".join(lines) + "\n"


def load_scenario(path: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
