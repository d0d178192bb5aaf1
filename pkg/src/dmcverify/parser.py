"""Frontend: lexing/parsing of protocol files, macro expansion, validation."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DmcSyntaxError,
    MacroArityError,
    MacroRecursionError,
    SemanticError,
    ValidationFailure,
)
from .formulas import parse_formula_stream
from .lexer import TokenStream, tokenize
from .netspec import (
    AgentSpec,
    Angle,
    ClassicalRecv,
    ClassicalSend,
    Correct,
    Entangle,
    InputDecl,
    MacroCall,
    MacroDef,
    Measure,
    NetworkSpec,
    Pos,
    QuantumRecv,
    QuantumSend,
    QubitInit,
)
from .quantum import NORM_EPS


def parse(source):
    """Parse protocol source text into a NetworkSpec."""
    ts = TokenStream(tokenize(source))
    spec = _network(ts)
    ts.expect("EOF")
    return spec


def _pos(tok):
    return Pos(tok.line, tok.col)


def _identlist(ts):
    names = [ts.expect("IDENT").text]
    while ts.accept(","):
        names.append(ts.expect("IDENT").text)
    return tuple(names)


def _number(ts):
    neg = ts.accept("-") is not None
    tok = ts.expect("NUMBER")
    val = float(tok.text)
    return -val if neg else val


def _amplitude(ts):
    if ts.accept("("):
        re = _number(ts)
        ts.expect(",")
        im = _number(ts)
        ts.expect(")")
        return complex(re, im)
    return complex(_number(ts), 0.0)


def _angle(ts):
    scale = None
    if ts.current.kind == "IDENT" and ts.current.text != "pi" and ts.peek(1).kind == "*":
        scale = ts.advance().text
        ts.expect("*")
    if ts.accept_keyword("pi"):
        if ts.accept("/"):
            denom = _number(ts)
            return Angle(math.pi / denom, f"pi/{_plain(denom)}", scale)
        return Angle(math.pi, "pi", scale)
    tok = ts.expect("NUMBER")
    return Angle(float(tok.text), tok.text, scale)


def _plain(x):
    return str(int(x)) if x == int(x) else repr(x)


def _event(ts):
    tok = ts.current
    if ts.at_keyword("E") and ts.peek(1).kind == "(":
        ts.advance()
        ts.expect("(")
        q = ts.expect("IDENT").text
        ts.expect(",")
        r = ts.expect("IDENT").text
        ts.expect(")")
        return Entangle(q, r, pos=_pos(tok))
    if (ts.at_keyword("X") or ts.at_keyword("Z")) and ts.peek(1).kind == "(":
        kind = ts.advance().text
        ts.expect("(")
        q = ts.expect("IDENT").text
        ts.expect(")")
        cond = None
        if ts.accept_keyword("if"):
            cond = ts.expect("IDENT").text
        return Correct(kind, q, cond, pos=_pos(tok))
    if ts.at_keyword("send"):
        ts.advance()
        to = ts.expect("IDENT").text
        ts.expect_keyword("classical")
        ts.expect("(")
        names = _identlist(ts)
        ts.expect(")")
        return ClassicalSend(to, names, pos=_pos(tok))
    if ts.at_keyword("receive"):
        ts.advance()
        frm = ts.expect("IDENT").text
        ts.expect_keyword("classical")
        ts.expect("(")
        names = _identlist(ts)
        ts.expect(")")
        return ClassicalRecv(frm, names, pos=_pos(tok))
    if ts.at_keyword("qsend"):
        ts.advance()
        to = ts.expect("IDENT").text
        q = ts.expect("IDENT").text
        return QuantumSend(to, q, pos=_pos(tok))
    if ts.at_keyword("qreceive"):
        ts.advance()
        frm = ts.expect("IDENT").text
        q = ts.expect("IDENT").text
        return QuantumRecv(frm, q, pos=_pos(tok))
    # measurement: IDENT = M(...)
    if tok.kind == "IDENT" and ts.peek(1).kind == "=" and ts.peek(2).text == "M":
        out = ts.advance().text
        ts.expect("=")
        ts.expect_keyword("M")
        ts.expect("(")
        q = ts.expect("IDENT").text
        ts.expect(",")
        angle = _angle(ts)
        s_dep = t_dep = None
        while ts.accept(","):
            key = ts.expect("IDENT")
            ts.expect("=")
            val = ts.expect("IDENT").text
            if key.text == "s":
                s_dep = val
            elif key.text == "t":
                t_dep = val
            else:
                raise DmcSyntaxError(
                    f"unknown measurement dependency {key.text!r}",
                    key.line, key.col, expected={"s", "t"},
                )
        ts.expect(")")
        return Measure(out, q, angle, s_dep, t_dep, pos=_pos(tok))
    if tok.kind == "IDENT" and ts.peek(1).kind == "(":
        name = ts.advance().text
        ts.expect("(")
        args = () if ts.current.kind == ")" else _identlist(ts)
        ts.expect(")")
        return MacroCall(name, args, pos=_pos(tok))
    raise DmcSyntaxError(
        f"unexpected token {tok.text!r}" if tok.text else "unexpected end of input",
        tok.line, tok.col, expected={"event"},
    )


def _network(ts):
    head = ts.expect_keyword("network")
    name = ts.expect("IDENT").text
    ts.expect("{")

    ts.expect_keyword("qubits")
    ts.expect("{")
    qinits = []
    while not ts.accept("}"):
        tok = ts.current
        qs = _identlist(ts)
        ts.expect("=")
        ts.expect("[")
        amps = [_amplitude(ts)]
        while ts.accept(","):
            amps.append(_amplitude(ts))
        ts.expect("]")
        ts.expect(";")
        if len(amps) != 2 ** len(qs):
            raise DmcSyntaxError(
                f"qubit set {qs} needs {2 ** len(qs)} amplitudes, got {len(amps)}",
                tok.line, tok.col,
            )
        qinits.append(QubitInit(qs, tuple(amps), pos=_pos(tok)))

    agents = []
    while ts.at_keyword("agent"):
        tok = ts.advance()
        aname = ts.expect("IDENT").text
        inputs = []
        if ts.accept("("):
            ts.expect_keyword("inputs")
            ts.expect(":")
            while True:
                vname = ts.expect("IDENT").text
                pin = None
                if ts.accept("="):
                    bit = ts.expect("NUMBER")
                    if bit.text not in ("0", "1"):
                        raise DmcSyntaxError(
                            "input pin must be 0 or 1", bit.line, bit.col
                        )
                    pin = int(bit.text)
                inputs.append(InputDecl(vname, pin))
                if not ts.accept(","):
                    break
            ts.expect(")")
        owns = ()
        if ts.accept_keyword("owns"):
            owns = _identlist(ts)
        knows = ()
        if ts.accept_keyword("knows"):
            knows = _identlist(ts)
        ts.expect("{")
        events = []
        while not ts.accept("}"):
            events.append(_event(ts))
            ts.expect(";")
        agents.append(
            AgentSpec(aname, tuple(inputs), owns, knows, tuple(events), pos=_pos(tok))
        )
    if not agents and not ts.at_keyword("groups") and not ts.at_keyword("formulae"):
        tok = ts.current
        raise DmcSyntaxError(
            f"unexpected token {tok.text!r}", tok.line, tok.col,
            expected={"agent", "groups", "formulae"},
        )

    groups = []
    if ts.accept_keyword("groups"):
        ts.expect("{")
        while not ts.accept("}"):
            gname = ts.expect("IDENT").text
            ts.expect("=")
            ts.expect("{")
            members = _identlist(ts)
            ts.expect("}")
            ts.expect(";")
            groups.append((gname, members))

    ts.expect_keyword("formulae")
    ts.expect("{")
    formulas = []
    while not ts.accept("}"):
        formulas.append(parse_formula_stream(ts))
        ts.expect(";")

    macros = []
    if ts.accept_keyword("macros"):
        ts.expect("{")
        while not ts.accept("}"):
            tok = ts.current
            mname = ts.expect("IDENT").text
            ts.expect("(")
            params = () if ts.current.kind == ")" else _identlist(ts)
            ts.expect(")")
            ts.expect("=")
            ts.expect("[")
            body = []
            while not ts.accept("]"):
                body.append(_event(ts))
                ts.expect(";")
            ts.expect(";")
            macros.append(MacroDef(mname, params, tuple(body), pos=_pos(tok)))

    ts.expect("}")
    return NetworkSpec(
        name,
        tuple(qinits),
        tuple(agents),
        tuple(groups),
        tuple(formulas),
        tuple(macros),
        pos=_pos(head),
    )


# ---------------------------------------------------------------------------
# Macro expansion
# ---------------------------------------------------------------------------

def _subst_event(ev, mapping):
    def m(x):
        return mapping.get(x, x) if x is not None else None

    if isinstance(ev, Entangle):
        return Entangle(m(ev.q), m(ev.r), pos=ev.pos)
    if isinstance(ev, Measure):
        angle = ev.angle
        if angle.scale_var:
            angle = Angle(angle.value, angle.text, m(angle.scale_var))
        return Measure(m(ev.outcome_var), m(ev.q), angle, m(ev.s_dep), m(ev.t_dep), pos=ev.pos)
    if isinstance(ev, Correct):
        return Correct(ev.kind, m(ev.q), m(ev.condition), pos=ev.pos)
    if isinstance(ev, MacroCall):
        return MacroCall(ev.name, tuple(m(a) for a in ev.args), pos=ev.pos)
    raise SemanticError(
        f"macro bodies may contain only quantum events, found {type(ev).__name__}",
        ev.pos.line if ev.pos else None,
        ev.pos.col if ev.pos else None,
    )


def expand_macros(spec):
    """Inline every macro invocation; the result contains no MacroCall."""
    defs = {}
    for m in spec.macros:
        if m.name in defs:
            raise SemanticError(f"duplicate macro {m.name}")
        defs[m.name] = m

    def expand_call(call, stack):
        if call.name not in defs:
            raise SemanticError(
                f"unknown macro {call.name}",
                call.pos.line if call.pos else None,
                call.pos.col if call.pos else None,
            )
        if call.name in stack:
            chain = " -> ".join(stack + (call.name,))
            raise MacroRecursionError(f"recursive macro expansion: {chain}")
        macro = defs[call.name]
        if len(macro.params) != len(call.args):
            raise MacroArityError(
                f"macro {call.name} takes {len(macro.params)} arguments, "
                f"got {len(call.args)}"
            )
        mapping = dict(zip(macro.params, call.args))
        out = []
        for ev in macro.body:
            ev = _subst_event(ev, mapping)
            if isinstance(ev, MacroCall):
                out.extend(expand_call(ev, stack + (call.name,)))
            else:
                out.append(ev)
        return out

    if not spec.macros:
        # still reject calls to undefined macros
        for ag in spec.agents:
            for ev in ag.events:
                if isinstance(ev, MacroCall):
                    raise SemanticError(f"unknown macro {ev.name}")
        return spec

    new_agents = []
    for ag in spec.agents:
        events = []
        for ev in ag.events:
            if isinstance(ev, MacroCall):
                events.extend(expand_call(ev, ()))
            else:
                events.append(ev)
        new_agents.append(
            AgentSpec(ag.name, ag.inputs, ag.owns, ag.knows, tuple(events), pos=ag.pos)
        )
    return NetworkSpec(
        spec.name, spec.qubits, tuple(new_agents), spec.groups,
        spec.formulas, (), pos=spec.pos,
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pairing:
    kind: str  # "classical" or "quantum"
    sender: str
    send_idx: int  # 1-based event index in the sender's sequence
    receiver: str
    recv_idx: int


@dataclass(frozen=True)
class ValidatedNetwork:
    spec: NetworkSpec
    pairings: tuple
    pair_of: dict = field(compare=False)  # (agent, idx) -> Pairing
    initial_owner: dict = field(compare=False)  # qubit -> agent

    @property
    def qubit_names(self):
        return self.spec.qubit_names

    def agent(self, name):
        return self.spec.agent(name)


def classify_vars(agent):
    """Per-agent variable layout: (y inputs, x received, s signals)."""
    y = tuple(d.name for d in agent.inputs)
    x, s = [], []
    for ev in agent.events:
        if isinstance(ev, ClassicalRecv):
            x.extend(v for v in ev.vars if v not in x)
        elif isinstance(ev, Measure):
            if ev.outcome_var not in s:
                s.append(ev.outcome_var)
    return y, tuple(x), tuple(s)


def validation_errors(spec):
    """All semantic errors of a macro-free spec, in deterministic order."""
    errors = []

    def err(msg, node=None):
        pos = getattr(node, "pos", None)
        errors.append(SemanticError(msg, pos.line if pos else None, pos.col if pos else None))

    # name uniqueness
    seen_agents = set()
    for ag in sorted(spec.agents, key=lambda a: a.name):
        if ag.name in seen_agents:
            err(f"duplicate agent {ag.name}", ag)
        seen_agents.add(ag.name)
    declared = []
    for qi in spec.qubits:
        for q in qi.qubits:
            if q in declared:
                err(f"qubit {q} declared more than once", qi)
            declared.append(q)
    declared = set(declared)

    # initial-state normalization
    for qi in spec.qubits:
        norm2 = sum(abs(a) ** 2 for a in qi.amplitudes)
        if abs(norm2 - 1.0) > 2 * NORM_EPS:
            err(
                f"initial state of {','.join(qi.qubits)} has squared norm "
                f"{norm2:.12f}, expected 1",
                qi,
            )

    # initial ownership: exactly one owner per declared qubit
    owner = {}
    for ag in sorted(spec.agents, key=lambda a: a.name):
        for q in ag.owns:
            if q not in declared:
                err(f"undeclared qubit {q} in owns of agent {ag.name}", ag)
            elif q in owner:
                err(f"qubit {q} owned initially by both {owner[q]} and {ag.name}", ag)
            else:
                owner[q] = ag.name
        for q in ag.knows:
            if q not in ag.owns:
                err(f"agent {ag.name} knows {q} without owning it", ag)
    for q in sorted(declared):
        if q not in owner:
            err(f"qubit {q} has no initial owner")

    agent_names = {a.name for a in spec.agents}
    for gname, members in spec.groups:
        for m in members:
            if m not in agent_names:
                err(f"group {gname} names unknown agent {m}")

    # per-agent variable discipline and qubit references
    reserved = {"pc", "gc"}
    for ag in sorted(spec.agents, key=lambda a: a.name):
        names = {d.name for d in ag.inputs}
        for ev in ag.events:
            if isinstance(ev, Measure):
                names.add(ev.outcome_var)
            elif isinstance(ev, ClassicalRecv):
                names.update(ev.vars)
        for v in sorted(names):
            if v in declared:
                err(f"variable {v} of agent {ag.name} collides with a qubit name")
            if v in reserved:
                err(f"variable {v} of agent {ag.name} uses a reserved name")
        dup = {d.name for i, d in enumerate(ag.inputs) if d.name in
               {e.name for e in ag.inputs[:i]}}
        for v in sorted(dup):
            err(f"input {v} declared more than once in {ag.name}", ag)
        defined = {d.name for d in ag.inputs}
        assigned = set(defined)
        for i, ev in enumerate(ag.events, start=1):
            for q in _event_qubits(ev):
                if q not in declared:
                    err(f"undeclared qubit {q}", ev)
            if isinstance(ev, Measure):
                if ev.outcome_var in assigned:
                    err(f"signal {ev.outcome_var} assigned more than once in {ag.name}", ev)
                for dep in (ev.s_dep, ev.t_dep, ev.angle.scale_var):
                    if dep is not None and dep not in defined:
                        err(f"variable {dep} used before definition in {ag.name}", ev)
                assigned.add(ev.outcome_var)
                defined.add(ev.outcome_var)
            elif isinstance(ev, Correct):
                if ev.condition is not None and ev.condition not in defined:
                    err(f"variable {ev.condition} used before definition in {ag.name}", ev)
            elif isinstance(ev, ClassicalRecv):
                for v in ev.vars:
                    if v in assigned:
                        err(f"variable {v} assigned more than once in {ag.name}", ev)
                    assigned.add(v)
                    defined.add(v)
            elif isinstance(ev, ClassicalSend):
                for v in ev.vars:
                    if v not in defined:
                        err(f"variable {v} sent before definition in {ag.name}", ev)
            elif isinstance(ev, MacroCall):
                err(f"unexpanded macro call {ev.name} in {ag.name}", ev)

    # rendez-vous pairing by (sender, receiver, kind, ordinal)
    pairings = []
    for sender in sorted(agent_names):
        for receiver in sorted(agent_names):
            if sender == receiver:
                continue
            for kind in ("classical", "quantum"):
                sends = _comm_events(spec.agent(sender), kind, "send", receiver)
                recvs = _comm_events(spec.agent(receiver), kind, "recv", sender)
                for k in range(max(len(sends), len(recvs))):
                    if k >= len(recvs):
                        idx, ev = sends[k]
                        err(f"unpaired send at event {idx} of {sender}", ev)
                        continue
                    if k >= len(sends):
                        idx, ev = recvs[k]
                        err(f"unpaired receive at event {idx} of {receiver}", ev)
                        continue
                    sidx, sev = sends[k]
                    ridx, rev = recvs[k]
                    if kind == "classical" and len(sev.vars) != len(rev.vars):
                        err(
                            f"send at event {sidx} of {sender} carries "
                            f"{len(sev.vars)} values but the receive expects "
                            f"{len(rev.vars)}",
                            rev,
                        )
                    if kind == "quantum" and sev.q != rev.q:
                        err(
                            f"qreceive at event {ridx} of {receiver} names "
                            f"{rev.q} but the paired qsend transfers {sev.q}",
                            rev,
                        )
                    pairings.append(Pairing(kind, sender, sidx, receiver, ridx))

    # ownership flow per agent (send removes, receive adds)
    for ag in sorted(spec.agents, key=lambda a: a.name):
        owned = {q for q in ag.owns if q in declared}
        for i, ev in enumerate(ag.events, start=1):
            used = ()
            if isinstance(ev, Entangle):
                used = (ev.q, ev.r)
                if ev.q == ev.r:
                    err(f"cannot entangle {ev.q} with itself", ev)
            elif isinstance(ev, Measure):
                used = (ev.q,)
            elif isinstance(ev, Correct):
                used = (ev.q,)
            elif isinstance(ev, QuantumSend):
                used = (ev.q,)
            for q in used:
                if q in declared and q not in owned:
                    err(f"qubit {q} not owned at event {i} of {ag.name}", ev)
            if isinstance(ev, QuantumSend) and ev.q in owned:
                owned.discard(ev.q)
            if isinstance(ev, QuantumRecv):
                owned.add(ev.q)

    errors.sort(key=lambda e: (e.line or 0, e.col or 0, str(e)))
    return errors


def _event_qubits(ev):
    if isinstance(ev, Entangle):
        return (ev.q, ev.r)
    if isinstance(ev, (Measure, Correct, QuantumSend, QuantumRecv)):
        return (ev.q,)
    return ()


def _comm_events(agent, kind, direction, partner):
    out = []
    for i, ev in enumerate(agent.events, start=1):
        if kind == "classical" and direction == "send" and isinstance(ev, ClassicalSend) and ev.to_agent == partner:
            out.append((i, ev))
        elif kind == "classical" and direction == "recv" and isinstance(ev, ClassicalRecv) and ev.from_agent == partner:
            out.append((i, ev))
        elif kind == "quantum" and direction == "send" and isinstance(ev, QuantumSend) and ev.to_agent == partner:
            out.append((i, ev))
        elif kind == "quantum" and direction == "recv" and isinstance(ev, QuantumRecv) and ev.from_agent == partner:
            out.append((i, ev))
    return out


def validate(spec):
    """Macro-expand and validate; raises ValidationFailure on any error."""
    spec = expand_macros(spec)
    errors = validation_errors(spec)
    if errors:
        raise ValidationFailure(errors)
    pairings = []
    for sender in sorted(a.name for a in spec.agents):
        for receiver in sorted(a.name for a in spec.agents):
            if sender == receiver:
                continue
            for kind in ("classical", "quantum"):
                sends = _comm_events(spec.agent(sender), kind, "send", receiver)
                recvs = _comm_events(spec.agent(receiver), kind, "recv", sender)
                for (sidx, _), (ridx, _) in zip(sends, recvs):
                    pairings.append(Pairing(kind, sender, sidx, receiver, ridx))
    pair_of = {}
    for p in pairings:
        pair_of[(p.sender, p.send_idx)] = p
        pair_of[(p.receiver, p.recv_idx)] = p
    owner = {}
    for ag in spec.agents:
        for q in ag.owns:
            owner[q] = ag.name
    return ValidatedNetwork(spec, tuple(pairings), pair_of, owner)


def load_network(source):
    """parse + validate in one call."""
    return validate(parse(source))
