"""AST for protocol files and the canonical pretty printer.

Node equality ignores source positions so that pretty-printing followed by
re-parsing yields structurally equal trees.
"""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Pos:
    line: int = 0
    col: int = 0


def _pos_field():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Angle:
    """A measurement angle: an optional bit variable scaling a base angle.

    `value` is the base angle in radians, `text` its canonical source form
    (kept exact for tokens like pi/4), `scale_var` an optional classical bit
    variable; the realised base angle is scale * value when present.
    """

    value: float
    text: str
    scale_var: str | None = None

    def render(self):
        return f"{self.scale_var}*{self.text}" if self.scale_var else self.text


@dataclass(frozen=True)
class Event:
    pass


@dataclass(frozen=True)
class Entangle(Event):
    q: str
    r: str
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class Measure(Event):
    outcome_var: str
    q: str
    angle: Angle
    s_dep: str | None = None
    t_dep: str | None = None
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class Correct(Event):
    kind: str  # "X" or "Z"
    q: str
    condition: str | None = None
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class ClassicalSend(Event):
    to_agent: str
    vars: tuple
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class ClassicalRecv(Event):
    from_agent: str
    vars: tuple
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class QuantumSend(Event):
    to_agent: str
    q: str
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class QuantumRecv(Event):
    from_agent: str
    q: str
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class MacroCall(Event):
    name: str
    args: tuple
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class QubitInit:
    qubits: tuple  # ordered qubit names
    amplitudes: tuple  # 2^n complex numbers
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class InputDecl:
    name: str
    pinned: int | None = None  # 0/1 when the file fixes the input


@dataclass(frozen=True)
class AgentSpec:
    name: str
    inputs: tuple  # of InputDecl
    owns: tuple
    knows: tuple
    events: tuple
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class MacroDef:
    name: str
    params: tuple
    body: tuple  # of Event
    pos: Pos | None = _pos_field()


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    qubits: tuple  # of QubitInit
    agents: tuple  # of AgentSpec
    groups: tuple  # of (group_name, tuple of agent names)
    formulas: tuple  # of Formula (see formulas module)
    macros: tuple  # of MacroDef
    pos: Pos | None = _pos_field()

    def agent(self, name):
        for a in self.agents:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def qubit_names(self):
        out = []
        for qi in self.qubits:
            out.extend(qi.qubits)
        return tuple(out)


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

def _fmt_num(x):
    if x == int(x):
        return str(int(x))
    return repr(x)


def _fmt_amp(c):
    c = complex(c)
    if c.imag == 0:
        return _fmt_num(c.real)
    return f"({_fmt_num(c.real)}, {_fmt_num(c.imag)})"


def render_event(ev):
    if isinstance(ev, Entangle):
        return f"E({ev.q}, {ev.r})"
    if isinstance(ev, Measure):
        parts = [ev.q, ev.angle.render()]
        if ev.s_dep:
            parts.append(f"s = {ev.s_dep}")
        if ev.t_dep:
            parts.append(f"t = {ev.t_dep}")
        return f"{ev.outcome_var} = M({', '.join(parts)})"
    if isinstance(ev, Correct):
        cond = f" if {ev.condition}" if ev.condition else ""
        return f"{ev.kind}({ev.q}){cond}"
    if isinstance(ev, ClassicalSend):
        return f"send {ev.to_agent} classical({', '.join(ev.vars)})"
    if isinstance(ev, ClassicalRecv):
        return f"receive {ev.from_agent} classical({', '.join(ev.vars)})"
    if isinstance(ev, QuantumSend):
        return f"qsend {ev.to_agent} {ev.q}"
    if isinstance(ev, QuantumRecv):
        return f"qreceive {ev.from_agent} {ev.q}"
    if isinstance(ev, MacroCall):
        return f"{ev.name}({', '.join(ev.args)})"
    raise TypeError(f"unknown event {ev!r}")


def render_network(spec):
    """Canonical textual form of a NetworkSpec; reparses to an equal AST."""
    from .formulas import render_formula

    lines = [f"network {spec.name} {{"]
    lines.append("  qubits {")
    for qi in spec.qubits:
        amps = ", ".join(_fmt_amp(a) for a in qi.amplitudes)
        lines.append(f"    {', '.join(qi.qubits)} = [{amps}];")
    lines.append("  }")
    for ag in spec.agents:
        header = f"  agent {ag.name}"
        if ag.inputs:
            decls = []
            for d in ag.inputs:
                decls.append(d.name if d.pinned is None else f"{d.name} = {d.pinned}")
            header += f" (inputs: {', '.join(decls)})"
        if ag.owns:
            header += f" owns {', '.join(ag.owns)}"
        if ag.knows:
            header += f" knows {', '.join(ag.knows)}"
        lines.append(header + " {")
        for ev in ag.events:
            lines.append(f"    {render_event(ev)};")
        lines.append("  }")
    if spec.groups:
        lines.append("  groups {")
        for name, members in spec.groups:
            lines.append(f"    {name} = {{{', '.join(members)}}};")
        lines.append("  }")
    lines.append("  formulae {")
    for f in spec.formulas:
        lines.append(f"    {render_formula(f)};")
    lines.append("  }")
    if spec.macros:
        lines.append("  macros {")
        for m in spec.macros:
            body = " ".join(render_event(e) + ";" for e in m.body)
            lines.append(f"    {m.name}({', '.join(m.params)}) = [{body}];")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
