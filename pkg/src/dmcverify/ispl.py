"""ISPL (MCMAS 1.x) emission and a round-trip subset parser.

The emitter lowers an interpreted system to the external checker's input
language: bottom becomes the enumeration literal `undef`, bit variables with
a bottom case become enumerations {undef, v0, v1}, purely numeric variables
(pc, gc, flags, inputs) become bounded integers, and every formula atom is
lowered to a named Boolean definition in the Evaluation section.

The subset parser reads exactly the emitted dialect back into an
IsplDocument so tests can verify emission round-trips byte-identically.
"""

import re
from dataclasses import dataclass, field

from .errors import DmcSyntaxError, DomainTooLargeError
from .formulas import (
    ATOM_TYPES,
    And,
    GroupKnow,
    Implies,
    Know,
    Not,
    Or,
    Unary,
    Until,
    atoms_of,
)

DEFAULT_DOMAIN_LIMIT = 4096
ENV = "Environment"


# ---------------------------------------------------------------------------
# Document model (also the target of the subset parser)
# ---------------------------------------------------------------------------

@dataclass
class IsplModule:
    name: str
    vars: list  # (name, domain_text)
    actions: list
    protocol: list  # (cond_text, [actions]); cond "Other" for the default
    evolution: list  # (assign_text, cond_text)


@dataclass
class IsplDocument:
    modules: list  # Environment first
    evaluation: list  # (atom_name, cond_text)
    init_states: str
    groups: list  # (name, [members])
    formulae: list  # rendered formula strings


# ---------------------------------------------------------------------------
# Value encoding
# ---------------------------------------------------------------------------

def _is_int_range(domain):
    if any(v is None or not isinstance(v, int) for v in domain):
        return False
    vals = sorted(domain)
    return vals == list(range(vals[0], vals[-1] + 1))


def _domain_text(var):
    if _is_int_range(var.domain):
        lo, hi = min(var.domain), max(var.domain)
        if lo == hi:  # single-value domains still need a valid range
            hi = lo + 1
        return f"{lo} .. {hi}"
    return "{" + ", ".join(_enc(var, v) for v in var.domain) + "}"


def _enc(var, val):
    """Literal for a value of var in the emitted text."""
    if val is None:
        return "undef"
    if isinstance(val, int):
        return str(val) if _is_int_range(var.domain) else f"v{val}"
    return str(val)


class _Encoder:
    def __init__(self, is_):
        self.modules = {ENV: is_.environment}
        for a in is_.agents:
            self.modules[a.name] = a
        self.varspec = {
            (mname, v.name): v
            for mname, m in self.modules.items()
            for v in m.vars
        }

    def enc(self, module, var, val):
        return _enc(self.varspec[(module, var)], val)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _cond_text(enc, module, conds):
    parts = []
    for c in conds:
        if c[0] == "var":
            parts.append(f"{c[1]}={enc.enc(module, c[1], c[2])}")
        elif c[0] == "action":
            who = "Action" if c[1] == module else f"{c[1]}.Action"
            parts.append(f"{who}={c[2]}")
        elif c[0] == "naction":
            who = "Action" if c[1] == module else f"{c[1]}.Action"
            parts.extend(f"!({who}={a})" for a in c[2])
        else:
            raise ValueError(c)
    return " and ".join(parts)


def _assign_text(enc, module, assigns):
    parts = []
    for var, val in assigns:
        if val == "__inc__":
            parts.append(f"{var}={var}+1")
        else:
            parts.append(f"{var}={enc.enc(module, var, val)}")
    return " and ".join(parts)


def _module_doc(enc, m, name, limit):
    for v in m.vars:
        if len(v.domain) > limit:
            raise DomainTooLargeError(
                f"domain of {name}.{v.name} has {len(v.domain)} values "
                f"(limit {limit})"
            )
    vars_ = [(v.name, _domain_text(v)) for v in m.vars]
    default = "wait" if name != ENV else "none"
    protocol = []
    for line in m.protocol:
        if not line.guard:
            continue  # folded into Other
        cond = " and ".join(
            f"{var}={enc.enc(name, var, val)}" for var, val in line.guard
        )
        acts = list(line.actions)
        if name == ENV and default not in acts:
            # `none` must stay enabled alongside forced-outcome actions
            acts = [default] + acts
        protocol.append((cond, acts))
    protocol.append(("Other", [default]))
    evolution = [
        (_assign_text(enc, name, line.assigns), _cond_text(enc, name, line.conds))
        for line in m.evolution
    ]
    return IsplModule(name, vars_, list(m.actions), protocol, evolution)


def _atom_cond(enc, is_, atom):
    from .formulas import (
        Has, QubitEqInit, QubitEqQubit, QubitIsKet, VarEq, VarEqVar,
    )
    from .isbuilder import init_var, qubit_var
    from .quantum import PureStateVector

    def dom(module, var):
        return enc.varspec[(module, var)].domain

    contradiction = "Environment.gc=1 and !(Environment.gc=1)"
    if isinstance(atom, VarEq):
        return f"{atom.agent}.{atom.var}={enc.enc(atom.agent, atom.var, atom.value)}"
    if isinstance(atom, VarEqVar):
        shared = [
            v for v in dom(atom.agent1, atom.var1)
            if v is not None and v in dom(atom.agent2, atom.var2)
        ]
        if not shared:
            return contradiction
        return " or ".join(
            f"({atom.agent1}.{atom.var1}={enc.enc(atom.agent1, atom.var1, v)}"
            f" and {atom.agent2}.{atom.var2}={enc.enc(atom.agent2, atom.var2, v)})"
            for v in shared
        )
    if isinstance(atom, Has):
        return (f"{atom.agent}.{atom.qubit}=1 or {atom.agent}.{atom.qubit}=2")
    if isinstance(atom, QubitIsKet):
        target = PureStateVector((atom.qubit,), atom.amplitudes)
        name = is_.registry.lookup(target)
        var = qubit_var(atom.qubit)
        if name is None or name not in dom(ENV, var):
            return contradiction
        return f"Environment.{var}={name}"
    if isinstance(atom, QubitEqQubit):
        v1, v2 = qubit_var(atom.q1), qubit_var(atom.q2)
        shared = [
            n for n in dom(ENV, v1) if n is not None and n in dom(ENV, v2)
        ]
        if not shared:
            return contradiction
        return " or ".join(
            f"(Environment.{v1}={n} and Environment.{v2}={n})" for n in shared
        )
    if isinstance(atom, QubitEqInit):
        var, ivar = qubit_var(atom.q), init_var(atom.q_init)
        shared = [
            n for n in dom(ENV, var) if n is not None and n in dom(ENV, ivar)
        ]
        if not shared:
            return contradiction
        return " or ".join(
            f"(Environment.{var}={n} and Environment.{ivar}={n})"
            for n in shared
        )
    raise TypeError(atom)


def _formula_text(f, atom_names):
    def go(g):
        if isinstance(g, ATOM_TYPES):
            return atom_names[g]
        if isinstance(g, Not):
            return f"!{go(g.sub)}"
        if isinstance(g, And):
            return f"({go(g.left)} and {go(g.right)})"
        if isinstance(g, Or):
            return f"({go(g.left)} or {go(g.right)})"
        if isinstance(g, Implies):
            return f"({go(g.left)} -> {go(g.right)})"
        if isinstance(g, Unary):
            return f"{g.op}({go(g.sub)})"
        if isinstance(g, Until):
            return f"{g.quantifier}({go(g.left)} U {go(g.right)})"
        if isinstance(g, Know):
            return f"K({g.agent}, {go(g.sub)})"
        if isinstance(g, GroupKnow):
            op = "GCK" if g.op == "CK" else g.op
            return f"{op}({g.group}, {go(g.sub)})"
        raise TypeError(g)

    return go(f)


def build_document(is_, formulas=None, limit=DEFAULT_DOMAIN_LIMIT):
    formulas = is_.net.spec.formulas if formulas is None else formulas
    enc = _Encoder(is_)
    modules = [_module_doc(enc, is_.environment, ENV, limit)]
    modules += [_module_doc(enc, a, a.name, limit) for a in is_.agents]

    atom_names = {}
    evaluation = []
    for f in formulas:
        for atom in atoms_of(f):
            if atom not in atom_names:
                atom_names[atom] = f"p{len(atom_names) + 1}"
                evaluation.append(
                    (atom_names[atom], _atom_cond(enc, is_, atom))
                )

    inits = []
    agent_names = [a.name for a in is_.agents]
    for st in is_.initial_states:
        parts = [
            f"Environment.{v.name}={enc.enc(ENV, v.name, val)}"
            for v, val in zip(is_.environment.vars, st[0])
        ]
        for name, vals in zip(agent_names, st[1]):
            tpl = is_.agent(name)
            parts += [
                f"{name}.{v.name}={enc.enc(name, v.name, val)}"
                for v, val in zip(tpl.vars, vals)
            ]
        inits.append("(" + " and ".join(parts) + ")")
    init_states = " or ".join(inits)

    groups = [(g, list(members)) for g, members in is_.net.spec.groups]
    formulae = [_formula_text(f, atom_names) for f in formulas]
    return IsplDocument(modules, evaluation, init_states, groups, formulae)


def render_document(doc):
    out = []
    for m in doc.modules:
        out.append(f"Agent {m.name}")
        out.append("  Vars:")
        for name, dom in m.vars:
            out.append(f"    {name} : {dom};")
        out.append("  end Vars")
        out.append("  Actions = {" + ", ".join(m.actions) + "};")
        out.append("  Protocol:")
        for cond, acts in m.protocol:
            out.append(f"    {cond} : {{{', '.join(acts)}}};")
        out.append("  end Protocol")
        out.append("  Evolution:")
        for assign, cond in m.evolution:
            out.append(f"    {assign} if {cond};")
        out.append("  end Evolution")
        out.append("end Agent")
        out.append("")
    out.append("Evaluation")
    for name, cond in doc.evaluation:
        out.append(f"  {name} if {cond};")
    out.append("end Evaluation")
    out.append("")
    out.append("InitStates")
    out.append(f"  {doc.init_states};")
    out.append("end InitStates")
    out.append("")
    out.append("Groups")
    for name, members in doc.groups:
        out.append(f"  {name} = {{{', '.join(members)}}};")
    out.append("end Groups")
    out.append("")
    out.append("Formulae")
    for f in doc.formulae:
        out.append(f"  {f};")
    out.append("end Formulae")
    return "\n".join(out) + "\n"


def emit(is_, formulas=None, limit=DEFAULT_DOMAIN_LIMIT):
    """Serialize an interpreted system plus formulas to ISPL text."""
    return render_document(build_document(is_, formulas, limit))


# ---------------------------------------------------------------------------
# Subset parser (round-trip of our own output)
# ---------------------------------------------------------------------------

def parse_document(text):
    lines = [ln.rstrip() for ln in text.splitlines()]
    i = 0

    def err(msg):
        raise DmcSyntaxError(msg, i + 1, 1)

    def cur():
        return lines[i].strip() if i < len(lines) else None

    def skip_blank():
        nonlocal i
        while i < len(lines) and not lines[i].strip():
            i += 1

    modules = []
    skip_blank()
    while cur() is not None and cur().startswith("Agent "):
        name = cur()[len("Agent "):].strip()
        i += 1
        if cur() != "Vars:":
            err("expected Vars:")
        i += 1
        vars_ = []
        while cur() != "end Vars":
            m = re.fullmatch(r"(\w+) : (.*);", cur())
            if not m:
                err(f"bad var line {cur()!r}")
            vars_.append((m.group(1), m.group(2)))
            i += 1
        i += 1
        m = re.fullmatch(r"Actions = \{(.*)\};", cur())
        if not m:
            err("expected Actions")
        actions = [a.strip() for a in m.group(1).split(",")]
        i += 1
        if cur() != "Protocol:":
            err("expected Protocol:")
        i += 1
        protocol = []
        while cur() != "end Protocol":
            m = re.fullmatch(r"(.*) : \{(.*)\};", cur())
            if not m:
                err(f"bad protocol line {cur()!r}")
            protocol.append(
                (m.group(1), [a.strip() for a in m.group(2).split(",")])
            )
            i += 1
        i += 1
        if cur() != "Evolution:":
            err("expected Evolution:")
        i += 1
        evolution = []
        while cur() != "end Evolution":
            m = re.fullmatch(r"(.*) if (.*);", cur())
            if not m:
                err(f"bad evolution line {cur()!r}")
            evolution.append((m.group(1), m.group(2)))
            i += 1
        i += 1
        if cur() != "end Agent":
            err("expected end Agent")
        i += 1
        modules.append(IsplModule(name, vars_, actions, protocol, evolution))
        skip_blank()

    if cur() != "Evaluation":
        err("expected Evaluation")
    i += 1
    evaluation = []
    while cur() != "end Evaluation":
        m = re.fullmatch(r"(\w+) if (.*);", cur())
        if not m:
            err(f"bad evaluation line {cur()!r}")
        evaluation.append((m.group(1), m.group(2)))
        i += 1
    i += 1
    skip_blank()

    if cur() != "InitStates":
        err("expected InitStates")
    i += 1
    init_lines = []
    while cur() != "end InitStates":
        init_lines.append(cur())
        i += 1
    i += 1
    init_states = " ".join(init_lines).strip()
    if not init_states.endswith(";"):
        err("InitStates must end with ;")
    init_states = init_states[:-1]
    skip_blank()

    if cur() != "Groups":
        err("expected Groups")
    i += 1
    groups = []
    while cur() != "end Groups":
        m = re.fullmatch(r"(\w+) = \{(.*)\};", cur())
        if not m:
            err(f"bad group line {cur()!r}")
        groups.append((m.group(1), [a.strip() for a in m.group(2).split(",")]))
        i += 1
    i += 1
    skip_blank()

    if cur() != "Formulae":
        err("expected Formulae")
    i += 1
    formulae = []
    while cur() != "end Formulae":
        ln = cur()
        if not ln.endswith(";"):
            err("formula must end with ;")
        formulae.append(ln[:-1])
        i += 1

    return IsplDocument(modules, evaluation, init_states, groups, formulae)
