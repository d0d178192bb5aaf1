"""Translation of a protocol network into an interpreted system.

Each agent becomes a module with local variables (received bits x, inputs y,
signals s, one ownership flag per qubit, a program counter), guarded action
protocols and evolution lines.  The environment module tracks the quantum
side purely classically: one name variable per qubit, one per reachable
entangled system, constant initial-name variables, and a step counter gc.
Environment evolution lines are enumerated from the reachable configuration
graph rather than the full domain cross-product.

Agent local states:   (x, y, s, q-flags, pc)     flags: 0 not owned,
                                                 1 owned/unknown, 2 owned/known
Environment state:    (q..., init_q..., e..., gc)
"""

import json
import math
from dataclasses import dataclass, field

from .errors import UntranslatableAtomError
from .formulas import (
    ATOM_TYPES,
    GroupKnow,
    Has,
    QubitEqInit,
    QubitEqQubit,
    QubitIsKet,
    VarEq,
    VarEqVar,
    atoms_of,
    render_formula,
)
from .netspec import (
    ClassicalRecv,
    ClassicalSend,
    Correct,
    Entangle,
    Measure,
    QuantumRecv,
    QuantumSend,
)
from .parser import classify_vars
from .quantum import PureStateVector

ENV = "Environment"
BOTTOM = None  # rendered as `undef` in ISPL


@dataclass(frozen=True)
class VarSpec:
    name: str
    domain: tuple  # ints, strings, and/or None (bottom)


@dataclass(frozen=True)
class ProtocolLine:
    guard: tuple  # ((var, value), ...) conjunction over the module's own vars
    actions: tuple


@dataclass(frozen=True)
class EvoLine:
    assigns: tuple  # ((var, value), ...); value "__inc__" bumps a counter
    conds: tuple  # ("var", name, value) | ("action", who, act)
    #               | ("naction", who, (acts...)); who is a module name


@dataclass(frozen=True)
class ActionInfo:
    kind: str  # ent | measure | correct | skip | snd | rcv | qsnd | qrcv
    qubit: str | None = None
    partner: str | None = None
    partner_action: str | None = None
    outcome_var: str | None = None
    values: tuple = ()  # (var, bit) pairs carried by a snd action


@dataclass
class AgentTemplate:
    name: str
    vars: tuple  # of VarSpec, fixed order: y, x, s, qubit flags, pc
    actions: tuple
    protocol: tuple  # of ProtocolLine
    evolution: tuple  # of EvoLine
    info: dict = field(default_factory=dict)  # action -> ActionInfo

    def var_index(self, name):
        for i, v in enumerate(self.vars):
            if v.name == name:
                return i
        raise KeyError(name)


@dataclass
class EnvironmentTemplate:
    vars: tuple
    actions: tuple
    protocol: tuple
    evolution: tuple
    factor_var_of: dict = field(default_factory=dict)  # qubit-tuple -> var name

    def var_index(self, name):
        for i, v in enumerate(self.vars):
            if v.name == name:
                return i
        raise KeyError(name)


@dataclass
class InterpretedSystem:
    net: object
    registry: object
    agents: tuple  # of AgentTemplate
    environment: EnvironmentTemplate
    initial_states: tuple  # of global states (env_values, (agent_values, ...))
    atoms: dict  # Formula atom -> predicate over a global state
    max_gc: int = 1

    def agent(self, name):
        for a in self.agents:
            if a.name == name:
                return a
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Naming helpers
# ---------------------------------------------------------------------------

def qubit_var(q):
    return f"q_{q}"


def init_var(q):
    return f"init_{q}"


def factor_var(qubits):
    if len(qubits) == 1:
        return qubit_var(qubits[0])
    return "e_" + "_".join(qubits)


def _angle_tag(angle):
    return angle.text.replace("/", "").replace(".", "d")


def _dep_order(ev):
    """Measurement dependency variables in canonical order."""
    out = []
    if ev.angle.scale_var is not None:
        out.append(ev.angle.scale_var)
    if ev.s_dep is not None:
        out.append(ev.s_dep)
    if ev.t_dep is not None:
        out.append(ev.t_dep)
    return out


def measure_action(ev, dep_vals, outcome):
    parts = ["m", ev.q]
    if ev.angle.text != "0":
        parts.append(_angle_tag(ev.angle))
    parts.extend(f"{var}{val}" for var, val in dep_vals)
    parts.append("p" if outcome == 0 else "m")
    return "_".join(parts)


def force_action(q, outcome):
    return f"env_x_{q}_{outcome}"


def snd_action(ev, bits):
    return f"snd_{ev.to_agent}_" + "_".join(
        f"{var}_{b}" for var, b in zip(ev.vars, bits)
    )


def rcv_action(ev):
    return f"rcv_{ev.from_agent}_" + "_".join(ev.vars)


# ---------------------------------------------------------------------------
# Per-agent fragments
# ---------------------------------------------------------------------------

def _bit_combos(n):
    return [tuple((i >> k) & 1 for k in reversed(range(n))) for i in range(2 ** n)]


def build_agent(net, name):
    ag = net.agent(name)
    y, x, s = classify_vars(ag)
    qubits = net.qubit_names
    n_events = len(ag.events)

    vars_ = [VarSpec(v, (0, 1)) for v in y]
    vars_ += [VarSpec(v, (BOTTOM, 0, 1)) for v in x]
    vars_ += [VarSpec(v, (BOTTOM, 0, 1)) for v in s]
    vars_ += [VarSpec(q, (0, 1, 2)) for q in qubits]
    vars_.append(VarSpec("pc", tuple(range(1, n_events + 2))))

    actions = []
    info = {}
    protocol = []
    evolution = []

    def add_action(act, ai):
        if act not in actions:
            actions.append(act)
            info[act] = ai

    for idx, ev in enumerate(ag.events):
        pc = idx + 1
        if isinstance(ev, Entangle):
            act = f"ent_{ev.q}_{ev.r}"
            add_action(act, ActionInfo("ent", qubit=ev.q))
            protocol.append(ProtocolLine((("pc", pc),), (act,)))
            evolution.append(EvoLine(
                ((ev.q, 1), (ev.r, 1), ("pc", pc + 1)),
                (("var", "pc", pc), ("action", name, act)),
            ))
        elif isinstance(ev, Measure):
            deps = _dep_order(ev)
            for combo in _bit_combos(len(deps)):
                dep_vals = tuple(zip(deps, combo))
                act_p = measure_action(ev, dep_vals, 0)
                act_m = measure_action(ev, dep_vals, 1)
                add_action(act_p, ActionInfo(
                    "measure", qubit=ev.q, outcome_var=ev.outcome_var))
                add_action(act_m, ActionInfo(
                    "measure", qubit=ev.q, outcome_var=ev.outcome_var))
                guard = (("pc", pc),) + tuple(dep_vals)
                protocol.append(ProtocolLine(guard, (act_p, act_m)))
                common = ((ev.q, 2), ("pc", pc + 1))
                # outcome 0 on the + action unless the environment forces 1;
                # the forced-impossible opposite action maps to the forced bit
                evolution.extend([
                    EvoLine(((ev.outcome_var, 0),) + common,
                            (("var", "pc", pc), ("action", name, act_p),
                             ("naction", ENV, (force_action(ev.q, 1),)))),
                    EvoLine(((ev.outcome_var, 1),) + common,
                            (("var", "pc", pc), ("action", name, act_p),
                             ("action", ENV, force_action(ev.q, 1)))),
                    EvoLine(((ev.outcome_var, 1),) + common,
                            (("var", "pc", pc), ("action", name, act_m),
                             ("naction", ENV, (force_action(ev.q, 0),)))),
                    EvoLine(((ev.outcome_var, 0),) + common,
                            (("var", "pc", pc), ("action", name, act_m),
                             ("action", ENV, force_action(ev.q, 0)))),
                ])
        elif isinstance(ev, Correct):
            act = f"{ev.kind.lower()}_{ev.q}"
            add_action(act, ActionInfo("correct", qubit=ev.q))
            if ev.condition is None:
                protocol.append(ProtocolLine((("pc", pc),), (act,)))
            else:
                add_action("skip", ActionInfo("skip"))
                protocol.append(ProtocolLine(
                    (("pc", pc), (ev.condition, 1)), (act,)))
                protocol.append(ProtocolLine(
                    (("pc", pc), (ev.condition, 0)), ("skip",)))
                evolution.append(EvoLine(
                    (("pc", pc + 1),),
                    (("var", "pc", pc), ("action", name, "skip")),
                ))
            evolution.append(EvoLine(
                (("pc", pc + 1),),
                (("var", "pc", pc), ("action", name, act)),
            ))
        elif isinstance(ev, ClassicalSend):
            for bits in _bit_combos(len(ev.vars)):
                act = snd_action(ev, bits)
                add_action(act, ActionInfo(
                    "snd", partner=ev.to_agent,
                    partner_action=_partner_rcv(net, name, idx),
                    values=tuple(zip(ev.vars, bits)),
                ))
                guard = (("pc", pc),) + tuple(zip(ev.vars, bits))
                protocol.append(ProtocolLine(guard, (act,)))
                evolution.append(EvoLine(
                    (("pc", pc + 1),),
                    (("var", "pc", pc), ("action", name, act)),
                ))
        elif isinstance(ev, ClassicalRecv):
            act = rcv_action(ev)
            pairing = net.pair_of[(name, pc)]
            sender = pairing.sender
            send_ev = net.agent(sender).events[pairing.send_idx - 1]
            add_action(act, ActionInfo("rcv", partner=sender))
            protocol.append(ProtocolLine((("pc", pc),), (act,)))
            for bits in _bit_combos(len(ev.vars)):
                assigns = tuple(zip(ev.vars, bits)) + (("pc", pc + 1),)
                evolution.append(EvoLine(assigns, (
                    ("var", "pc", pc),
                    ("action", name, act),
                    ("action", sender, snd_action(send_ev, bits)),
                )))
        elif isinstance(ev, QuantumSend):
            act = f"qsnd_{ev.to_agent}_{ev.q}"
            add_action(act, ActionInfo(
                "qsnd", qubit=ev.q, partner=ev.to_agent,
                partner_action=_partner_rcv(net, name, idx),
            ))
            protocol.append(ProtocolLine((("pc", pc),), (act,)))
            evolution.append(EvoLine(
                ((ev.q, 0), ("pc", pc + 1)),
                (("var", "pc", pc), ("action", name, act)),
            ))
        elif isinstance(ev, QuantumRecv):
            act = f"qrcv_{ev.from_agent}_{ev.q}"
            add_action(act, ActionInfo("qrcv", qubit=ev.q, partner=ev.from_agent))
            protocol.append(ProtocolLine((("pc", pc),), (act,)))
            evolution.append(EvoLine(
                ((ev.q, 1), ("pc", pc + 1)),
                (("var", "pc", pc), ("action", name, act)),
            ))

    add_action("wait", ActionInfo("wait"))
    return AgentTemplate(
        name, tuple(vars_), tuple(actions), tuple(protocol),
        tuple(evolution), info,
    )


def _partner_rcv(net, name, idx):
    pairing = net.pair_of[(name, idx + 1)]
    recv_ag = net.agent(pairing.receiver)
    ev = recv_ag.events[pairing.recv_idx - 1]
    if isinstance(ev, ClassicalRecv):
        return rcv_action(ev)
    return f"qrcv_{ev.from_agent}_{ev.q}"


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

def _node_depths(graph):
    """gc offset per node; every non-stutter edge advances gc by exactly 1."""
    depth = {i: 0 for i in graph.initials}
    queue = list(graph.initials)
    succ = {}
    for e in graph.edges:
        succ.setdefault(e.src, []).append(e)
    qi = 0
    while qi < len(queue):
        u = queue[qi]
        qi += 1
        for e in succ.get(u, []):
            if e.step is None:
                continue
            d = depth[u] + 1
            if e.dst not in depth:
                depth[e.dst] = d
                queue.append(e.dst)
            elif depth[e.dst] != d:
                raise AssertionError(
                    f"inconsistent step count at node {e.dst}: "
                    f"{depth[e.dst]} vs {d}"
                )
    return depth


def _step_action(net, step):
    """The performing agent's action name for a configuration-graph step."""
    ev = net.agent(step.agent).events[step.event_idx]
    if step.kind == "entangle":
        return f"ent_{ev.q}_{ev.r}"
    if step.kind == "measure":
        return measure_action(ev, step.dep_vals, step.outcome)
    if step.kind == "correct":
        return f"{ev.kind.lower()}_{ev.q}" if step.applied else "skip"
    if step.kind == "csend":
        return snd_action(ev, tuple(b for _, b in step.values))
    if step.kind == "qsend":
        return f"qsnd_{ev.to_agent}_{ev.q}"
    raise ValueError(step.kind)


def build_environment(net, graph):
    registry = graph.registry
    qubits = net.qubit_names

    # variable inventory and per-variable reachable name sets
    domains = {qubit_var(q): set() for q in qubits}
    e_sets = []
    for c in graph.nodes:
        for f in c.factors:
            var = factor_var(f.qubits)
            if len(f.qubits) > 1 and f.qubits not in e_sets:
                e_sets.append(f.qubits)
            domains.setdefault(var, set()).add(registry.intern(f))
    e_sets.sort(key=lambda qs: (len(qs), [qubits.index(q) for q in qs]))

    depth = _node_depths(graph)
    max_gc = 1 + max(depth.values())

    def name_key(n):
        return (len(n), n)

    vars_ = []
    for q in qubits:
        names = sorted(domains[qubit_var(q)], key=name_key)
        vars_.append(VarSpec(qubit_var(q), (BOTTOM,) + tuple(names)))
    for q in qubits:
        vars_.append(VarSpec(init_var(q), (graph.initial_factor_name[q],)))
    for qs in e_sets:
        names = sorted(domains[factor_var(qs)], key=name_key)
        vars_.append(VarSpec(factor_var(qs), (BOTTOM,) + tuple(names)))
    vars_.append(VarSpec("gc", tuple(range(1, max_gc + 1))))

    # evolution lines from reachable transitions
    lines = []
    force_acts = set()
    seen = set()

    def emit(assigns, conds):
        line = EvoLine(tuple(assigns), tuple(conds))
        if line not in seen:
            seen.add(line)
            lines.append(line)

    gc_inc = ("gc", "__inc__")
    edges_by_src = {}
    for e in graph.edges:
        edges_by_src.setdefault(e.src, []).append(e)

    for e in graph.edges:
        step = e.step
        if step is None:
            continue
        src, dst = graph.nodes[e.src], graph.nodes[e.dst]
        act = _step_action(net, step)
        if step.kind in ("csend", "qsend") or (
            step.kind == "correct" and not step.applied
        ):
            emit((gc_inc,), (("action", step.agent, act),))
            continue

        ev = net.agent(step.agent).events[step.event_idx]
        involved = {ev.q, ev.r} if step.kind == "entangle" else {ev.q}
        pre = [f for f in src.factors if involved & set(f.qubits)]
        touched = set().union(*(f.qubits for f in pre))
        post = [f for f in dst.factors if touched & set(f.qubits)]
        conds = [("var", factor_var(f.qubits), registry.intern(f)) for f in pre]
        conds.append(("action", step.agent, act))
        assigns = [gc_inc]
        pre_vars = {factor_var(f.qubits) for f in pre}
        post_map = {factor_var(f.qubits): registry.intern(f) for f in post}
        for var in sorted(pre_vars - set(post_map)):
            assigns.append((var, BOTTOM))
        for var in sorted(post_map):
            assigns.append((var, post_map[var]))

        if step.kind == "measure":
            siblings = [
                o for o in edges_by_src[e.src]
                if o.step is not None and o.step.kind == "measure"
                and o.step.agent == step.agent
                and o.step.event_idx == step.event_idx
                and o.step.dep_vals == step.dep_vals
            ]
            if len(siblings) == 1:  # forced outcome
                fact = force_action(ev.q, step.outcome)
                force_acts.add(fact)
                other = measure_action(
                    net.agent(step.agent).events[step.event_idx],
                    step.dep_vals, 1 - step.outcome,
                )
                emit(assigns, conds + [("action", ENV, fact)])
                emit(assigns, [
                    c if c[0] != "action" or c[1] != step.agent
                    else ("action", step.agent, other)
                    for c in conds
                ] + [("action", ENV, fact)])
            else:
                emit(assigns, conds + [("action", ENV, "none")])
        else:
            emit(assigns, conds)

    # protocol: `none` always; each forced action wherever a line uses it
    protocol = [ProtocolLine((), ("none",))]
    for fact in sorted(force_acts):
        guards = set()
        for line in lines:
            if ("action", ENV, fact) in line.conds:
                guards.add(tuple(
                    (c[1], c[2]) for c in line.conds if c[0] == "var"
                ))
        for g in sorted(guards):
            protocol.append(ProtocolLine(g, (fact,)))

    factor_var_of = {}
    for q in qubits:
        factor_var_of[(q,)] = qubit_var(q)
    for qs in e_sets:
        factor_var_of[qs] = factor_var(qs)

    env = EnvironmentTemplate(
        tuple(vars_),
        ("none",) + tuple(sorted(force_acts)),
        tuple(protocol),
        tuple(lines),
        factor_var_of,
    )
    return env, depth, max_gc


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def translate_config(is_, graph, node_id, depth=None):
    """The IS global state corresponding to a configuration-graph node."""
    if depth is None:
        depth = _node_depths(graph)
    config = graph.nodes[node_id]
    env_vals = []
    factor_name = {}
    for f in config.factors:
        factor_name[factor_var(f.qubits)] = graph.registry.intern(f)
    for v in is_.environment.vars:
        if v.name == "gc":
            env_vals.append(1 + depth[node_id])
        elif v.name.startswith("init_"):
            env_vals.append(graph.initial_factor_name[v.name[5:]])
        else:
            env_vals.append(factor_name.get(v.name, BOTTOM))
    agent_vals = []
    for tpl in is_.agents:
        st = config.agent(tpl.name)
        vals = []
        for v in tpl.vars:
            if v.name == "pc":
                vals.append(st.pc + 1)
            elif v.name in graph.net.qubit_names:
                if v.name not in st.owned:
                    vals.append(0)
                else:
                    vals.append(2 if v.name in st.known else 1)
            else:
                vals.append(st.value(v.name))
        agent_vals.append(tuple(vals))
    return (tuple(env_vals), tuple(agent_vals))


def assemble(net, graph, registry=None):
    """Full network-to-interpreted-system translation."""
    registry = registry or graph.registry
    agents = tuple(build_agent(net, ag.name) for ag in net.spec.agents)
    env, depth, max_gc = build_environment(net, graph)
    is_ = InterpretedSystem(net, registry, agents, env, (), {}, max_gc)
    is_.initial_states = tuple(
        translate_config(is_, graph, i, depth) for i in graph.initials
    )
    is_.atoms = {
        atom: make_atom_predicate(is_, graph, atom)
        for f in net.spec.formulas
        for atom in atoms_of(f)
    }
    _check_formula_entities(net, is_)
    return is_


def _check_formula_entities(net, is_):
    groups = dict(net.spec.groups)
    agent_names = {a.name for a in net.spec.agents}
    for f in net.spec.formulas:
        for g in _groups_of(f):
            if g not in groups:
                raise UntranslatableAtomError(f"unknown group {g}")
        for a in _knowers_of(f):
            if a not in agent_names:
                raise UntranslatableAtomError(f"unknown agent {a}")


def _groups_of(f):
    from .formulas import GroupKnow, Know, Not, And, Or, Implies, Unary, Until
    out = []
    def walk(g):
        if isinstance(g, GroupKnow):
            out.append(g.group)
            walk(g.sub)
        elif isinstance(g, Know):
            walk(g.sub)
        elif isinstance(g, Not):
            walk(g.sub)
        elif isinstance(g, (And, Or, Implies, Until)):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, Unary):
            walk(g.sub)
    walk(f)
    return out


def _knowers_of(f):
    from .formulas import GroupKnow, Know, Not, And, Or, Implies, Unary, Until
    out = []
    def walk(g):
        if isinstance(g, Know):
            out.append(g.agent)
            walk(g.sub)
        elif isinstance(g, GroupKnow):
            walk(g.sub)
        elif isinstance(g, Not):
            walk(g.sub)
        elif isinstance(g, (And, Or, Implies, Unary, Until)):
            if isinstance(g, Unary):
                walk(g.sub)
            else:
                walk(g.left)
                walk(g.right)
    walk(f)
    return out


def make_atom_predicate(is_, graph, atom):
    """Compile an atom into a predicate over IS global states."""
    net = is_.net
    qubits = net.qubit_names
    agent_names = [a.name for a in is_.agents]
    registry = is_.registry

    def agent_value(state, agent, var):
        tpl = is_.agent(agent)
        return state[1][agent_names.index(agent)][tpl.var_index(var)]

    def check_agent_var(agent, var):
        if agent not in agent_names:
            raise UntranslatableAtomError(f"unknown agent {agent}")
        tpl = is_.agent(agent)
        if var not in [v.name for v in tpl.vars]:
            raise UntranslatableAtomError(
                f"agent {agent} has no variable {var}"
            )

    def check_qubit(q):
        if q not in qubits:
            raise UntranslatableAtomError(f"unknown qubit {q}")

    def name_of(state, q):
        """The interned name of q's minimal factor, if q is isolated."""
        i = is_.environment.var_index(qubit_var(q))
        return state[0][i]

    if isinstance(atom, VarEq):
        check_agent_var(atom.agent, atom.var)
        return lambda st: agent_value(st, atom.agent, atom.var) == atom.value
    if isinstance(atom, VarEqVar):
        check_agent_var(atom.agent1, atom.var1)
        check_agent_var(atom.agent2, atom.var2)
        def pred(st):
            a = agent_value(st, atom.agent1, atom.var1)
            b = agent_value(st, atom.agent2, atom.var2)
            return a is not None and a == b
        return pred
    if isinstance(atom, Has):
        check_agent_var(atom.agent, atom.qubit)
        check_qubit(atom.qubit)
        return lambda st: agent_value(st, atom.agent, atom.qubit) >= 1
    if isinstance(atom, QubitIsKet):
        check_qubit(atom.qubit)
        n = math.log2(len(atom.amplitudes))
        if n != 1:
            raise UntranslatableAtomError(
                f"ket literal for {atom.qubit} must have 2 amplitudes"
            )
        target = PureStateVector((atom.qubit,), atom.amplitudes)
        tname = registry.lookup(target)
        return lambda st: tname is not None and name_of(st, atom.qubit) == tname
    if isinstance(atom, QubitEqQubit):
        check_qubit(atom.q1)
        check_qubit(atom.q2)
        def pred(st):
            a, b = name_of(st, atom.q1), name_of(st, atom.q2)
            return a is not None and a == b
        return pred
    if isinstance(atom, QubitEqInit):
        check_qubit(atom.q)
        check_qubit(atom.q_init)
        j = is_.environment.var_index(init_var(atom.q_init))
        def pred(st):
            a = name_of(st, atom.q)
            return a is not None and a == st[0][j]
        return pred
    raise UntranslatableAtomError(f"unsupported atom {atom!r}")


# ---------------------------------------------------------------------------
# Theorem-1 style crosscheck against the direct exploration
# ---------------------------------------------------------------------------

@dataclass
class CrosscheckReport:
    ok: bool
    node_count: int
    edge_count: int
    mismatches: list  # of dicts with kind + witness pair

    def to_dict(self):
        return {
            "ok": self.ok,
            "nodes": self.node_count,
            "edges": self.edge_count,
            "mismatches": self.mismatches,
        }


def crosscheck(graph, is_):
    """Verify the IS execution graph is isomorphic to the configuration
    graph under translate_config, with matching epistemic partitions and
    atom valuations."""
    from .checker import build_state_graph

    mismatches = []
    depth = _node_depths(graph)
    sg = build_state_graph(is_)
    t = [translate_config(is_, graph, i, depth) for i in range(len(graph.nodes))]

    index = {st: i for i, st in enumerate(sg.states)}
    if len(set(t)) != len(t):
        mismatches.append({"kind": "translation not injective"})
    for i, st in enumerate(t):
        if st not in index:
            mismatches.append({
                "kind": "missing state", "config": graph.node_name(i),
            })
    if len(sg.states) != len(graph.nodes):
        mismatches.append({
            "kind": "state count", "config_graph": len(graph.nodes),
            "is_graph": len(sg.states),
        })

    if not mismatches:
        # temporal relation equality, both directions
        cg_rel = {(e.src, e.dst) for e in graph.edges}
        is_rel = set()
        inv = {index[st]: i for i, st in enumerate(t)}
        for u, outs in enumerate(sg.successors):
            for v in outs:
                is_rel.add((inv[u], inv[v]))
        for (u, v) in sorted(cg_rel - is_rel):
            mismatches.append({
                "kind": "edge missing in IS",
                "pair": [graph.node_name(u), graph.node_name(v)],
            })
        for (u, v) in sorted(is_rel - cg_rel):
            mismatches.append({
                "kind": "extra IS edge",
                "pair": [graph.node_name(u), graph.node_name(v)],
            })

        # epistemic partitions
        for tpl in is_.agents:
            by_cfg = {}
            by_is = {}
            for i in range(len(graph.nodes)):
                by_cfg.setdefault(
                    graph.nodes[i].local_view(tpl.name), set()).add(i)
                st = sg.states[index[t[i]]]
                proj = st[1][[a.name for a in is_.agents].index(tpl.name)]
                by_is.setdefault(proj, set()).add(i)
            cfg_classes = {frozenset(v) for v in by_cfg.values()}
            is_classes = {frozenset(v) for v in by_is.values()}
            if cfg_classes != is_classes:
                diff = cfg_classes.symmetric_difference(is_classes)
                wit = sorted(next(iter(diff)))[:2]
                mismatches.append({
                    "kind": "partition mismatch", "agent": tpl.name,
                    "pair": [graph.node_name(w) for w in wit],
                })

        # atom agreement
        from .semantics import eval_config_atom
        for atom, pred in is_.atoms.items():
            for i in range(len(graph.nodes)):
                a = eval_config_atom(graph, i, atom)
                b = pred(t[i])
                if a != b:
                    mismatches.append({
                        "kind": "atom disagreement",
                        "atom": render_formula(atom),
                        "pair": [graph.node_name(i), graph.node_name(i)],
                        "config": a, "is": b,
                    })
                    break

    return CrosscheckReport(
        not mismatches, len(graph.nodes), len(graph.edges), mismatches
    )


# ---------------------------------------------------------------------------
# JSON dump
# ---------------------------------------------------------------------------

def _val(v):
    return "undef" if v is None else v


def is_to_dict(is_):
    def module(m):
        return {
            "vars": [
                {"name": v.name, "domain": [_val(x) for x in v.domain]}
                for v in m.vars
            ],
            "actions": list(m.actions),
            "protocol": [
                {"guard": [[g[0], _val(g[1])] for g in line.guard],
                 "actions": list(line.actions)}
                for line in m.protocol
            ],
            "evolution": [
                {"assigns": [[a[0], _val(a[1])] for a in line.assigns],
                 "conds": [
                     [c[0], c[1], _val(c[2])] if c[0] != "naction"
                     else [c[0], c[1], sorted(c[2])]
                     for c in line.conds
                 ]}
                for line in m.evolution
            ],
        }

    agent_names = [a.name for a in is_.agents]
    return {
        "environment": module(is_.environment),
        "agents": {a.name: module(a) for a in is_.agents},
        "initial_states": [
            {
                "Environment": {
                    v.name: _val(val)
                    for v, val in zip(is_.environment.vars, st[0])
                },
                **{
                    name: {
                        v.name: _val(val)
                        for v, val in zip(is_.agent(name).vars, vals)
                    }
                    for name, vals in zip(agent_names, st[1])
                },
            }
            for st in is_.initial_states
        ],
        "atoms": sorted(render_formula(a) for a in is_.atoms),
    }


def dump_is_json(is_):
    return json.dumps(is_to_dict(is_), indent=2, sort_keys=True) + "\n"
