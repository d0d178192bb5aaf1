"""Small-step execution of protocol networks.

A configuration holds the factored global quantum state plus, per agent, a
program counter, the classical variable environment, and the owned/known
qubit sets.  explore() enumerates the full reachable configuration graph,
branching on measurement outcomes and free protocol inputs, then renumbers
nodes and interned state names canonically so the result is independent of
exploration order.
"""

import itertools
import random
from dataclasses import dataclass, field

from .errors import IllegalStepError, StateBudgetExceededError
from .netspec import (
    ClassicalRecv,
    ClassicalSend,
    Correct,
    Entangle,
    Measure,
    QuantumRecv,
    QuantumSend,
)
from .quantum import (
    PROB_EPS,
    PureStateVector,
    StateRegistry,
    apply_correction,
    apply_entangle,
    effective_angle,
    factored,
    measure,
    tensor,
)

DEFAULT_MAX_STATES = 10_000_000


@dataclass(frozen=True)
class AgentState:
    pc: int  # index of the next event (0-based); len(events) when done
    env: tuple  # sorted (var, 0/1) pairs; undefined vars are absent (bottom)
    owned: tuple  # sorted qubit names
    known: tuple  # sorted subset of owned with known local state

    def value(self, var):
        for k, v in self.env:
            if k == var:
                return v
        return None

    def with_env(self, updates):
        env = dict(self.env)
        env.update(updates)
        return tuple(sorted(env.items()))


class Configuration:
    """One global snapshot: quantum factors plus all agent states."""

    __slots__ = ("factors", "agents", "_key")

    def __init__(self, factors, agents):
        self.factors = tuple(factors)
        self.agents = dict(agents)  # name -> AgentState, insertion = spec order
        self._key = None

    def agent(self, name):
        return self.agents[name]

    def factor_of(self, q):
        for f in self.factors:
            if q in f.qubits:
                return f
        return None

    def local_view(self, name):
        a = self.agents[name]
        return (a.pc, a.env, a.owned, a.known)

    def key(self, registry):
        if self._key is None:
            qpart = tuple((f.qubits, registry.intern(f)) for f in self.factors)
            apart = tuple(
                (n, a.pc, a.env, a.owned, a.known) for n, a in self.agents.items()
            )
            self._key = (qpart, apart)
        return self._key


@dataclass(frozen=True)
class StepDescriptor:
    """Machine-readable description of one transition."""

    kind: str  # entangle | measure | correct | csend | qsend
    agent: str  # performer (sender for communication)
    event_idx: int  # 0-based index in the performer's sequence
    partner: str | None = None
    partner_idx: int | None = None
    outcome: int | None = None  # measurement outcome bit
    probability: float | None = None
    dep_vals: tuple = ()  # ((var, value), ...) for measurement dependencies
    applied: bool | None = None  # conditional correction actually fired
    values: tuple = ()  # ((var, value), ...) carried by a classical send
    qubit: str | None = None


@dataclass
class Edge:
    src: int
    dst: int
    label: str
    step: StepDescriptor | None  # None for the terminal stutter loop


@dataclass
class ConfigGraph:
    net: object  # ValidatedNetwork
    nodes: list  # Configuration, index = node id
    edges: list  # Edge, sorted by (src, label, dst)
    initials: list  # node ids
    registry: StateRegistry
    initial_factor_name: dict  # qubit -> interned name of its initial factor
    initial_inputs: dict = field(default_factory=dict)  # node id -> env snapshot

    def node_name(self, i):
        return f"C{i + 1}"

    def successors(self, i):
        return [(e.label, e.dst, e.step) for e in self.edges if e.src == i]

    def to_dot(self):
        return render_dot(self)


# ---------------------------------------------------------------------------
# Step enumeration and application
# ---------------------------------------------------------------------------

def _pending_event(net, config, name):
    ag = net.agent(name)
    st = config.agent(name)
    if st.pc >= len(ag.events):
        return None
    return ag.events[st.pc]


def enabled_steps(net, config):
    """All transitions enabled in a configuration, in agent/spec order."""
    steps = []
    for name in config.agents:
        ev = _pending_event(net, config, name)
        if ev is None:
            continue
        st = config.agent(name)
        idx = st.pc
        if isinstance(ev, Entangle):
            steps.append(StepDescriptor("entangle", name, idx, qubit=ev.q))
        elif isinstance(ev, Measure):
            steps.extend(_measure_steps(config, name, idx, ev))
        elif isinstance(ev, Correct):
            applied = ev.condition is None or st.value(ev.condition) == 1
            steps.append(
                StepDescriptor("correct", name, idx, applied=applied, qubit=ev.q)
            )
        elif isinstance(ev, ClassicalSend):
            step = _comm_step(net, config, name, idx, ev)
            if step is not None:
                steps.append(step)
        elif isinstance(ev, QuantumSend):
            step = _comm_step(net, config, name, idx, ev)
            if step is not None:
                steps.append(step)
        # receives never initiate; they fire with the matching send
    return steps


def _measure_steps(config, name, idx, ev):
    st = config.agent(name)
    base = ev.angle.value
    deps = []
    if ev.angle.scale_var is not None:
        scale = st.value(ev.angle.scale_var)
        deps.append((ev.angle.scale_var, scale))
        base = base * scale
    s_val = t_val = None
    if ev.s_dep is not None:
        s_val = st.value(ev.s_dep)
        deps.append((ev.s_dep, s_val))
    if ev.t_dep is not None:
        t_val = st.value(ev.t_dep)
        deps.append((ev.t_dep, t_val))
    alpha = effective_angle(base, s_val, t_val)
    factor = config.factor_of(ev.q)
    if factor is None:
        raise IllegalStepError(f"measurement of unknown qubit {ev.q}")
    out = []
    for mo in measure(factor, ev.q, alpha):
        if mo.probability <= PROB_EPS:
            continue
        out.append(
            StepDescriptor(
                "measure", name, idx,
                outcome=mo.outcome_bit,
                probability=mo.probability,
                dep_vals=tuple(deps),
                qubit=ev.q,
            )
        )
    return out


def _comm_step(net, config, name, idx, ev):
    pairing = net.pair_of.get((name, idx + 1))
    if pairing is None:
        return None
    recv_name = pairing.receiver
    recv_st = config.agent(recv_name)
    if recv_st.pc != pairing.recv_idx - 1:
        return None  # partner not yet at the matching receive
    if isinstance(ev, ClassicalSend):
        st = config.agent(name)
        values = tuple((v, st.value(v)) for v in ev.vars)
        return StepDescriptor(
            "csend", name, idx,
            partner=recv_name, partner_idx=pairing.recv_idx - 1,
            values=values,
        )
    return StepDescriptor(
        "qsend", name, idx,
        partner=recv_name, partner_idx=pairing.recv_idx - 1,
        qubit=ev.q,
    )


def _without(seq, x):
    return tuple(v for v in seq if v != x)


def _with(seq, x):
    return tuple(sorted(set(seq) | {x}))


def apply_step(net, config, step):
    """The configuration reached by firing a step descriptor."""
    ag = net.agent(step.agent)
    ev = ag.events[step.event_idx]
    st = config.agent(step.agent)
    agents = dict(config.agents)
    factors = list(config.factors)

    if step.kind == "entangle":
        fq, fr = config.factor_of(ev.q), config.factor_of(ev.r)
        joint = fq if fq is fr else tensor(fq, fr)
        for f in (fq, fr):
            if f in factors:
                factors.remove(f)
        post = apply_entangle(joint, ev.q, ev.r)
        factors.extend(factored(post))
        known = _without(_without(st.known, ev.q), ev.r)
        agents[step.agent] = AgentState(st.pc + 1, st.env, st.owned, known)
    elif step.kind == "measure":
        factor = config.factor_of(ev.q)
        base = ev.angle.value
        if ev.angle.scale_var is not None:
            base = base * st.value(ev.angle.scale_var)
        alpha = effective_angle(
            base,
            st.value(ev.s_dep) if ev.s_dep else None,
            st.value(ev.t_dep) if ev.t_dep else None,
        )
        mo = next(
            m for m in measure(factor, ev.q, alpha)
            if m.outcome_bit == step.outcome
        )
        if mo.collapsed_qubit_state is None:
            raise IllegalStepError(
                f"impossible outcome {step.outcome} for {ev.q}"
            )
        factors.remove(factor)
        factors.append(mo.collapsed_qubit_state)
        if mo.residual is not None:
            factors.extend(factored(mo.residual))
        env = st.with_env({ev.outcome_var: step.outcome})
        agents[step.agent] = AgentState(
            st.pc + 1, env, st.owned, _with(st.known, ev.q)
        )
    elif step.kind == "correct":
        if step.applied:
            factor = config.factor_of(ev.q)
            factors.remove(factor)
            factors.append(apply_correction(factor, ev.q, ev.kind))
        agents[step.agent] = AgentState(st.pc + 1, st.env, st.owned, st.known)
    elif step.kind == "csend":
        recv_ag = net.agent(step.partner)
        recv_ev = recv_ag.events[step.partner_idx]
        recv_st = config.agent(step.partner)
        updates = {
            dst: val for dst, (_, val) in zip(recv_ev.vars, step.values)
        }
        agents[step.agent] = AgentState(st.pc + 1, st.env, st.owned, st.known)
        agents[step.partner] = AgentState(
            recv_st.pc + 1, recv_st.with_env(updates),
            recv_st.owned, recv_st.known,
        )
    elif step.kind == "qsend":
        recv_st = config.agent(step.partner)
        agents[step.agent] = AgentState(
            st.pc + 1, st.env,
            _without(st.owned, ev.q), _without(st.known, ev.q),
        )
        agents[step.partner] = AgentState(
            recv_st.pc + 1, recv_st.env,
            _with(recv_st.owned, ev.q), recv_st.known,
        )
    else:
        raise IllegalStepError(f"unknown step kind {step.kind}")

    factors.sort(key=lambda f: _factor_sort_key(net, f))
    return Configuration(factors, agents)


def _factor_sort_key(net, factor):
    order = {q: i for i, q in enumerate(net.qubit_names)}
    return min(order[q] for q in factor.qubits)


def step_label(net, step):
    """Human-readable deterministic edge label."""
    ag = net.agent(step.agent)
    ev = ag.events[step.event_idx]
    if step.kind == "entangle":
        return f"{step.agent}:E({ev.q},{ev.r})"
    if step.kind == "measure":
        deps = "".join(f"[{k}={v}]" for k, v in step.dep_vals)
        return f"{step.agent}:{ev.outcome_var}={step.outcome}{deps}"
    if step.kind == "correct":
        tag = ev.kind if step.applied else "skip"
        return f"{step.agent}:{tag}({ev.q})"
    if step.kind == "csend":
        vals = ",".join(f"{k}={v}" for k, v in step.values)
        return f"{step.agent}->{step.partner}:classical({vals})"
    if step.kind == "qsend":
        return f"{step.agent}->{step.partner}:qsend({step.qubit})"
    raise IllegalStepError(step.kind)


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------

def initial_configurations(net, input_overrides=None, initial_states=None):
    """All initial configurations (one per free-input assignment).

    input_overrides maps (agent, var) -> 0/1 to pin free inputs from outside.
    initial_states optionally replaces declared amplitudes, mapping the
    qubit-name tuple of a declaration to an amplitude list.
    """
    input_overrides = input_overrides or {}
    factors = []
    for qi in net.spec.qubits:
        amps = qi.amplitudes
        if initial_states and qi.qubits in initial_states:
            amps = initial_states[qi.qubits]
        factors.extend(factored(PureStateVector(qi.qubits, amps)))
    factors.sort(key=lambda f: _factor_sort_key(net, f))

    free = []  # (agent, var)
    fixed = {}  # (agent, var) -> bit
    for ag in net.spec.agents:
        for d in ag.inputs:
            if (ag.name, d.name) in input_overrides:
                fixed[(ag.name, d.name)] = input_overrides[(ag.name, d.name)]
            elif d.pinned is not None:
                fixed[(ag.name, d.name)] = d.pinned
            else:
                free.append((ag.name, d.name))

    configs = []
    for bits in itertools.product((0, 1), repeat=len(free)):
        assign = dict(fixed)
        assign.update(dict(zip(free, bits)))
        agents = {}
        for ag in net.spec.agents:
            env = tuple(sorted(
                (d.name, assign[(ag.name, d.name)]) for d in ag.inputs
            ))
            agents[ag.name] = AgentState(
                0, env, tuple(sorted(ag.owns)), tuple(sorted(ag.knows))
            )
        configs.append(Configuration(factors, agents))
    return configs


def explore(net, max_states=DEFAULT_MAX_STATES, input_overrides=None,
            initial_states=None, shuffle_seed=None):
    """Breadth-first reachable configuration graph, canonically numbered."""
    registry = StateRegistry()
    rng = random.Random(shuffle_seed) if shuffle_seed is not None else None

    initials = initial_configurations(net, input_overrides, initial_states)
    ids = {}
    nodes = []
    init_ids = []
    queue = []
    for c in initials:
        k = c.key(registry)
        if k not in ids:
            ids[k] = len(nodes)
            nodes.append(c)
            queue.append(c)
        if ids[k] not in init_ids:
            init_ids.append(ids[k])

    edges = []
    qi = 0
    while qi < len(queue):
        config = queue[qi]
        qi += 1
        src = ids[config.key(registry)]
        steps = enabled_steps(net, config)
        if rng is not None:
            rng.shuffle(steps)
        if not steps:
            edges.append(Edge(src, src, "stutter", None))
            continue
        for step in steps:
            nxt = apply_step(net, config, step)
            k = nxt.key(registry)
            if k not in ids:
                if len(nodes) >= max_states:
                    raise StateBudgetExceededError(max_states)
                ids[k] = len(nodes)
                nodes.append(nxt)
                queue.append(nxt)
            edges.append(Edge(src, ids[k], step_label(net, step), step))

    graph = ConfigGraph(net, nodes, edges, init_ids, registry, {})
    return _canonicalize(graph)


def _canonicalize(graph):
    """Renumber nodes by BFS over label-sorted edges from the initial nodes,
    and rebuild the registry in the new encounter order."""
    succ = {}
    for e in graph.edges:
        succ.setdefault(e.src, []).append(e)
    for lst in succ.values():
        lst.sort(key=lambda e: (e.label, _node_rank(graph, e.dst)))

    order = []
    new_id = {}
    queue = list(sorted(graph.initials, key=lambda i: _node_rank(graph, i)))
    for i in queue:
        if i not in new_id:
            new_id[i] = len(order)
            order.append(i)
    qi = 0
    while qi < len(queue):
        cur = queue[qi]
        qi += 1
        for e in succ.get(cur, []):
            if e.dst not in new_id:
                new_id[e.dst] = len(order)
                order.append(e.dst)
                queue.append(e.dst)

    nodes = [graph.nodes[i] for i in order]
    registry = StateRegistry()
    for c in nodes:
        for f in c.factors:
            registry.intern(f)
    edges = [
        Edge(new_id[e.src], new_id[e.dst], e.label, e.step) for e in graph.edges
    ]
    edges.sort(key=lambda e: (e.src, e.label, e.dst))
    initials = sorted(new_id[i] for i in graph.initials)

    init_factor_name = {}
    for i in initials:
        for f in nodes[i].factors:
            for q in f.qubits:
                init_factor_name.setdefault(q, registry.intern(f))
    initial_inputs = {
        i: {
            name: dict(nodes[i].agents[name].env)
            for name in nodes[i].agents
        }
        for i in initials
    }
    return ConfigGraph(
        graph.net, nodes, edges, initials, registry,
        init_factor_name, initial_inputs,
    )


def _node_rank(graph, i):
    """Exploration-independent tiebreak: the node's structural content."""
    c = graph.nodes[i]
    return tuple(
        (n, a.pc, a.env, a.owned, a.known) for n, a in c.agents.items()
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def config_summary(graph, i):
    """Compact description of node i: interned factor names + agent states."""
    c = graph.nodes[i]
    qparts = []
    for f in c.factors:
        qparts.append(f"{','.join(f.qubits)}={graph.registry.intern(f)}")
    aparts = []
    for name, a in c.agents.items():
        env = " ".join(f"{k}={v}" for k, v in a.env)
        aparts.append(f"{name}[pc={a.pc}{' ' + env if env else ''}]")
    return "; ".join(qparts) + " | " + " ".join(aparts)


def render_dot(graph):
    lines = ["digraph configurations {", "  rankdir=LR;", "  node [shape=box];"]
    for i in range(len(graph.nodes)):
        shape = ""
        if i in graph.initials:
            shape = ", peripheries=2"
        label = f"{graph.node_name(i)}\\n{config_summary(graph, i)}"
        lines.append(f'  n{i} [label="{label}"{shape}];')
    for e in graph.edges:
        lines.append(f'  n{e.src} -> n{e.dst} [label="{e.label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Atom evaluation on configurations
# ---------------------------------------------------------------------------

def agent_var_value(graph, config, agent, var):
    """Classical value of a variable or qubit flag; None encodes bottom."""
    st = config.agent(agent)
    v = st.value(var)
    if v is not None:
        return v
    if var in graph.net.qubit_names:
        if var not in st.owned:
            return 0
        return 2 if var in st.known else 1
    return None


def eval_config_atom(graph, i, atom):
    from . import formulas as F

    config = graph.nodes[i]
    if isinstance(atom, F.VarEq):
        return agent_var_value(graph, config, atom.agent, atom.var) == atom.value
    if isinstance(atom, F.VarEqVar):
        a = agent_var_value(graph, config, atom.agent1, atom.var1)
        b = agent_var_value(graph, config, atom.agent2, atom.var2)
        return a is not None and a == b
    if isinstance(atom, F.Has):
        return atom.qubit in config.agent(atom.agent).owned
    # the qubit-name atoms below require the qubit to be an isolated minimal
    # factor: a qubit entangled into a larger system carries no name
    if isinstance(atom, F.QubitIsKet):
        f = config.factor_of(atom.qubit)
        if f is None or f.qubits != (atom.qubit,):
            return False
        if len(atom.amplitudes) != len(f.amps):
            return False
        target = PureStateVector(f.qubits, atom.amplitudes)
        return f.close_to(target)
    if isinstance(atom, F.QubitEqQubit):
        f1, f2 = config.factor_of(atom.q1), config.factor_of(atom.q2)
        if f1 is None or f1.qubits != (atom.q1,):
            return False
        if f2 is None or f2.qubits != (atom.q2,):
            return False
        return f1.close_to(f2)
    if isinstance(atom, F.QubitEqInit):
        f = config.factor_of(atom.q)
        name = graph.initial_factor_name.get(atom.q_init)
        if f is None or f.qubits != (atom.q,) or name is None:
            return False
        ref = graph.registry.state_of(name)
        return len(f.amps) == len(ref.amps) and f.close_to(ref)
    raise TypeError(f"not an atom: {atom!r}")
