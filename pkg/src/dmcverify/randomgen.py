"""Random small protocol networks and formulas for fuzz-style testing.

The generator always produces networks that pass validation: ownership is
tracked while scheduling events, communication events are appended to both
endpoints at once (so rendez-vous pairs always line up), and variables are
only referenced after definition.
"""

import cmath
import math
import random

from .formulas import (
    And,
    Has,
    Know,
    Not,
    Or,
    QubitEqInit,
    QubitEqQubit,
    Unary,
    VarEq,
    VarEqVar,
)
from .netspec import (
    AgentSpec,
    Angle,
    ClassicalRecv,
    ClassicalSend,
    Correct,
    Entangle,
    InputDecl,
    Measure,
    NetworkSpec,
    QuantumRecv,
    QuantumSend,
    QubitInit,
)

ANGLES = [Angle(0.0, "0"), Angle(math.pi / 2, "pi/2"),
          Angle(math.pi / 4, "pi/4"), Angle(math.pi, "pi")]


def _random_amplitudes(rng, n_qubits, allow_complex=True):
    dim = 2 ** n_qubits
    while True:
        amps = [
            complex(rng.uniform(-1, 1),
                    rng.uniform(-1, 1) if allow_complex else 0.0)
            for _ in range(dim)
        ]
        norm = math.sqrt(sum(abs(a) ** 2 for a in amps))
        if norm > 0.3:
            return tuple(a / norm for a in amps)


def random_network(seed, max_agents=3, max_qubits=4, max_events=8):
    rng = random.Random(seed)
    n_agents = rng.randint(1, max_agents)
    n_qubits = rng.randint(1, max_qubits)
    agents = [f"Ag{i + 1}" for i in range(n_agents)]
    qubits = [f"q{i + 1}" for i in range(n_qubits)]

    # initial factors of size 1 or 2
    qinits = []
    pool = list(qubits)
    while pool:
        k = 2 if len(pool) >= 2 and rng.random() < 0.4 else 1
        group = tuple(pool[:k])
        pool = pool[k:]
        qinits.append(QubitInit(group, _random_amplitudes(rng, k)))

    owner = {q: rng.choice(agents) for q in qubits}
    owned = {a: {q for q in qubits if owner[q] == a} for a in agents}
    knows = {
        a: tuple(sorted(
            q for qi in qinits if len(qi.qubits) == 1
            for q in qi.qubits if owner[q] == a and rng.random() < 0.5
        ))
        for a in agents
    }

    inputs = {a: [] for a in agents}
    n_inputs = 0
    for a in agents:
        for _ in range(rng.randint(0, 2)):
            if n_inputs >= 2:  # keep the initial-state fan-out small
                break
            name = f"y{len(inputs[a]) + 1}"
            pinned = rng.choice([None, 0, 1])
            inputs[a].append(InputDecl(name, pinned))
            if pinned is None:
                n_inputs += 1

    events = {a: [] for a in agents}
    defined = {a: {d.name for d in inputs[a]} for a in agents}
    counters = {a: {"s": 0, "x": 0} for a in agents}
    budget = rng.randint(1, max_events)

    def fresh(a, kind):
        counters[a][kind] += 1
        return f"{kind}{counters[a][kind]}"

    while budget > 0:
        kind = rng.choice(
            ["entangle", "measure", "correct", "csend", "qsend", "measure"]
        )
        if kind == "entangle":
            cands = [a for a in agents if len(owned[a]) >= 2]
            if not cands:
                continue
            a = rng.choice(cands)
            q, r = rng.sample(sorted(owned[a]), 2)
            events[a].append(Entangle(q, r))
            budget -= 1
        elif kind == "measure":
            cands = [a for a in agents if owned[a]]
            if not cands:
                continue
            a = rng.choice(cands)
            q = rng.choice(sorted(owned[a]))
            angle = rng.choice(ANGLES)
            bits = sorted(defined[a])
            scale = s_dep = t_dep = None
            if bits and rng.random() < 0.3:
                scale = rng.choice(bits)
            if angle.text != "0" or scale:
                pass
            if bits and rng.random() < 0.3:
                s_dep = rng.choice(bits)
            if bits and rng.random() < 0.2:
                t_dep = rng.choice(bits)
            if scale:
                angle = Angle(angle.value, angle.text, scale)
            out = fresh(a, "s")
            events[a].append(Measure(out, q, angle, s_dep, t_dep))
            defined[a].add(out)
            budget -= 1
        elif kind == "correct":
            cands = [a for a in agents if owned[a]]
            if not cands:
                continue
            a = rng.choice(cands)
            q = rng.choice(sorted(owned[a]))
            cond = None
            if defined[a] and rng.random() < 0.6:
                cond = rng.choice(sorted(defined[a]))
            events[a].append(Correct(rng.choice("XZ"), q, cond))
            budget -= 1
        elif kind == "csend" and budget >= 2 and n_agents >= 2:
            cands = [a for a in agents if defined[a]]
            if not cands:
                continue
            a = rng.choice(cands)
            b = rng.choice([x for x in agents if x != a])
            k = rng.randint(1, min(2, len(defined[a])))
            sent = tuple(rng.sample(sorted(defined[a]), k))
            recv = tuple(fresh(b, "x") for _ in sent)
            events[a].append(ClassicalSend(b, sent))
            events[b].append(ClassicalRecv(a, recv))
            defined[b].update(recv)
            budget -= 2
        elif kind == "qsend" and budget >= 2 and n_agents >= 2:
            cands = [a for a in agents if owned[a]]
            if not cands:
                continue
            a = rng.choice(cands)
            b = rng.choice([x for x in agents if x != a])
            q = rng.choice(sorted(owned[a]))
            events[a].append(QuantumSend(b, q))
            events[b].append(QuantumRecv(a, q))
            owned[a].discard(q)
            owned[b].add(q)
            budget -= 2
        else:
            continue

    specs = tuple(
        AgentSpec(
            a, tuple(inputs[a]),
            tuple(sorted(q for q in qubits if owner[q] == a)),
            knows[a], tuple(events[a]),
        )
        for a in agents
    )
    groups = (("all", tuple(agents)),)
    net = NetworkSpec(f"rnd{seed}", tuple(qinits), specs, groups, (), ())
    formulas = tuple(
        random_formula(rng, net) for _ in range(rng.randint(1, 3))
    )
    return NetworkSpec(
        net.name, net.qubits, net.agents, net.groups, formulas, ()
    )


def random_atom(rng, net):
    agents = [a.name for a in net.agents]
    qubits = list(net.qubit_names)
    vars_by_agent = {}
    for ag in net.agents:
        vs = [d.name for d in ag.inputs]
        for ev in ag.events:
            if isinstance(ev, Measure):
                vs.append(ev.outcome_var)
            elif isinstance(ev, ClassicalRecv):
                vs.extend(ev.vars)
        vars_by_agent[ag.name] = vs

    choices = ["flag", "has", "init", "eq"]
    withvars = [a for a in agents if vars_by_agent[a]]
    if withvars:
        choices += ["var", "var", "varvar"]
    kind = rng.choice(choices)
    if kind == "var":
        a = rng.choice(withvars)
        return VarEq(a, rng.choice(vars_by_agent[a]), rng.randint(0, 1))
    if kind == "varvar":
        a = rng.choice(withvars)
        b = rng.choice(withvars)
        return VarEqVar(a, rng.choice(vars_by_agent[a]),
                        b, rng.choice(vars_by_agent[b]))
    if kind == "flag":
        return VarEq(rng.choice(agents), rng.choice(qubits), rng.randint(0, 2))
    if kind == "has":
        return Has(rng.choice(agents), rng.choice(qubits))
    if kind == "init":
        return QubitEqInit(rng.choice(qubits), rng.choice(qubits))
    return QubitEqQubit(rng.choice(qubits), rng.choice(qubits))


def random_formula(rng, net, depth=2):
    if depth == 0 or rng.random() < 0.3:
        return random_atom(rng, net)
    kind = rng.choice(["not", "and", "or", "temporal", "know"])
    if kind == "not":
        return Not(random_formula(rng, net, depth - 1))
    if kind == "and":
        return And(random_formula(rng, net, depth - 1),
                   random_formula(rng, net, depth - 1))
    if kind == "or":
        return Or(random_formula(rng, net, depth - 1),
                  random_formula(rng, net, depth - 1))
    if kind == "temporal":
        op = rng.choice(["EX", "EF", "EG", "AX", "AF", "AG"])
        return Unary(op, random_formula(rng, net, depth - 1))
    agent = rng.choice([a.name for a in net.agents])
    return Know(agent, random_formula(rng, net, depth - 1))
