"""End-to-end acceptance suite.

Covers the bundled protocols (teleportation, key distribution, dense
coding), the quantum-state registry contents, witness structure, the
translation crosscheck, randomized quantum-core and checker-core oracles,
and CLI determinism.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from dmcverify.checker import Model, _label, build_state_graph
from dmcverify.formulas import (
    And,
    GroupKnow,
    Know,
    Not,
    Or,
    QubitEqInit,
    Unary,
    Until,
    VarEq,
    parse_formula,
)
from dmcverify.isbuilder import assemble, crosscheck
from dmcverify.parser import validate
from dmcverify.quantum import (
    PureStateVector,
    apply_correction,
    apply_entangle,
    factored,
    measure,
    tensor,
)
from dmcverify.randomgen import random_network
from dmcverify.semantics import explore

from conftest import protocol_path, run_pipeline

SQ2 = 1.0 / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# 1. teleportation verdicts
# ---------------------------------------------------------------------------

def test_qtp_verdicts_and_runtime():
    t0 = time.perf_counter()
    net, graph, is_, xrep, model, report = run_pipeline("qtp")
    elapsed = time.perf_counter() - t0
    assert [r.verdict for r in report.results] == [True, True, True, False]
    # the negated-knowledge formula is present verbatim and is the one that fails
    assert net.spec.formulas[3] == parse_formula("!(EF K(A, q3 == init(q1)))")
    assert report.results[3].witness is not None
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 2. quantum-state registry of the teleportation run
# ---------------------------------------------------------------------------

def _qtp_expected_states(a, b):
    """The ten distinct quantum states arising during teleportation of
    [a, b] through the entangled pair (|00>+|01>+|10>-|11>)/2."""
    pair = [0.5, 0.5, 0.5, -0.5]
    joint = np.kron([a, b], pair)
    joint[6] *= -1  # controlled-Z between q1 and q2 (indices with q1=q2=1)
    joint[7] *= -1
    return [
        PureStateVector(("q1",), [a, b]),
        PureStateVector(("q2", "q3"), pair),
        PureStateVector(("q1", "q2", "q3"), joint),
        PureStateVector(("q1",), [SQ2, SQ2]),
        PureStateVector(("q1",), [SQ2, -SQ2]),
        PureStateVector(("q2", "q3"),
                        [(a + b) / 2, (a + b) / 2, (a - b) / 2, -(a - b) / 2]),
        PureStateVector(("q2", "q3"),
                        [(a - b) / 2, (a - b) / 2, (a + b) / 2, -(a + b) / 2]),
        PureStateVector(("q3",), [a, -b]),
        PureStateVector(("q3",), [b, a]),
        PureStateVector(("q3",), [-b, a]),
    ]


def test_qtp_registry_matches_expected_states(qtp):
    net, graph, is_, xrep, model, report = qtp
    entries = graph.registry.entries
    assert len(entries) == 10
    expected = _qtp_expected_states(0.6, 0.8)
    matched = set()
    for want in expected:
        hits = [
            name for name, got in entries
            if got.amps.shape == want.amps.shape and got.close_to(want, 1e-6)
        ]
        assert len(hits) == 1, f"expected exactly one match for {want}"
        matched.add(hits[0])
    assert matched == set(graph.registry.names())


# ---------------------------------------------------------------------------
# 3. witness structure of the failed knowledge formula
# ---------------------------------------------------------------------------

def _node_index(graph, name):
    i = int(name[1:]) - 1
    assert graph.node_name(i) == name
    return i


def test_qtp_failed_knowledge_witness_structure(qtp):
    net, graph, is_, xrep, model, report = qtp
    witness = report.results[3].witness
    assert witness["type"] == "path"
    path = witness["states"]
    # the path starts in an initial configuration and follows real edges
    ids = [_node_index(graph, n) for n in path]
    assert ids[0] in graph.initials
    edge_set = {(e.src, e.dst) for e in graph.edges}
    for u, v in zip(ids, ids[1:]):
        assert (u, v) in edge_set

    pair = witness["then"]
    assert pair["type"] == "pair"
    assert pair["agent"] == "A"
    s_name, t_name = pair["states"]
    assert s_name != t_name
    s, t = _node_index(graph, s_name), _node_index(graph, t_name)
    # indistinguishable to Alice, and the teleported state has arrived in both
    assert graph.nodes[s].local_view("A") == graph.nodes[t].local_view("A")
    atom = QubitEqInit("q3", "q1")
    from dmcverify.semantics import eval_config_atom
    assert eval_config_atom(graph, s, atom)
    assert eval_config_atom(graph, t, atom)


# ---------------------------------------------------------------------------
# 4. key distribution and dense coding verdicts
# ---------------------------------------------------------------------------

def test_qkd_verdicts_and_runtime():
    t0 = time.perf_counter()
    net, graph, is_, xrep, model, report = run_pipeline("qkd")
    elapsed = time.perf_counter() - t0
    assert [r.verdict for r in report.results] == [True, True]
    assert elapsed < 5.0


def test_sdc_verdicts_and_runtime():
    t0 = time.perf_counter()
    net, graph, is_, xrep, model, report = run_pipeline("sdc")
    elapsed = time.perf_counter() - t0
    assert [r.verdict for r in report.results] == [True, True, True]
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 5. translation crosscheck
# ---------------------------------------------------------------------------

def test_crosscheck_bundled_protocols(qtp, qkd, sdc):
    for bundle in (qtp, qkd, sdc):
        xrep = bundle[3]
        assert xrep.ok
        assert xrep.mismatches == []


def test_crosscheck_random_networks():
    for seed in range(1, 25):
        net = validate(random_network(seed))
        graph = explore(net)
        is_ = assemble(net, graph)
        xrep = crosscheck(graph, is_)
        assert xrep.ok, f"seed {seed}: {xrep.mismatches}"


def test_crosscheck_detects_mutations():
    """Dropping an environment evolution line must be reported."""
    net, graph, *_ = run_pipeline("qtp")
    is_ = assemble(net, graph)
    env = is_.environment
    keep = [
        line for line in env.evolution
        if len(line.assigns) == 1  # gc-only lines survive
    ]
    assert len(keep) < len(env.evolution)
    env.evolution = tuple(
        line for line in env.evolution
        if len(line.assigns) == 1
    ) + tuple(line for line in env.evolution if len(line.assigns) > 1)[1:]
    xrep = crosscheck(graph, is_)
    assert not xrep.ok
    assert xrep.mismatches


# ---------------------------------------------------------------------------
# 6. quantum core against randomized oracles
# ---------------------------------------------------------------------------

QUBIT_POOL = ("qa", "qb", "qc", "qd")


def _random_state(rng, n):
    amps = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    amps /= np.linalg.norm(amps)
    return PureStateVector(QUBIT_POOL[:n], amps)


def _random_product_state(rng, n):
    """Tensor of random 1-2 qubit factors, so splits provably exist."""
    parts = []
    left = n
    i = 0
    while left:
        k = 2 if left >= 2 and rng.random() < 0.5 else 1
        amps = rng.normal(size=2 ** k) + 1j * rng.normal(size=2 ** k)
        amps /= np.linalg.norm(amps)
        parts.append(PureStateVector(QUBIT_POOL[i:i + k], amps))
        i += k
        left -= k
    state = parts[0]
    for p in parts[1:]:
        state = tensor(state, p)
    return state, len(parts)


def _overlap(x, y):
    return abs(np.vdot(x.amps, y.amps))


def test_quantum_core_randomized():
    rng = np.random.default_rng(20240817)
    for trial in range(1000):
        n = int(rng.integers(1, 5))
        if trial % 2 == 0:
            state = _random_state(rng, n)
            min_factors = None
        else:
            state, min_factors = _random_product_state(rng, n)

        # Pauli corrections: unit norm preserved, involutive
        q = QUBIT_POOL[int(rng.integers(0, n))]
        for kind in ("X", "Z"):
            once = apply_correction(state, q, kind)
            assert abs(np.linalg.norm(once.amps) - 1.0) <= 1e-9
            twice = apply_correction(once, q, kind)
            assert float(np.max(np.abs(twice.amps - state.amps))) <= 1e-12

        # controlled-Z: unit norm preserved, involutive
        if n >= 2:
            r = QUBIT_POOL[(QUBIT_POOL.index(q) + 1) % n]
            once = apply_entangle(state, q, r)
            assert abs(np.linalg.norm(once.amps) - 1.0) <= 1e-9
            twice = apply_entangle(once, q, r)
            assert float(np.max(np.abs(twice.amps - state.amps))) <= 1e-12

        # measurement in a random rotated basis: probabilities sum to one
        alpha = float(rng.uniform(0.0, 2.0 * math.pi))
        outs = measure(state, q, alpha)
        assert abs(sum(o.probability for o in outs) - 1.0) <= 1e-9
        for o in outs:
            if o.residual is not None:
                assert abs(np.linalg.norm(o.residual.amps) - 1.0) <= 1e-9

        # factorization round-trip: the tensor of the minimal factors is the
        # original state up to global phase
        factors = factored(state)
        if min_factors is not None:
            assert len(factors) >= min_factors
        rebuilt = factors[0]
        for f in factors[1:]:
            rebuilt = tensor(rebuilt, f)
        rebuilt = rebuilt.reordered(state.qubits)
        assert abs(_overlap(rebuilt, state) - 1.0) <= 1e-7


# ---------------------------------------------------------------------------
# 7. checker fixpoints against brute-force oracles
# ---------------------------------------------------------------------------

def _oracle_walk(succ, hold, n):
    """States with a length-n walk staying inside hold (pigeonhole: such a
    walk exists iff an infinite hold-path exists)."""
    cur = set(hold)
    for _ in range(n):
        cur = {s for s in hold if any(v in cur for v in succ[s])}
    return cur


def _oracle_reach(succ, hold, target, n):
    """States with a path of length <= n to target whose prefix stays in hold."""
    cur = set(target)
    for _ in range(n):
        cur = set(target) | {s for s in hold if any(v in cur for v in succ[s])}
    return cur


def _oracle_eval(f, m, atoms):
    n = m.n
    full = set(range(n))
    succ = m.successors
    if isinstance(f, VarEq):
        return set(atoms[f.var])
    if isinstance(f, Not):
        return full - _oracle_eval(f.sub, m, atoms)
    if isinstance(f, And):
        return _oracle_eval(f.left, m, atoms) & _oracle_eval(f.right, m, atoms)
    if isinstance(f, Or):
        return _oracle_eval(f.left, m, atoms) | _oracle_eval(f.right, m, atoms)
    if isinstance(f, Unary):
        sub = _oracle_eval(f.sub, m, atoms)
        if f.op == "EX":
            return {s for s in full if any(v in sub for v in succ[s])}
        if f.op == "AX":
            return {s for s in full if all(v in sub for v in succ[s])}
        if f.op == "EF":
            return _oracle_reach(succ, full, sub, n)
        if f.op == "AG":
            return full - _oracle_reach(succ, full, full - sub, n)
        if f.op == "EG":
            return _oracle_walk(succ, sub, n)
        if f.op == "AF":
            return full - _oracle_walk(succ, full - sub, n)
        raise ValueError(f.op)
    if isinstance(f, Until):
        a = _oracle_eval(f.left, m, atoms)
        b = _oracle_eval(f.right, m, atoms)
        if f.quantifier == "E":
            return _oracle_reach(succ, a, b, n)
        nb = full - b
        bad = _oracle_walk(succ, nb, n) | _oracle_reach(succ, nb, nb - a, n)
        return full - bad
    if isinstance(f, Know):
        sub = _oracle_eval(f.sub, m, atoms)
        part = m.partitions[f.agent]
        return {
            s for s in full
            if all(t in sub for t in full if part[t] == part[s])
        }
    if isinstance(f, GroupKnow):
        sub = _oracle_eval(f.sub, m, atoms)
        members = m.groups[f.group]
        if f.op == "GK":
            out = full
            for a in members:
                out = out & _oracle_eval(Know(a, f.sub), m, atoms)
            return out
        if f.op == "DK":
            key = lambda s: tuple(m.partitions[a][s] for a in members)
            return {
                s for s in full
                if all(t in sub for t in full if key(t) == key(s))
            }
        # CK: closure over the union of the members' relations
        out = set()
        for s in full:
            reach = {s}
            stack = [s]
            while stack:
                u = stack.pop()
                for a in members:
                    pu = m.partitions[a][u]
                    for v in full:
                        if m.partitions[a][v] == pu and v not in reach:
                            reach.add(v)
                            stack.append(v)
            if reach <= sub:
                out.add(s)
        return out
    raise TypeError(f)


def _random_model(rng):
    n = rng.randrange(2, 50)
    succ = [
        sorted(rng.sample(range(n), rng.randint(1, min(3, n))))
        for _ in range(n)
    ]
    agents = ["A1", "A2"]
    partitions = {
        a: [rng.randrange(max(1, n // 3)) for _ in range(n)] for a in agents
    }
    atoms = {
        f"p{i}": {s for s in range(n) if rng.random() < 0.5} for i in range(3)
    }
    model = Model(
        n, succ, [0], agents, partitions, {"all": agents},
        lambda atom, s: s in atoms[atom.var],
    )
    return model, atoms


def _random_ctlk(rng, depth=3):
    if depth == 0 or rng.random() < 0.25:
        return VarEq("A1", f"p{rng.randrange(3)}", 1)
    kind = rng.choice(["not", "and", "or", "unary", "until", "know", "group"])
    if kind == "not":
        return Not(_random_ctlk(rng, depth - 1))
    if kind == "and":
        return And(_random_ctlk(rng, depth - 1), _random_ctlk(rng, depth - 1))
    if kind == "or":
        return Or(_random_ctlk(rng, depth - 1), _random_ctlk(rng, depth - 1))
    if kind == "unary":
        op = rng.choice(["EX", "EF", "EG", "AX", "AF", "AG"])
        return Unary(op, _random_ctlk(rng, depth - 1))
    if kind == "until":
        return Until(rng.choice("EA"), _random_ctlk(rng, depth - 1),
                     _random_ctlk(rng, depth - 1))
    if kind == "know":
        return Know(rng.choice(["A1", "A2"]), _random_ctlk(rng, depth - 1))
    return GroupKnow(rng.choice(["GK", "DK", "CK"]), "all",
                     _random_ctlk(rng, depth - 1))


def test_fixpoint_labels_match_oracle():
    import random

    rng = random.Random(4242)
    for _ in range(100):
        model, atoms = _random_model(rng)
        memo = {}
        for _ in range(4):
            f = _random_ctlk(rng)
            got = set(_label(model, f, memo))
            want = _oracle_eval(f, model, atoms)
            assert got == want, f"label mismatch for {f}"


def test_knowledge_is_s5():
    import random

    rng = random.Random(99)
    for _ in range(40):
        model, atoms = _random_model(rng)
        memo = {}
        phi = _random_ctlk(rng, depth=2)
        for agent in ("A1", "A2"):
            k = _label(model, Know(agent, phi), memo)
            sat = _label(model, phi, memo)
            assert k <= sat  # truth
            assert k == _label(model, Know(agent, Know(agent, phi)), memo)
            nk = _label(model, Not(Know(agent, phi)), memo)
            assert nk <= _label(model, Know(agent, Not(Know(agent, phi))), memo)
        ck = _label(model, GroupKnow("CK", "all", phi), memo)
        gk = _label(model, GroupKnow("GK", "all", phi), memo)
        dk = _label(model, GroupKnow("DK", "all", phi), memo)
        k1 = _label(model, Know("A1", phi), memo)
        assert ck <= gk <= k1 <= _label(model, phi, memo)
        assert gk <= dk  # distributed knowledge refines everybody-knows


# ---------------------------------------------------------------------------
# 8. report determinism
# ---------------------------------------------------------------------------

def _check_json(path, *extra):
    out = subprocess.run(
        [sys.executable, "-m", "dmcverify.cli", "check", "--json", path, *extra],
        capture_output=True, text=True,
    )
    assert out.returncode in (0, 1), out.stderr
    rep = json.loads(out.stdout)
    del rep["timings"]
    for f in rep["formulas"]:
        del f["seconds"]
    return json.dumps(rep, sort_keys=True), out.returncode


def test_reports_are_deterministic():
    for name in ("qtp", "qkd", "sdc"):
        path = protocol_path(name)
        base, code = _check_json(path)
        again, code2 = _check_json(path)
        assert again == base
        assert code2 == code
        for seed in (1, 7):
            shuffled, code3 = _check_json(path, "--seed-order", str(seed))
            assert shuffled == base
            assert code3 == code


# ---------------------------------------------------------------------------
# 9. state counts and the teleportation branch structure
# ---------------------------------------------------------------------------

def test_state_counts_stable(qtp, qkd, sdc):
    for bundle, nodes in ((qtp, 20), (qkd, 56), (sdc, 28)):
        net, graph, is_, xrep, model, report = bundle
        assert len(graph.nodes) == nodes
        assert model.n == nodes  # executed system is isomorphic
        for seed in (3, 11):
            regraph = explore(net, shuffle_seed=seed)
            assert len(regraph.nodes) == nodes
            assert regraph.registry.names() == graph.registry.names()


def test_qtp_four_branches_all_deliver(qtp):
    net, graph, is_, xrep, model, report = qtp
    outs = {}
    for e in graph.edges:
        outs.setdefault(e.src, []).append(e)
    terminals = [
        i for i in range(len(graph.nodes))
        if all(e.step is None and e.dst == i for e in outs[i])
    ]
    assert len(terminals) == 4
    seen_outcomes = set()
    for i in terminals:
        c = graph.nodes[i]
        f = c.factor_of("q3")
        assert f.qubits == ("q3",)
        assert graph.registry.intern(f) == "qs1"  # the teleported input state
        b = c.agent("B")
        seen_outcomes.add((b.value("s1"), b.value("s2")))
    assert seen_outcomes == {(0, 0), (0, 1), (1, 0), (1, 1)}
